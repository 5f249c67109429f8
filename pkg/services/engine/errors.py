"""
Exception hierarchy for the differentiable-programming engine.
"""
from typing import Optional


class EngineError(Exception):
    """Base class for every error raised by the engine and its models."""


class DimensionError(EngineError):
    """Operand shapes do not fit the operation."""


class GraphOrderError(EngineError):
    """A node references a parent that is not strictly earlier on the tape."""


class TapeStateError(EngineError):
    """Tape (or stateful layer) used out of sequence, e.g. backward before forward."""


class ContractError(EngineError):
    """A documented precondition was violated by the caller."""


class NumericError(EngineError):
    """Non-finite or undefined value encountered."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class TrainingError(EngineError):
    """Training diverged or produced unusable gradients."""

    def __init__(self, message: str, epoch: Optional[int] = None, parameter: Optional[str] = None):
        super().__init__(message)
        self.epoch = epoch
        self.parameter = parameter


class TrajectoryError(EngineError):
    """A simulated trajectory left the representable range."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class DataError(EngineError):
    """Dataset construction contract violated (too short, zero variance, bad CSV)."""


class ConfigError(EngineError):
    """Experiment configuration is missing or invalid."""
