"""
Differentiable-programming core: tensors, the tape and gradient checking.
"""
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    EngineError,
    GraphOrderError,
    NumericError,
    TapeStateError,
    TrainingError,
    TrajectoryError,
)
from .gradcheck import GradCheckReport, grad_check
from .tape import Node, Op, Tape
from .tensor import as_tensor, concat, elementwise, matvec

__all__ = [
    'ConfigError', 'ContractError', 'DataError', 'DimensionError', 'EngineError',
    'GraphOrderError', 'NumericError', 'TapeStateError', 'TrainingError', 'TrajectoryError',
    'GradCheckReport', 'grad_check', 'Node', 'Op', 'Tape',
    'as_tensor', 'concat', 'elementwise', 'matvec',
]
