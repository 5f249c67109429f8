"""
Central finite-difference validation of tape gradients.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from . import tensor as T
from .errors import ContractError, NumericError
from .tape import Tape

logger = logging.getLogger(__name__)

Builder = Callable[..., int]
Point = Union[Sequence[np.ndarray], Mapping[str, np.ndarray]]


@dataclass
class ParameterCheck:
    name: str
    max_rel_error: float
    passed: bool


@dataclass
class GradCheckReport:
    tol: float
    checks: Dict[str, ParameterCheck] = field(default_factory=dict)

    @property
    def max_rel_error(self) -> float:
        return max((c.max_rel_error for c in self.checks.values()), default=0.0)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def as_dict(self) -> dict:
        return {
            'passed': self.passed,
            'tol': self.tol,
            'max_rel_error': self.max_rel_error,
            'parameters': {
                name: {'max_rel_error': c.max_rel_error, 'passed': c.passed}
                for name, c in self.checks.items()
            },
        }


def relative_error(analytic: np.ndarray, numeric: np.ndarray, atol: float = 1e-8) -> np.ndarray:
    """
    Coordinate-wise |a - n| / max(|a|, |n|); coordinates whose absolute
    difference is within ``atol`` count as exact.
    """
    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    with np.errstate(divide='ignore', invalid='ignore'):
        rel = np.where(denom > 0, diff / denom, 0.0)
    return np.where(diff <= atol, 0.0, rel)


def _named_point(point: Point) -> List[Tuple[str, np.ndarray]]:
    if isinstance(point, Mapping):
        return [(name, T.as_tensor(value)) for name, value in point.items()]
    return [(f"x{i}", T.as_tensor(value)) for i, value in enumerate(point)]


def grad_check(
    builder: Builder,
    point: Point,
    step: float = 1e-6,
    tol: float = 1e-5,
    atol: float = 1e-8,
) -> GradCheckReport:
    """
    Compare reverse-mode gradients against central differences.

    Args:
        builder: called as ``builder(tape, *input_nodes)``; records a graph on
            the tape and returns the index of its scalar output. Inputs are
            registered under their names, so a model that looks up
            ``tape.param(name)`` for one of them differentiates against the
            probed value.
        point: tensors to differentiate at, positional or by name
        step: finite-difference step h
        tol: pass threshold on the max relative error

    Returns:
        GradCheckReport with one entry per input tensor.
    """
    if step <= 0:
        raise ContractError(f"finite-difference step must be positive, got {step}")
    named = _named_point(point)
    tape = Tape()
    nodes = [tape.input(value, name=name) for name, value in named]
    output = builder(tape, *nodes)
    if tape.value(output).shape != (1,):
        raise ContractError(f"builder must return a scalar node, got shape {tape.value(output).shape}")

    analytic = tape.backward(output)
    base = [np.array(value) for _, value in named]
    report = GradCheckReport(tol=tol)

    def evaluate(values: List[np.ndarray], name: str, coordinate: int) -> float:
        result = float(tape.forward(values, outputs=[output])[0][0])
        if not np.isfinite(result):
            raise NumericError(f"non-finite output while probing {name}[{coordinate}]", index=coordinate)
        return result

    for position, (name, value) in enumerate(named):
        numeric = np.zeros(value.size)
        for coordinate in range(value.size):
            probe = [np.array(v) for v in base]
            flat = probe[position].reshape(-1)
            flat[coordinate] = value.reshape(-1)[coordinate] + step
            f_plus = evaluate(probe, name, coordinate)
            flat[coordinate] = value.reshape(-1)[coordinate] - step
            f_minus = evaluate(probe, name, coordinate)
            numeric[coordinate] = (f_plus - f_minus) / (2.0 * step)

        errors = relative_error(np.asarray(analytic[name]).reshape(-1), numeric, atol)
        worst = float(errors.max()) if errors.size else 0.0
        report.checks[name] = ParameterCheck(name=name, max_rel_error=worst, passed=worst < tol)
        if worst < tol:
            logger.info(f"gradcheck {name}: max rel error {worst:.3e}")
        else:
            logger.warning(f"gradcheck {name}: max rel error {worst:.3e} exceeds {tol:.1e}")

    # Leave the tape holding the unperturbed values.
    tape.forward(base, outputs=[output])
    return report
