"""
Dense 1-D/2-D float64 tensors and the handful of linear-algebra kernels the
engine is built on.

Tensors are plain numpy arrays marked read-only, so they can be shared between
tapes and threads without copying.
"""
import logging
from typing import Callable, Dict, Iterable, Sequence, Union

import numpy as np

from .errors import ContractError, DimensionError

logger = logging.getLogger(__name__)

Tensor = np.ndarray
Scalar = Union[int, float]

# exp saturates here instead of returning inf.
EXP_CLAMP = 700.0


def as_tensor(data, shape: Sequence[int] = None) -> Tensor:
    """
    Build an immutable float64 tensor.

    Args:
        data: scalar, nested sequence or array
        shape: optional target shape; data is reshaped row-major

    Returns:
        Read-only 1-D or 2-D array. Scalars become shape (1,).
    """
    array = np.array(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != array.size:
            raise DimensionError(f"cannot reshape {array.size} values to shape {shape}")
        array = array.reshape(shape)
    if array.ndim == 0:
        array = array.reshape(1)
    if array.ndim not in (1, 2):
        raise DimensionError(f"tensors are 1-D or 2-D, got shape {array.shape}")
    array.flags.writeable = False
    return array


def zeros(*shape: int) -> Tensor:
    return as_tensor(np.zeros(shape))


def scalar(value: Scalar) -> Tensor:
    return as_tensor([value])


def check_same_shape(a: Tensor, b: Tensor, what: str = 'operands') -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what} shape mismatch: {a.shape} vs {b.shape}")


def matvec(m: Tensor, v: Tensor) -> Tensor:
    """Matrix-vector product; m is (rows, cols), v has length cols."""
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise DimensionError(f"matvec expects (r, c) x (c,), got {m.shape} x {v.shape}")
    return as_tensor(m @ v)


def safe_exp(x) -> np.ndarray:
    return np.exp(np.minimum(x, EXP_CLAMP))


def sigmoid(x) -> np.ndarray:
    # Evaluated branch-wise so neither side overflows.
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    ex = np.exp(x[~positive])
    out[~positive] = ex / (1.0 + ex)
    return out


_UNARY: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    'tanh': np.tanh,
    'sigmoid': sigmoid,
    'exp': safe_exp,
}

_BINARY: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    'add': np.add,
    'sub': np.subtract,
    'mul': np.multiply,
}

ELEMENTWISE_KINDS = tuple(_UNARY) + tuple(_BINARY) + ('scale',)


def elementwise(kind: str, a: Tensor, b: Union[Tensor, Scalar, None] = None) -> Tensor:
    """
    Pointwise kernels.

    Unary kinds (tanh, sigmoid, exp) ignore b. Binary kinds (add, sub, mul)
    need b with a's exact shape; there is no broadcasting. scale multiplies a
    by the scalar b.
    """
    if kind in _UNARY:
        return as_tensor(_UNARY[kind](a))
    if kind == 'scale':
        if b is None or np.ndim(b) > 1 or np.size(b) != 1:
            raise DimensionError(f"scale expects a scalar factor, got {np.shape(b)}")
        return as_tensor(a * float(np.asarray(b).reshape(-1)[0]))
    if kind in _BINARY:
        if not isinstance(b, np.ndarray):
            raise DimensionError(f"{kind} expects a tensor operand of shape {a.shape}")
        check_same_shape(a, b, kind)
        return as_tensor(_BINARY[kind](a, b))
    raise ContractError(f"unknown elementwise kind: {kind!r} (expected one of {ELEMENTWISE_KINDS})")


def concat(*parts: Tensor) -> Tensor:
    """Join 1-D tensors end to end, first argument first."""
    for part in parts:
        if part.ndim != 1:
            raise DimensionError(f"concat expects 1-D tensors, got shape {part.shape}")
    if not parts:
        return as_tensor(np.zeros(0))
    return as_tensor(np.concatenate(parts))


def outer(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionError(f"outer expects 1-D tensors, got {a.shape} and {b.shape}")
    return as_tensor(np.outer(a, b))


def stack_rows(rows: Iterable[Tensor]) -> Tensor:
    """Stack equal-length 1-D tensors into a 2-D tensor, one per row."""
    rows = list(rows)
    if not rows:
        raise DimensionError("cannot stack an empty list of rows")
    for row in rows:
        check_same_shape(rows[0], row, 'row')
    return as_tensor(np.vstack(rows))
