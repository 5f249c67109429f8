"""
Reverse-mode automatic differentiation on a Wengert list.

A Tape is an append-only list of nodes in topological order. Nodes are
evaluated as they are recorded (define-by-run); ``forward`` re-evaluates a
retained tape for fresh inputs and ``backward`` runs one reverse sweep that
accumulates adjoints into per-node slots.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError, GraphOrderError, NumericError, TapeStateError

logger = logging.getLogger(__name__)


class Op(str, Enum):
    """Primitive differentiable functions a node can compute."""

    INPUT = 'input'
    PARAMETER = 'parameter'
    CONSTANT = 'constant'
    MATVEC = 'matvec'
    ADD = 'add'
    SUB = 'sub'
    MUL = 'mul'
    DIV = 'div'
    SCALE = 'scale'
    SCALAR_MUL = 'scalar-mul'
    TANH = 'tanh'
    SIGMOID = 'sigmoid'
    EXP = 'exp'
    SIN = 'sin'
    COS = 'cos'
    SOFTMAX = 'exp-sum-softmax'
    CONCAT = 'concat'
    DOT = 'dot'
    COSINE = 'cosine'
    BRANCH_MIX = 'branch-mix'
    SLICE = 'slice'
    SUM = 'sum'
    OUTER = 'outer'
    WEIGHTED_SUM = 'weighted-sum'


LEAF_OPS = frozenset({Op.INPUT, Op.PARAMETER, Op.CONSTANT})


@dataclass
class Node:
    op: Op
    parents: Tuple[int, ...]
    value: Optional[np.ndarray]
    attrs: Dict[str, Any] = field(default_factory=dict)
    adjoint: Optional[np.ndarray] = None


# --- primitive kernels -------------------------------------------------------
# Each primitive maps to (forward, vjp). forward(args, attrs) -> value.
# vjp(args, out, g, attrs) -> one adjoint contribution per parent.

def _require_scalar(x: np.ndarray, what: str) -> float:
    if x.shape != (1,):
        raise DimensionError(f"{what} must have shape (1,), got {x.shape}")
    return float(x[0])


def _require_same(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what} shape mismatch: {a.shape} vs {b.shape}")


def _softmax(z: np.ndarray) -> np.ndarray:
    if z.ndim != 1 or z.size == 0:
        raise ContractError(f"softmax needs a non-empty vector, got shape {z.shape}")
    shifted = np.exp(z - z.max())
    return shifted / shifted.sum()


def _cosine_parts(a: np.ndarray, b: np.ndarray) -> Tuple[float, float, float]:
    _require_same(a, b, 'cosine')
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise NumericError("cosine similarity is undefined for a zero vector")
    # Rounding can push parallel vectors a ulp past 1.
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0)), na, nb


def _fwd_binary(kind):
    def forward(args, attrs):
        _require_same(args[0], args[1], kind)
        return T.elementwise(kind, args[0], args[1])
    return forward


def _fwd_scalar_mul(args, attrs):
    return T.as_tensor(_require_scalar(args[0], 'scalar-mul factor') * args[1])


def _fwd_concat(args, attrs):
    return T.concat(*args)


def _fwd_dot(args, attrs):
    a, b = args
    if a.ndim != 1:
        raise DimensionError(f"dot expects 1-D tensors, got {a.shape}")
    _require_same(a, b, 'dot')
    return T.scalar(a @ b)


def _fwd_branch_mix(args, attrs):
    a, y, z = args
    weight = _require_scalar(a, 'branch weight')
    _require_same(y, z, 'branch-mix')
    return T.as_tensor(weight * y + (1.0 - weight) * z)


def _fwd_slice(args, attrs):
    x = args[0]
    start, stop = attrs['start'], attrs['stop']
    if x.ndim != 1 or not 0 <= start < stop <= x.shape[0]:
        raise DimensionError(f"slice [{start}:{stop}] out of range for shape {x.shape}")
    return T.as_tensor(x[start:stop])


def _fwd_weighted_sum(args, attrs):
    weights, values = args[0], args[1:]
    if weights.shape != (len(values),):
        raise DimensionError(f"weights shape {weights.shape} does not match {len(values)} values")
    for v in values:
        _require_same(values[0], v, 'weighted-sum value')
    return T.as_tensor(sum(w * v for w, v in zip(weights, values)))


def _fwd_div(args, attrs):
    _require_same(args[0], args[1], 'div')
    return T.as_tensor(args[0] / args[1])


def _vjp_concat(args, out, g, attrs):
    grads, offset = [], 0
    for part in args:
        grads.append(g[offset:offset + part.shape[0]])
        offset += part.shape[0]
    return grads


def _vjp_cosine(args, out, g, attrs):
    a, b = args
    c, na, nb = _cosine_parts(a, b)
    return (
        g[0] * (b / (na * nb) - c * a / na ** 2),
        g[0] * (a / (na * nb) - c * b / nb ** 2),
    )


def _vjp_slice(args, out, g, attrs):
    full = np.zeros_like(args[0])
    full[attrs['start']:attrs['stop']] = g
    return (full,)


def _vjp_weighted_sum(args, out, g, attrs):
    weights, values = args[0], args[1:]
    grad_w = np.array([float(np.sum(g * v)) for v in values])
    return [grad_w] + [w * g for w in weights]


def _vjp_exp(args, out, g, attrs):
    # Zero slope where the input was clamped.
    return (g * out * (args[0] <= T.EXP_CLAMP),)


def _vjp_softmax(args, out, g, attrs):
    return (out * (g - float(g @ out)),)


PRIMITIVES: Dict[Op, Tuple[Callable, Callable]] = {
    Op.MATVEC: (
        lambda args, attrs: T.matvec(args[0], args[1]),
        lambda args, out, g, attrs: (np.outer(g, args[1]), args[0].T @ g),
    ),
    Op.ADD: (_fwd_binary('add'), lambda args, out, g, attrs: (g, g)),
    Op.SUB: (_fwd_binary('sub'), lambda args, out, g, attrs: (g, -g)),
    Op.MUL: (_fwd_binary('mul'), lambda args, out, g, attrs: (g * args[1], g * args[0])),
    Op.DIV: (
        _fwd_div,
        lambda args, out, g, attrs: (g / args[1], -g * args[0] / args[1] ** 2),
    ),
    Op.SCALE: (
        lambda args, attrs: T.elementwise('scale', args[0], attrs['factor']),
        lambda args, out, g, attrs: (g * attrs['factor'],),
    ),
    Op.SCALAR_MUL: (
        _fwd_scalar_mul,
        lambda args, out, g, attrs: (np.array([float(np.sum(g * args[1]))]), args[0][0] * g),
    ),
    Op.TANH: (
        lambda args, attrs: T.elementwise('tanh', args[0]),
        lambda args, out, g, attrs: (g * (1.0 - out ** 2),),
    ),
    Op.SIGMOID: (
        lambda args, attrs: T.elementwise('sigmoid', args[0]),
        lambda args, out, g, attrs: (g * out * (1.0 - out),),
    ),
    Op.EXP: (lambda args, attrs: T.elementwise('exp', args[0]), _vjp_exp),
    Op.SIN: (
        lambda args, attrs: T.as_tensor(np.sin(args[0])),
        lambda args, out, g, attrs: (g * np.cos(args[0]),),
    ),
    Op.COS: (
        lambda args, attrs: T.as_tensor(np.cos(args[0])),
        lambda args, out, g, attrs: (-g * np.sin(args[0]),),
    ),
    Op.SOFTMAX: (lambda args, attrs: T.as_tensor(_softmax(args[0])), _vjp_softmax),
    Op.CONCAT: (_fwd_concat, _vjp_concat),
    Op.DOT: (_fwd_dot, lambda args, out, g, attrs: (g[0] * args[1], g[0] * args[0])),
    Op.COSINE: (lambda args, attrs: T.scalar(_cosine_parts(args[0], args[1])[0]), _vjp_cosine),
    Op.BRANCH_MIX: (
        _fwd_branch_mix,
        lambda args, out, g, attrs: (
            np.array([float(np.sum(g * (args[1] - args[2])))]),
            args[0][0] * g,
            (1.0 - args[0][0]) * g,
        ),
    ),
    Op.SLICE: (_fwd_slice, _vjp_slice),
    Op.SUM: (
        lambda args, attrs: T.scalar(np.sum(args[0])),
        lambda args, out, g, attrs: (np.full(args[0].shape, g[0]),),
    ),
    Op.OUTER: (
        lambda args, attrs: T.outer(args[0], args[1]),
        lambda args, out, g, attrs: (g @ args[1], g.T @ args[0]),
    ),
    Op.WEIGHTED_SUM: (_fwd_weighted_sum, _vjp_weighted_sum),
}


class Tape:
    """
    Topologically ordered record of a differentiable computation.

    The first ``input_count`` nodes are the graph inputs; parameters and
    constants are further leaves. ``param_registry`` maps parameter names to
    node indices so gradients can be returned by name.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.input_count = 0
        self.param_registry: Dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    # -- construction ---------------------------------------------------------

    def record(self, op: Op, parents: Sequence[int], value=None, **attrs) -> int:
        """
        Append a node and return its index.

        ``value`` is the already computed output of the primitive; pass None to
        record structure only and let ``forward`` fill it in.
        """
        op = Op(op)
        index = len(self.nodes)
        parents = tuple(int(p) for p in parents)
        for parent in parents:
            if not 0 <= parent < index:
                raise GraphOrderError(
                    f"node {index} ({op.value}) references parent {parent}; parents must precede it"
                )
        if op in LEAF_OPS and parents:
            raise GraphOrderError(f"leaf node {index} ({op.value}) cannot have parents")
        if op == Op.INPUT and index != self.input_count:
            raise GraphOrderError(f"input node {index} recorded after non-input nodes")
        if value is not None:
            value = T.as_tensor(value)
        self.nodes.append(Node(op=op, parents=parents, value=value, attrs=attrs))
        if op == Op.INPUT:
            self.input_count += 1
        return index

    def input(self, value, name: Optional[str] = None) -> int:
        index = self.record(Op.INPUT, (), value)
        if name is not None:
            self._register(name, index)
        return index

    def param(self, name: str, value=None) -> int:
        """Leaf for a learnable tensor; repeated lookups return the same node."""
        if name in self.param_registry:
            return self.param_registry[name]
        if value is None:
            raise TapeStateError(f"parameter {name!r} is not on the tape and no value was given")
        index = self.record(Op.PARAMETER, (), value)
        self._register(name, index)
        return index

    def constant(self, value) -> int:
        return self.record(Op.CONSTANT, (), value)

    def _register(self, name: str, index: int) -> None:
        if name in self.param_registry:
            raise ContractError(f"parameter name {name!r} already registered")
        self.param_registry[name] = index

    def apply(self, op: Op, *parents: int, **attrs) -> int:
        """Record ``op`` over ``parents`` and evaluate it immediately when possible."""
        op = Op(op)
        forward_fn, _ = PRIMITIVES[op]
        args = [self.nodes[p].value if 0 <= p < len(self.nodes) else None for p in parents]
        value = None
        if all(arg is not None for arg in args):
            value = forward_fn(args, attrs)
        return self.record(op, parents, value, **attrs)

    # -- evaluation -----------------------------------------------------------

    def value(self, index: int) -> np.ndarray:
        node = self.nodes[index]
        if node.value is None:
            raise TapeStateError(f"node {index} has not been evaluated")
        return node.value

    def forward(self, inputs: Sequence, outputs: Optional[Sequence[int]] = None) -> List[np.ndarray]:
        """
        Re-evaluate the whole tape in index order for new input values.

        Returns the values of ``outputs`` (default: the last node).
        """
        if len(inputs) != self.input_count:
            raise ContractError(f"tape has {self.input_count} inputs, got {len(inputs)}")
        for index, node in enumerate(self.nodes):
            if node.op == Op.INPUT:
                fresh = T.as_tensor(inputs[index])
                if node.value is not None and fresh.shape != node.value.shape:
                    raise DimensionError(
                        f"node {index} (input) expects shape {node.value.shape}, got {fresh.shape}"
                    )
                node.value = fresh
                continue
            if node.op in LEAF_OPS:
                if node.value is None:
                    raise TapeStateError(f"node {index} ({node.op.value}) has no value")
                continue
            forward_fn, _ = PRIMITIVES[node.op]
            args = [self.nodes[p].value for p in node.parents]
            try:
                node.value = forward_fn(args, node.attrs)
            except DimensionError as exc:
                raise DimensionError(f"node {index} ({node.op.value}): {exc}") from exc
        if outputs is None:
            outputs = [len(self.nodes) - 1]
        return [self.value(i) for i in outputs]

    def backward(self, output: int) -> Dict[str, np.ndarray]:
        """
        One reverse sweep from a scalar output node.

        Adjoints are zeroed, the output's adjoint is set to 1 and contributions
        are accumulated parent-wards in reverse index order.

        Returns:
            Gradient of the output for every registered parameter.
        """
        if not 0 <= output < len(self.nodes):
            raise ContractError(f"output node {output} is not on the tape (size {len(self.nodes)})")
        for index in range(output + 1):
            if self.nodes[index].value is None:
                raise TapeStateError(f"backward called before forward: node {index} has no value")
        out_value = self.nodes[output].value
        if out_value.shape != (1,):
            raise ContractError(f"backward needs a scalar output, node {output} has shape {out_value.shape}")

        for node in self.nodes:
            node.adjoint = np.zeros(node.value.shape) if node.value is not None else None
        self.nodes[output].adjoint = np.ones(1)

        for index in range(output, -1, -1):
            node = self.nodes[index]
            if node.op in LEAF_OPS or not node.adjoint.any():
                continue
            _, vjp_fn = PRIMITIVES[node.op]
            args = [self.nodes[p].value for p in node.parents]
            contributions = vjp_fn(args, node.value, node.adjoint, node.attrs)
            for parent, contribution in zip(node.parents, contributions):
                self.nodes[parent].adjoint += contribution

        return {name: T.as_tensor(self.nodes[i].adjoint) for name, i in self.param_registry.items()}

    def adjoint(self, index: int) -> np.ndarray:
        node = self.nodes[index]
        if node.adjoint is None:
            raise TapeStateError(f"node {index} has no adjoint; run backward first")
        return T.as_tensor(node.adjoint)

    # -- primitive shorthands ---------------------------------------------------

    def matvec(self, m: int, v: int) -> int:
        return self.apply(Op.MATVEC, m, v)

    def add(self, a: int, b: int) -> int:
        return self.apply(Op.ADD, a, b)

    def sub(self, a: int, b: int) -> int:
        return self.apply(Op.SUB, a, b)

    def mul(self, a: int, b: int) -> int:
        return self.apply(Op.MUL, a, b)

    def div(self, a: int, b: int) -> int:
        return self.apply(Op.DIV, a, b)

    def scale(self, a: int, factor: float) -> int:
        return self.apply(Op.SCALE, a, factor=float(factor))

    def scalar_mul(self, s: int, x: int) -> int:
        return self.apply(Op.SCALAR_MUL, s, x)

    def tanh(self, a: int) -> int:
        return self.apply(Op.TANH, a)

    def sigmoid(self, a: int) -> int:
        return self.apply(Op.SIGMOID, a)

    def exp(self, a: int) -> int:
        return self.apply(Op.EXP, a)

    def sin(self, a: int) -> int:
        return self.apply(Op.SIN, a)

    def cos(self, a: int) -> int:
        return self.apply(Op.COS, a)

    def softmax(self, z: int) -> int:
        return self.apply(Op.SOFTMAX, z)

    def concat(self, *parts: int) -> int:
        return self.apply(Op.CONCAT, *parts)

    def dot(self, a: int, b: int) -> int:
        return self.apply(Op.DOT, a, b)

    def cosine(self, a: int, b: int) -> int:
        return self.apply(Op.COSINE, a, b)

    def branch_mix(self, a: int, y: int, z: int) -> int:
        return self.apply(Op.BRANCH_MIX, a, y, z)

    def slice(self, a: int, start: int, stop: int) -> int:
        return self.apply(Op.SLICE, a, start=int(start), stop=int(stop))

    def sum(self, a: int) -> int:
        return self.apply(Op.SUM, a)

    def outer(self, a: int, b: int) -> int:
        return self.apply(Op.OUTER, a, b)

    def weighted_sum(self, weights: int, values: Sequence[int]) -> int:
        return self.apply(Op.WEIGHTED_SUM, weights, *values)
