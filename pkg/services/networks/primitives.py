"""
Differentiable building blocks: dense layers, softmax, attention scores,
query/key-value attention, self-attention and differentiable branching.

Every function records onto the caller's tape and returns node indices.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from services.engine.errors import ContractError, DimensionError
from services.engine.tape import Tape

from .params import ModelParams, ParamInitializer

logger = logging.getLogger(__name__)

ACTIVATIONS = ('tanh', 'sigmoid', 'identity', 'softmax')
SCORE_KINDS = ('feedforward', 'cosine')


def activate(tape: Tape, activation: str, node: int) -> int:
    if activation == 'tanh':
        return tape.tanh(node)
    if activation == 'sigmoid':
        return tape.sigmoid(node)
    if activation == 'softmax':
        return tape.softmax(node)
    if activation == 'identity':
        return node
    raise ContractError(f"unknown activation {activation!r} (expected one of {ACTIVATIONS})")


@dataclass
class DenseLayer:
    """sigma(W x + b); the bias is optional so the bias-free form is available."""

    params: ModelParams
    name: str
    activation: str = 'identity'
    bias: bool = True

    @classmethod
    def create(
        cls,
        params: ModelParams,
        name: str,
        in_dim: int,
        out_dim: int,
        init: ParamInitializer,
        activation: str = 'identity',
        bias: bool = True,
    ) -> 'DenseLayer':
        if activation not in ACTIVATIONS:
            raise ContractError(f"unknown activation {activation!r}")
        params.add(f"{name}.W", init.uniform(out_dim, in_dim))
        if bias:
            params.add(f"{name}.b", init.zeros(out_dim))
        return cls(params=params, name=name, activation=activation, bias=bias)

    @property
    def W(self) -> np.ndarray:
        return self.params[f"{self.name}.W"]

    @property
    def b(self) -> np.ndarray:
        return self.params[f"{self.name}.b"] if self.bias else None

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]


def dense_forward(layer: DenseLayer, x: int, tape: Tape) -> int:
    width = tape.value(x).shape
    if width != (layer.in_dim,):
        raise DimensionError(f"{layer.name}: input shape {width} does not match in-dimension {layer.in_dim}")
    out = tape.matvec(tape.param(f"{layer.name}.W", layer.W), x)
    if layer.bias:
        out = tape.add(out, tape.param(f"{layer.name}.b", layer.b))
    return activate(tape, layer.activation, out)


def softmax(z: int, tape: Tape) -> int:
    """Max-shifted softmax over a non-empty vector node."""
    return tape.softmax(z)


@dataclass
class AttentionSpec:
    """
    How a query is scored against a key.

    feedforward: Z_a tanh(W_a [q; k]) with Z_a (1 x a) and W_a (a x (q + k)).
    cosine: q.k / (|q| |k|), parameter free.
    """

    score_kind: str
    params: ModelParams = None
    name: str = ''

    @classmethod
    def create(
        cls,
        params: ModelParams,
        name: str,
        query_dim: int,
        key_dim: int,
        init: ParamInitializer,
        score_kind: str = 'feedforward',
        hidden: int = 16,
    ) -> 'AttentionSpec':
        if score_kind not in SCORE_KINDS:
            raise ContractError(f"unknown score kind {score_kind!r} (expected one of {SCORE_KINDS})")
        if score_kind == 'feedforward':
            params.add(f"{name}.W_a", init.uniform(hidden, query_dim + key_dim))
            params.add(f"{name}.Z_a", init.uniform(1, hidden))
        return cls(score_kind=score_kind, params=params, name=name)

    @property
    def W_a(self) -> np.ndarray:
        return self.params[f"{self.name}.W_a"]

    @property
    def Z_a(self) -> np.ndarray:
        return self.params[f"{self.name}.Z_a"]


def score(spec: AttentionSpec, q: int, k: int, tape: Tape) -> int:
    """Scalar alignment score of query node ``q`` against key node ``k``."""
    if spec.score_kind == 'cosine':
        return tape.cosine(q, k)
    if spec.score_kind != 'feedforward':
        raise ContractError(f"unknown score kind {spec.score_kind!r}")
    W_a = tape.param(f"{spec.name}.W_a", spec.W_a)
    Z_a = tape.param(f"{spec.name}.Z_a", spec.Z_a)
    joined = tape.concat(q, k)
    if tape.value(joined).shape[0] != spec.W_a.shape[1]:
        raise DimensionError(
            f"{spec.name}: [q; k] has length {tape.value(joined).shape[0]}, W_a expects {spec.W_a.shape[1]}"
        )
    return tape.matvec(Z_a, tape.tanh(tape.matvec(W_a, joined)))


def attention(
    spec: AttentionSpec,
    q: int,
    keys: Sequence[int],
    values: Sequence[int],
    tape: Tape,
) -> Tuple[int, int]:
    """
    Softmax-weighted sum of ``values`` by the scores of ``q`` against ``keys``.

    Returns:
        (context node, weights node)
    """
    if not keys:
        raise ContractError("attention needs at least one key-value pair")
    if len(keys) != len(values):
        raise ContractError(f"got {len(keys)} keys but {len(values)} values")
    key_shape = tape.value(keys[0]).shape
    value_shape = tape.value(values[0]).shape
    for k, v in zip(keys, values):
        if tape.value(k).shape != key_shape or tape.value(v).shape != value_shape:
            raise DimensionError(
                f"attention keys/values must be uniform: {key_shape}/{value_shape} vs "
                f"{tape.value(k).shape}/{tape.value(v).shape}"
            )
    scores = [score(spec, q, k, tape) for k in keys]
    weights = tape.softmax(tape.concat(*scores))
    return tape.weighted_sum(weights, values), weights


def self_attention(spec: AttentionSpec, sequence: Sequence[int], tape: Tape) -> List[int]:
    """Attention where every element queries the full sequence as keys and values."""
    if not sequence:
        raise ContractError("self-attention needs a non-empty sequence")
    return [attention(spec, x, sequence, sequence, tape)[0] for x in sequence]


def diff_branch(a: int, y: int, z: int, tape: Tape) -> int:
    """a * y + (1 - a) * z; both branches are always evaluated."""
    return tape.branch_mix(a, y, z)
