"""
Dual-stage attention forecaster.

Stage one (encoder) re-weights the n input features at every step by
scoring the previous hidden state against each whole feature series; stage
two (decoder) attends over the encoder's hidden states in time.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from services.engine.errors import ContractError, DimensionError
from services.engine.tape import Tape
from services.engine.tensor import as_tensor, stack_rows

from .params import ModelParams, ParamInitializer
from .primitives import AttentionSpec, DenseLayer, score
from .sequence import Cell, LstmCell, NodeOrTensor, State, as_node, attend_and_step, cell_step, make_cell

logger = logging.getLogger(__name__)


@dataclass
class DualStageModel:
    params: ModelParams
    encoder: Cell
    decoder: Cell
    input_spec: AttentionSpec
    temporal_spec: AttentionSpec
    head: DenseLayer
    n: int
    T: int
    hidden: int
    output_dim: int = 1

    @classmethod
    def create(
        cls,
        params: ModelParams,
        init: ParamInitializer,
        n: int,
        T: int,
        hidden: int,
        output_dim: int = 1,
        cell: str = 'rnn',
        input_score: str = 'feedforward',
        temporal_score: str = 'feedforward',
        score_hidden: int = 16,
    ) -> 'DualStageModel':
        if n < 1 or T < 1:
            raise ContractError(f"dual-stage model needs n >= 1 and T >= 1, got n={n}, T={T}")
        if input_score == 'cosine' and hidden != T:
            raise ContractError(f"cosine input attention compares h (size {hidden}) with a length-{T} series")
        # Feature series are scored as length-T vectors: W_a is a x (m + T).
        input_spec = AttentionSpec.create(params, 'input_attention', hidden, T, init, input_score, score_hidden)
        temporal_spec = AttentionSpec.create(params, 'temporal_attention', hidden, hidden, init, temporal_score, score_hidden)
        encoder = make_cell(cell, params, 'ds_encoder', n, hidden, init)
        decoder = make_cell(cell, params, 'ds_decoder', output_dim + hidden, hidden, init)
        head = DenseLayer.create(params, 'ds_head', hidden, output_dim, init, activation='identity')
        return cls(params, encoder, decoder, input_spec, temporal_spec, head, n, T, hidden, output_dim)


def _check_window(model: DualStageModel, X: np.ndarray) -> None:
    if X.shape != (model.T, model.n):
        raise DimensionError(f"window shape {X.shape} does not match (T, n) = ({model.T}, {model.n})")
    if not np.all(np.isfinite(X)):
        raise ContractError("input window contains non-finite values")


def feature_series(tape: Tape, X: np.ndarray) -> List[int]:
    """Constant nodes x^k = (x_1^k, ..., x_T^k), one per feature."""
    return [tape.constant(X[:, k]) for k in range(X.shape[1])]


def input_attention(
    model: DualStageModel,
    h_prev: int,
    X: np.ndarray,
    t: int,
    tape: Tape,
    features: Optional[Sequence[int]] = None,
) -> Tuple[int, int]:
    """
    u_t = alpha_t * x_t with alpha_t = softmax over the n features of
    score(h_{t-1}, x^k). ``t`` counts from 1.

    Returns:
        (u_t node, alpha_t node)
    """
    X = as_tensor(X)
    if not 1 <= t <= X.shape[0]:
        raise ContractError(f"time index {t} outside 1..{X.shape[0]}")
    if features is None:
        features = feature_series(tape, X)
    scores = [score(model.input_spec, h_prev, x_k, tape) for x_k in features]
    alpha = tape.softmax(tape.concat(*scores))
    u = tape.mul(alpha, tape.constant(X[t - 1]))
    return u, alpha


def ds_encode(model: DualStageModel, X: np.ndarray, tape: Tape) -> Tuple[List[int], np.ndarray, State]:
    """
    Encoder pass h_t = f_1(h_{t-1}, u_t).

    Returns:
        (hidden-state nodes, alpha log of shape (T, n), final encoder state)
    """
    X = as_tensor(X)
    _check_window(model, X)
    features = feature_series(tape, X)
    state = model.encoder.initial_state(tape)
    H, alphas = [], []
    for t in range(1, model.T + 1):
        u, alpha = input_attention(model, state[0], X, t, tape, features)
        state = cell_step(model.encoder, u, state, tape)
        H.append(state[0])
        alphas.append(tape.value(alpha))
    return H, stack_rows(alphas), state


def ds_decode(
    model: DualStageModel,
    H: Sequence[int],
    steps: int,
    y_0: Optional[NodeOrTensor],
    tape: Tape,
    s_0: Optional[State] = None,
    targets: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[List[int], np.ndarray]:
    """
    Temporal-attention decoder; beta_t = softmax(score(s_{t-1}, h_i)),
    c_t = sum_i beta_ti h_i.

    Returns:
        (prediction nodes, beta log of shape (steps, T))
    """
    if not H:
        raise ContractError("temporal attention needs at least one encoder state")
    if steps < 1:
        raise ContractError(f"decoder length must be at least 1, got {steps}")
    if s_0 is None:
        s_0 = (H[-1], tape.constant(np.zeros(model.hidden))) if isinstance(model.decoder, LstmCell) else (H[-1],)
    state = tuple(as_node(tape, s) for s in s_0)
    y_prev = as_node(tape, y_0) if y_0 is not None else tape.constant(np.zeros(model.output_dim))
    predictions, betas = [], []
    for t in range(steps):
        y, state, beta = attend_and_step(model.temporal_spec, model.decoder, model.head, state, y_prev, H, tape)
        predictions.append(y)
        betas.append(tape.value(beta))
        y_prev = tape.constant(targets[t]) if targets is not None else y
    return predictions, stack_rows(betas)


def ds_forward(
    model: DualStageModel,
    X: np.ndarray,
    tape: Tape,
    steps: int = 1,
    y_0: Optional[NodeOrTensor] = None,
    targets: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[List[int], np.ndarray, np.ndarray]:
    """Encode then decode; the decoder starts from the encoder's final state."""
    H, alphas, final_state = ds_encode(model, X, tape)
    predictions, betas = ds_decode(model, H, steps, y_0, tape, s_0=final_state, targets=targets)
    return predictions, alphas, betas
