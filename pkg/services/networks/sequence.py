"""
Recurrent cells, encoders and (attention) decoders.

States are tuples of tape nodes: ``(h,)`` for plain RNN cells and ``(h, c)``
for LSTM cells; ``state[0]`` is always the hidden vector.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from services.engine.errors import ContractError, DimensionError
from services.engine.tape import Tape
from services.engine.tensor import as_tensor, stack_rows

from .params import ModelParams, ParamInitializer
from .primitives import AttentionSpec, DenseLayer, activate, attention, dense_forward

logger = logging.getLogger(__name__)

State = Tuple[int, ...]
NodeOrTensor = Union[int, np.ndarray]


def as_node(tape: Tape, x: NodeOrTensor) -> int:
    """Tape nodes pass through; raw tensors are recorded as constants."""
    if isinstance(x, (int, np.integer)):
        return int(x)
    return tape.constant(x)


@dataclass
class RnnCell:
    """
    h_t = f_h(W_ih x_t + W_hh h_{t-1}),  y_t = f_o(W_ho h_t).

    ``out_dim == 0`` builds a cell without the output map (encoder use).
    """

    params: ModelParams
    name: str
    in_dim: int
    hidden: int
    out_dim: int = 0
    f_h: str = 'tanh'
    f_o: str = 'identity'

    @classmethod
    def create(cls, params, name, in_dim, hidden, init: ParamInitializer, out_dim=0, f_h='tanh', f_o='identity'):
        params.add(f"{name}.W_ih", init.uniform(hidden, in_dim))
        params.add(f"{name}.W_hh", init.uniform(hidden, hidden))
        if out_dim:
            params.add(f"{name}.W_ho", init.uniform(out_dim, hidden))
        return cls(params, name, in_dim, hidden, out_dim, f_h, f_o)

    def initial_state(self, tape: Tape) -> State:
        return (tape.constant(np.zeros(self.hidden)),)


@dataclass
class LstmCell:
    """
    Gated cell over z = [x; h]:
    i, f, o = sigmoid(W z + b), g = tanh(W_g z + b_g),
    c' = f * c + i * g, h' = o * tanh(c').
    """

    params: ModelParams
    name: str
    in_dim: int
    hidden: int

    GATES = ('i', 'f', 'o', 'g')

    @classmethod
    def create(cls, params, name, in_dim, hidden, init: ParamInitializer, forget_bias=1.0):
        for gate in cls.GATES:
            params.add(f"{name}.W_{gate}", init.uniform(hidden, in_dim + hidden))
            bias = forget_bias if gate == 'f' else 0.0
            params.add(f"{name}.b_{gate}", init.full(bias, hidden))
        return cls(params, name, in_dim, hidden)

    def initial_state(self, tape: Tape) -> State:
        return (tape.constant(np.zeros(self.hidden)), tape.constant(np.zeros(self.hidden)))


Cell = Union[RnnCell, LstmCell]


def _check_input(tape: Tape, cell: Cell, x: int, h: int) -> None:
    if tape.value(x).shape != (cell.in_dim,):
        raise DimensionError(f"{cell.name}: input shape {tape.value(x).shape}, expected ({cell.in_dim},)")
    if tape.value(h).shape != (cell.hidden,):
        raise DimensionError(f"{cell.name}: state shape {tape.value(h).shape}, expected ({cell.hidden},)")


def rnn_step(cell: RnnCell, x_t: NodeOrTensor, h_prev: NodeOrTensor, tape: Tape) -> Tuple[int, Optional[int]]:
    """One step of the plain RNN; returns (h_t, y_t), y_t None without an output map."""
    x_t, h_prev = as_node(tape, x_t), as_node(tape, h_prev)
    _check_input(tape, cell, x_t, h_prev)
    p = cell.params
    pre = tape.add(
        tape.matvec(tape.param(f"{cell.name}.W_ih", p[f"{cell.name}.W_ih"]), x_t),
        tape.matvec(tape.param(f"{cell.name}.W_hh", p[f"{cell.name}.W_hh"]), h_prev),
    )
    h = activate(tape, cell.f_h, pre)
    if not cell.out_dim:
        return h, None
    y = activate(tape, cell.f_o, tape.matvec(tape.param(f"{cell.name}.W_ho", p[f"{cell.name}.W_ho"]), h))
    return h, y


def lstm_step(cell: LstmCell, x_t: NodeOrTensor, state: State, tape: Tape) -> State:
    x_t = as_node(tape, x_t)
    h_prev, c_prev = (as_node(tape, s) for s in state)
    _check_input(tape, cell, x_t, h_prev)
    z = tape.concat(x_t, h_prev)

    def gate(name: str) -> int:
        W = tape.param(f"{cell.name}.W_{name}", cell.params[f"{cell.name}.W_{name}"])
        b = tape.param(f"{cell.name}.b_{name}", cell.params[f"{cell.name}.b_{name}"])
        return tape.add(tape.matvec(W, z), b)

    i = tape.sigmoid(gate('i'))
    f = tape.sigmoid(gate('f'))
    o = tape.sigmoid(gate('o'))
    g = tape.tanh(gate('g'))
    c = tape.add(tape.mul(f, c_prev), tape.mul(i, g))
    h = tape.mul(o, tape.tanh(c))
    return h, c


def cell_step(cell: Cell, x_t: NodeOrTensor, state: State, tape: Tape) -> State:
    if isinstance(cell, LstmCell):
        return lstm_step(cell, x_t, state, tape)
    h, _ = rnn_step(cell, x_t, state[0], tape)
    return (h,)


def make_cell(kind: str, params, name, in_dim, hidden, init) -> Cell:
    if kind == 'rnn':
        return RnnCell.create(params, name, in_dim, hidden, init)
    if kind == 'lstm':
        return LstmCell.create(params, name, in_dim, hidden, init)
    raise ContractError(f"unknown cell kind {kind!r} (expected 'rnn' or 'lstm')")


@dataclass
class EncoderDecoder:
    """
    Sequence-to-sequence model: encoder states h_1..h_T, decoder states
    s_1..s_T' starting from s_0 = h_T (or a learned bridge of the two final
    states when the encoder is bidirectional), output head on s_t.
    """

    params: ModelParams
    encoder: Cell
    decoder: Cell
    head: DenseLayer
    input_dim: int
    output_dim: int
    hidden: int
    attention: Optional[AttentionSpec] = None
    encoder_backward: Optional[Cell] = None
    bridge: Optional[DenseLayer] = None
    bidirectional: bool = False

    @classmethod
    def create(
        cls,
        params: ModelParams,
        init: ParamInitializer,
        input_dim: int,
        output_dim: int,
        hidden: int,
        cell: str = 'rnn',
        bidirectional: bool = False,
        share_weights: bool = False,
        score_kind: Optional[str] = None,
        score_hidden: int = 16,
        head: str = 'linear',
    ) -> 'EncoderDecoder':
        encoder = make_cell(cell, params, 'encoder', input_dim, hidden, init)
        encoder_backward, bridge = None, None
        state_dim = hidden
        if bidirectional:
            encoder_backward = encoder if share_weights else make_cell(
                cell, params, 'encoder_backward', input_dim, hidden, init
            )
            bridge = DenseLayer.create(params, 'bridge', 2 * hidden, hidden, init, activation='identity')
            state_dim = 2 * hidden
        spec = None
        decoder_in = output_dim
        if score_kind is not None:
            if score_kind == 'cosine' and state_dim != hidden:
                raise ContractError("cosine scores need equal query and key sizes; use feedforward with a bidirectional encoder")
            spec = AttentionSpec.create(params, 'attention', hidden, state_dim, init, score_kind, score_hidden)
            decoder_in = output_dim + state_dim
        decoder = make_cell(cell, params, 'decoder', decoder_in, hidden, init)
        activation = {'linear': 'identity', 'softmax': 'softmax'}.get(head)
        if activation is None:
            raise ContractError(f"unknown decoder head {head!r} (expected 'linear' or 'softmax')")
        head_layer = DenseLayer.create(params, 'head', hidden, output_dim, init, activation=activation)
        return cls(
            params=params, encoder=encoder, decoder=decoder, head=head_layer,
            input_dim=input_dim, output_dim=output_dim, hidden=hidden, attention=spec,
            encoder_backward=encoder_backward, bridge=bridge, bidirectional=bidirectional,
        )


def _run_cell(cell: Cell, X: Sequence[NodeOrTensor], tape: Tape) -> List[State]:
    if not X:
        raise ContractError("cannot encode an empty sequence")
    state = cell.initial_state(tape)
    states = []
    for x in X:
        state = cell_step(cell, x, state, tape)
        states.append(state)
    return states


def encode(model: EncoderDecoder, X: Sequence[NodeOrTensor], tape: Tape) -> List[int]:
    """Hidden states h_1..h_T of the forward encoder, h_0 = 0."""
    return [state[0] for state in _run_cell(model.encoder, X, tape)]


def bidirectional_encode(model: EncoderDecoder, X: Sequence[NodeOrTensor], tape: Tape) -> List[int]:
    """Per-position [forward h_i; backward h_i], the backward pass reading X right to left."""
    forward_states = _run_cell(model.encoder, X, tape)
    backward_cell = model.encoder_backward or model.encoder
    backward_states = _run_cell(backward_cell, list(reversed(X)), tape)[::-1]
    return [tape.concat(f[0], b[0]) for f, b in zip(forward_states, backward_states)]


def encode_sequence(model: EncoderDecoder, X: Sequence[NodeOrTensor], tape: Tape) -> Tuple[List[int], State]:
    """
    Encoder states used as attention keys plus the decoder's initial state.
    """
    if not model.bidirectional:
        states = _run_cell(model.encoder, X, tape)
        return [s[0] for s in states], states[-1]
    forward_states = _run_cell(model.encoder, X, tape)
    backward_cell = model.encoder_backward or model.encoder
    backward_states = _run_cell(backward_cell, list(reversed(X)), tape)
    H = [tape.concat(f[0], b[0]) for f, b in zip(forward_states, backward_states[::-1])]
    # backward_states[-1] is the backward pass's state at position 1.
    joined = tape.concat(forward_states[-1][0], backward_states[-1][0])
    s0_h = dense_forward(model.bridge, joined, tape)
    if isinstance(model.decoder, LstmCell):
        return H, (s0_h, tape.constant(np.zeros(model.hidden)))
    return H, (s0_h,)


def _start_token(tape: Tape, model: EncoderDecoder, y_0: Optional[NodeOrTensor]) -> int:
    if y_0 is None:
        return tape.constant(np.zeros(model.output_dim))
    return as_node(tape, y_0)


def decode_plain(
    model: EncoderDecoder,
    s_0: State,
    steps: int,
    y_0: Optional[NodeOrTensor],
    tape: Tape,
    targets: Optional[Sequence[np.ndarray]] = None,
) -> List[int]:
    """
    Autoregressive rollout y_t = head(f_2(s_{t-1}, y_{t-1})).

    With ``targets`` the ground-truth previous output is fed back (teacher
    forcing); otherwise the model's own prediction is.
    """
    if steps < 1:
        raise ContractError(f"decoder length must be at least 1, got {steps}")
    state = tuple(as_node(tape, s) for s in s_0)
    y_prev = _start_token(tape, model, y_0)
    outputs = []
    for t in range(steps):
        state = cell_step(model.decoder, y_prev, state, tape)
        y = dense_forward(model.head, state[0], tape)
        outputs.append(y)
        y_prev = tape.constant(targets[t]) if targets is not None else y
    return outputs


def attend_and_step(
    spec: AttentionSpec,
    cell: Cell,
    head: DenseLayer,
    s_prev: State,
    y_prev: NodeOrTensor,
    H: Sequence[int],
    tape: Tape,
) -> Tuple[int, State, int]:
    """Shared decoder step: attend over H with query s_{t-1}, step the cell on [y_{t-1}; c_t], apply the head."""
    if not H:
        raise ContractError("attention decoder needs at least one encoder state")
    context, weights = attention(spec, s_prev[0], H, H, tape)
    state = cell_step(cell, tape.concat(as_node(tape, y_prev), context), s_prev, tape)
    y = dense_forward(head, state[0], tape)
    return y, state, weights


def attention_decoder_step(
    model: EncoderDecoder,
    s_prev: State,
    y_prev: NodeOrTensor,
    H: Sequence[int],
    tape: Tape,
) -> Tuple[int, State, int]:
    """
    c_t = sum_i alpha_ti h_i with alpha_t = softmax(score(s_{t-1}, h_i)); the
    decoder cell reads [y_{t-1}; c_t].

    Returns:
        (y_t, s_t, alpha_t) as tape nodes
    """
    if model.attention is None:
        raise ContractError("model was built without attention")
    return attend_and_step(model.attention, model.decoder, model.head, s_prev, y_prev, H, tape)


def decode_attention(
    model: EncoderDecoder,
    s_0: State,
    steps: int,
    y_0: Optional[NodeOrTensor],
    H: Sequence[int],
    tape: Tape,
    targets: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[List[int], List[int]]:
    if steps < 1:
        raise ContractError(f"decoder length must be at least 1, got {steps}")
    state = tuple(as_node(tape, s) for s in s_0)
    y_prev = _start_token(tape, model, y_0)
    outputs, weights = [], []
    for t in range(steps):
        y, state, alpha = attention_decoder_step(model, state, y_prev, H, tape)
        outputs.append(y)
        weights.append(alpha)
        y_prev = tape.constant(targets[t]) if targets is not None else y
    return outputs, weights


def seq2seq_forward(
    model: EncoderDecoder,
    X: Sequence[NodeOrTensor],
    steps: int,
    tape: Tape,
    y_0: Optional[NodeOrTensor] = None,
    targets: Optional[Sequence[np.ndarray]] = None,
) -> Tuple[List[int], List[int]]:
    """Full encode + decode; returns output nodes and (possibly empty) attention weight nodes."""
    H, s_0 = encode_sequence(model, X, tape)
    if model.attention is None:
        return decode_plain(model, s_0, steps, y_0, tape, targets), []
    return decode_attention(model, s_0, steps, y_0, H, tape, targets)


def alignment_matrix(
    model: EncoderDecoder,
    X: Sequence[NodeOrTensor],
    steps: int,
    tape: Optional[Tape] = None,
    y_0: Optional[NodeOrTensor] = None,
) -> np.ndarray:
    """Free-running rollout; row t holds the attention weights alpha_t over the T inputs."""
    tape = tape if tape is not None else Tape()
    _, weights = seq2seq_forward(model, X, steps, tape, y_0=y_0)
    if not weights:
        raise ContractError("alignment matrix needs an attention decoder")
    return stack_rows(tape.value(w) for w in weights)


def input_sensitivity(cell: RnnCell, X: Sequence[np.ndarray]) -> float:
    """
    Norm of d(sum h_T)/d x_1 for a plain RNN rollout from h_0 = 0.

    Shrinks with T when W_hh is contractive, which is the vanishing-gradient
    effect attention decoders sidestep.
    """
    tape = Tape()
    inputs = [tape.input(as_tensor(x)) for x in X]
    h = tape.constant(np.zeros(cell.hidden))
    for x in inputs:
        h, _ = rnn_step(cell, x, h, tape)
    tape.backward(tape.sum(h))
    return float(np.linalg.norm(tape.adjoint(inputs[0])))
