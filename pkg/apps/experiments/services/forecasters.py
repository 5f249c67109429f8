"""
Forecasting models behind one interface so the trainer can treat them alike.

Each forecaster maps a normalised input window X of shape (T, n) to
``output_steps`` prediction nodes of size o, and reports whatever attention
weights it produces along the way.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from services.engine.errors import ContractError
from services.engine.tape import Tape
from services.engine.tensor import stack_rows
from services.networks.dual_stage import DualStageModel, ds_forward
from services.networks.feedforward import WindowRegressor, regressor_forward
from services.networks.memory import MemNet, load_memory, memnet_forward
from services.networks.params import ModelParams, ParamInitializer
from services.networks.primitives import DenseLayer, dense_forward
from services.networks.sequence import (
    EncoderDecoder, LstmCell, RnnCell, alignment_matrix, cell_step, rnn_step, seq2seq_forward,
)
from services.training.losses import sequence_mse

logger = logging.getLogger(__name__)


@dataclass
class ModelDims:
    n_inputs: int
    n_outputs: int
    T: int
    output_steps: int = 1
    # positions of the target columns inside the input window, -1 when absent
    target_positions: Sequence[int] = ()


def as_steps(target: np.ndarray) -> List[np.ndarray]:
    target = np.asarray(target, dtype=np.float64)
    return [target] if target.ndim == 1 else list(target)


class Forecaster:
    kind = ''
    teacher_forcing = False

    def __init__(self, params: ModelParams, dims: ModelDims):
        self.params = params
        self.dims = dims

    def outputs(self, X: np.ndarray, tape: Tape, targets: Optional[List[np.ndarray]] = None) -> List[int]:
        raise NotImplementedError

    def loss(self, tape: Tape, sample) -> int:
        X, target = sample
        targets = as_steps(target)
        outputs = self.outputs(X, tape, targets if self.teacher_forcing else None)
        return sequence_mse(outputs, targets, tape)

    def predict(self, X: np.ndarray) -> np.ndarray:
        tape = Tape()
        values = [tape.value(node) for node in self.outputs(X, tape)]
        return values[0] if self.dims.output_steps == 1 else stack_rows(values)

    def attention(self, X: np.ndarray) -> Dict[str, np.ndarray]:
        return {}


class RecurrentForecaster(Forecaster):
    """Plain RNN (y_T = f_o(W_ho h_T)) or LSTM with a linear head on h_T."""

    def __init__(self, params, dims, init: ParamInitializer, kind: str, hidden: int):
        super().__init__(params, dims)
        self.kind = kind
        if kind == 'rnn':
            self.cell = RnnCell.create(params, 'rnn', dims.n_inputs, hidden, init, out_dim=dims.n_outputs)
            self.head = None
        else:
            self.cell = LstmCell.create(params, 'lstm', dims.n_inputs, hidden, init)
            self.head = DenseLayer.create(params, 'lstm_head', hidden, dims.n_outputs, init)

    def outputs(self, X, tape, targets=None):
        if isinstance(self.cell, RnnCell):
            h, y = tape.constant(np.zeros(self.cell.hidden)), None
            for x in X:
                h, y = rnn_step(self.cell, x, h, tape)
            return [y]
        state = self.cell.initial_state(tape)
        for x in X:
            state = cell_step(self.cell, x, state, tape)
        return [dense_forward(self.head, state[0], tape)]


class Seq2SeqForecaster(Forecaster):
    teacher_forcing = True

    def __init__(self, params, dims, init, kind: str, hidden: int, cell: str, bidirectional: bool,
                 score_kind: str, score_hidden: int, head: str):
        super().__init__(params, dims)
        self.kind = kind
        self.model = EncoderDecoder.create(
            params, init, dims.n_inputs, dims.n_outputs, hidden, cell=cell, bidirectional=bidirectional,
            score_kind=score_kind if kind == 'encdec-attn' else None, score_hidden=score_hidden, head=head,
        )

    def outputs(self, X, tape, targets=None):
        outputs, _ = seq2seq_forward(self.model, list(X), self.dims.output_steps, tape, targets=targets)
        return outputs

    def attention(self, X):
        if self.model.attention is None:
            return {}
        return {'alignment': alignment_matrix(self.model, list(X), self.dims.output_steps)}


class DualStageForecaster(Forecaster):
    teacher_forcing = True
    kind = 'dual-stage'

    def __init__(self, params, dims, init, hidden: int, cell: str, input_score: str, temporal_score: str,
                 score_hidden: int):
        super().__init__(params, dims)
        self.model = DualStageModel.create(
            params, init, dims.n_inputs, dims.T, hidden, output_dim=dims.n_outputs, cell=cell,
            input_score=input_score, temporal_score=temporal_score, score_hidden=score_hidden,
        )

    def outputs(self, X, tape, targets=None):
        predictions, _, _ = ds_forward(self.model, X, tape, steps=self.dims.output_steps, targets=targets)
        return predictions

    def attention(self, X):
        _, alphas, betas = ds_forward(self.model, X, Tape(), steps=self.dims.output_steps)
        return {'temporal': betas, 'input': alphas}


class MemoryForecaster(Forecaster):
    """
    Memory slots are delay vectors taken from the window: slot j holds rows
    j .. j+k (k = memory lag), so it carries a short pattern plus the value
    that followed it. The query is the last k rows with the following row
    zeroed, so addressing matches on the pattern and reading returns what
    came next.
    """

    kind = 'memnet'

    def __init__(self, params, dims, init, d: int, lag: int, capacity: int):
        super().__init__(params, dims)
        if lag >= dims.T:
            raise ContractError(f"memory lag {lag} must be shorter than the window {dims.T}")
        self.lag = lag
        self.model = MemNet.create(params, init, n=(lag + 1) * dims.n_inputs, d=d, o=dims.n_outputs,
                                   capacity=capacity)

    def _prepare(self, X: np.ndarray):
        X = np.asarray(X, dtype=np.float64)
        k = self.lag
        slots = [X[j:j + k + 1].reshape(-1) for j in range(X.shape[0] - k)]
        query = np.vstack([X[-k:], np.zeros((1, X.shape[1]))]).reshape(-1)
        positions = self.dims.target_positions
        y_prev = np.array([X[-1, p] if p >= 0 else 0.0 for p in positions]) if positions else np.zeros(self.dims.n_outputs)
        return slots, query, y_prev

    def _forward(self, X, tape):
        slots, query, y_prev = self._prepare(X)
        load_memory(self.model, slots)
        return memnet_forward(self.model, query, y_prev, tape)

    def outputs(self, X, tape, targets=None):
        y, _ = self._forward(X, tape)
        return [y]

    def attention(self, X):
        tape = Tape()
        _, p = self._forward(X, tape)
        return {'memory': tape.value(p)[None, :]}


class WindowForecaster(Forecaster):
    def __init__(self, params, dims, init, kind: str, hidden_sizes: Sequence[int], activation: str):
        super().__init__(params, dims)
        self.kind = kind
        sizes = () if kind == 'linear' else tuple(hidden_sizes)
        self.model = WindowRegressor.create(params, init, dims.T, dims.n_inputs, dims.n_outputs, sizes, activation)

    def outputs(self, X, tape, targets=None):
        return [regressor_forward(self.model, X, tape)]


def build_forecaster(config, dims: ModelDims, init: ParamInitializer, params: Optional[ModelParams] = None) -> Forecaster:
    """Instantiate the forecaster for ``config.kind`` with freshly initialised parameters."""
    params = params if params is not None else ModelParams()
    kind = config.kind
    if kind in ('rnn', 'lstm'):
        return RecurrentForecaster(params, dims, init, kind, config.hidden)
    if kind in ('encdec', 'encdec-attn'):
        return Seq2SeqForecaster(params, dims, init, kind, config.hidden, config.cell, config.bidirectional,
                                 config.score_kind, config.score_hidden, config.head)
    if kind == 'dual-stage':
        return DualStageForecaster(params, dims, init, config.hidden, config.cell, config.input_score,
                                   config.score_kind, config.score_hidden)
    if kind == 'memnet':
        return MemoryForecaster(params, dims, init, config.memory_dim, config.memory_lag, config.capacity)
    if kind in ('linear', 'narx'):
        return WindowForecaster(params, dims, init, kind, config.hidden_sizes, config.activation)
    raise ContractError(f"{kind!r} is not a forecasting model")
