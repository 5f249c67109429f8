"""
Differentiable plasticity.

Each connection carries a fixed weight w_ij and a plastic part
alpha_ij * H_ij(t), where the Hebbian trace follows
H(t+1) = eta * outer(y_out, y_in) + (1 - eta) * H(t).

w and alpha are learned by gradient descent over whole episodes; during an
episode the trace is recorded on the tape so gradients flow through it. At
deployment w and alpha stay frozen and H is ordinary mutable state.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from services.engine.errors import ContractError, DimensionError, TapeStateError, TrainingError
from services.engine.tape import Tape
from services.engine.tensor import as_tensor, outer, sigmoid
from services.training.losses import loss_mse
from services.training.optim import OptimConfig, Optimizer

from .params import ModelParams, ParamInitializer
from .sequence import NodeOrTensor, as_node

logger = logging.getLogger(__name__)


@dataclass
class PlasticLayer:
    params: ModelParams
    in_dim: int
    out_dim: int
    eta: float = 0.1
    learn_eta: bool = False
    name: str = 'plastic'
    H: np.ndarray = None

    @classmethod
    def create(
        cls,
        params: ModelParams,
        init: ParamInitializer,
        in_dim: int,
        out_dim: int,
        eta: float = 0.1,
        learn_eta: bool = False,
        alpha_init: float = 0.01,
        name: str = 'plastic',
    ) -> 'PlasticLayer':
        if not 0.0 <= eta <= 1.0:
            raise ContractError(f"eta must lie in [0, 1], got {eta}")
        params.add(f"{name}.w", init.uniform(out_dim, in_dim))
        params.add(f"{name}.alpha", init.full(alpha_init, out_dim, in_dim))
        if learn_eta:
            # eta = sigmoid(logit) stays inside (0, 1).
            logit = np.log(eta / (1.0 - eta)) if 0.0 < eta < 1.0 else 0.0
            params.add(f"{name}.eta_logit", as_tensor([logit]))
        layer = cls(params=params, in_dim=in_dim, out_dim=out_dim, eta=eta, learn_eta=learn_eta, name=name)
        layer.reset_trace()
        return layer

    @property
    def current_eta(self) -> float:
        if self.learn_eta:
            return float(sigmoid(self.params[f"{self.name}.eta_logit"])[0])
        return self.eta

    def reset_trace(self) -> None:
        self.H = np.zeros((self.out_dim, self.in_dim))

    def weight(self, tape: Tape, key: str) -> int:
        return tape.param(f"{self.name}.{key}", self.params[f"{self.name}.{key}"])


def plastic_forward(
    layer: PlasticLayer,
    y_in: NodeOrTensor,
    tape: Tape,
    trace: Optional[int] = None,
    drive: Optional[NodeOrTensor] = None,
) -> int:
    """
    y_out = tanh((w + alpha * H) y_in [+ drive]).

    ``trace`` is the tape node holding H during meta-training; without it the
    layer's current trace enters as a constant. ``drive`` is an optional
    external input added before the nonlinearity.
    """
    y_in = as_node(tape, y_in)
    if tape.value(y_in).shape != (layer.in_dim,):
        raise DimensionError(f"{layer.name}: input shape {tape.value(y_in).shape}, expected ({layer.in_dim},)")
    if trace is None:
        trace = tape.constant(layer.H)
    effective = tape.add(layer.weight(tape, 'w'), tape.mul(layer.weight(tape, 'alpha'), trace))
    pre = tape.matvec(effective, y_in)
    if drive is not None:
        pre = tape.add(pre, as_node(tape, drive))
    return tape.tanh(pre)


def hebbian_trace(layer: PlasticLayer, trace: int, y_in: int, y_out: int, tape: Tape) -> int:
    """The trace update recorded on the tape (meta-training form)."""
    correlation = tape.outer(y_out, y_in)
    if layer.learn_eta:
        eta = tape.sigmoid(layer.weight(tape, 'eta_logit'))
        return tape.add(tape.scalar_mul(eta, correlation), tape.sub(trace, tape.scalar_mul(eta, trace)))
    return tape.add(tape.scale(correlation, layer.eta), tape.scale(trace, 1.0 - layer.eta))


def hebbian_update(layer: PlasticLayer, y_in: np.ndarray, y_out: np.ndarray) -> None:
    """Deployment-time trace update from the activations of the preceding forward pass."""
    y_in, y_out = np.asarray(y_in), np.asarray(y_out)
    if y_in.shape != (layer.in_dim,) or y_out.shape != (layer.out_dim,):
        raise TapeStateError(
            f"{layer.name}: activations {y_in.shape} -> {y_out.shape} do not match the layer "
            f"({layer.in_dim},) -> ({layer.out_dim},)"
        )
    eta = layer.current_eta
    layer.H = eta * outer(y_out, y_in) + (1.0 - eta) * layer.H


# --- pattern completion task ---------------------------------------------------

@dataclass
class Episode:
    patterns: np.ndarray
    cue: np.ndarray
    target: np.ndarray
    drives: List[np.ndarray] = field(default_factory=list)


@dataclass
class PatternCompletionTask:
    """
    Store k random +-1 patterns by repeated presentation, then recall one of
    them from a cue with a fraction of its bits zeroed.
    """

    n_units: int = 8
    n_patterns: int = 3
    presentations: int = 3
    steps_per_pattern: int = 2
    gap_steps: int = 1
    recall_steps: int = 2
    degrade: float = 0.5
    gain: float = 3.0

    def sample(self, rng: np.random.Generator) -> Episode:
        patterns = rng.choice([-1.0, 1.0], size=(self.n_patterns, self.n_units))
        target = patterns[rng.integers(self.n_patterns)]
        cue = target.copy()
        hidden_bits = rng.choice(self.n_units, size=int(round(self.degrade * self.n_units)), replace=False)
        cue[hidden_bits] = 0.0
        zero = np.zeros(self.n_units)
        drives = []
        for _ in range(self.presentations):
            for pattern in patterns:
                drives.extend([self.gain * pattern] * self.steps_per_pattern)
                drives.extend([zero] * self.gap_steps)
        drives.append(self.gain * cue)
        drives.extend([zero] * self.recall_steps)
        return Episode(patterns=patterns, cue=cue, target=target, drives=drives)


def episode_loss(layer: PlasticLayer, episode: Episode, tape: Tape) -> int:
    """Unroll an episode from H = 0 on ``tape``; MSE of the final activation against the target."""
    trace = tape.constant(np.zeros((layer.out_dim, layer.in_dim)))
    y = tape.constant(np.zeros(layer.in_dim))
    for drive in episode.drives:
        y_next = plastic_forward(layer, y, tape, trace=trace, drive=drive)
        trace = hebbian_trace(layer, trace, y, y_next, tape)
        y = y_next
    return loss_mse(y, episode.target, tape)


def recall(layer: PlasticLayer, episode: Episode) -> np.ndarray:
    """Run an episode with frozen w and alpha, updating H as plain state."""
    layer.reset_trace()
    y = np.zeros(layer.in_dim)
    for drive in episode.drives:
        tape = Tape()
        y_next = tape.value(plastic_forward(layer, y, tape, drive=drive))
        hebbian_update(layer, y, y_next)
        y = y_next
    return y


def bit_accuracy(layer: PlasticLayer, episodes: Sequence[Episode]) -> float:
    """Fraction of the cue's hidden bits whose recalled sign matches the stored pattern."""
    hits, total = 0, 0
    for episode in episodes:
        hidden = episode.cue == 0.0
        recalled = np.sign(recall(layer, episode))
        hits += int(np.sum(recalled[hidden] == episode.target[hidden]))
        total += int(hidden.sum())
    return hits / total if total else 0.0


def meta_train(
    layer: PlasticLayer,
    sampler: Callable[[np.random.Generator], Episode],
    epochs: int,
    config: OptimConfig,
) -> List[float]:
    """
    Episode-wise gradient descent on w and alpha (and eta when learnable).

    Each epoch averages ``config.batch_size`` episode gradients into one step.

    Returns:
        Mean episode loss per epoch.
    """
    rng = np.random.default_rng(config.seed)
    optimizer = Optimizer(layer.params, config)
    history = []
    for epoch in range(epochs):
        total, summed = 0.0, {}
        for _ in range(config.batch_size):
            tape = Tape()
            loss = episode_loss(layer, sampler(rng), tape)
            value = float(tape.value(loss)[0])
            if not np.isfinite(value):
                raise TrainingError(f"{layer.name}: episode loss is not finite at epoch {epoch}", epoch=epoch)
            total += value
            for name, grad in tape.backward(loss).items():
                summed[name] = summed.get(name, 0.0) + grad
        optimizer.step({name: g / config.batch_size for name, g in summed.items()})
        history.append(total / config.batch_size)
        if epoch % 50 == 0 or epoch == epochs - 1:
            logger.info(f"{layer.name} meta-train epoch {epoch}: loss {history[-1]:.5f}")
    layer.reset_trace()
    return history


def pin_alpha_to_zero(layer: PlasticLayer) -> None:
    """Ablation: zero alpha now and keep every later update at zero."""
    key = f"{layer.name}.alpha"
    layer.params.update(key, np.zeros((layer.out_dim, layer.in_dim)))
    layer.params.add_hook(lambda name, value: np.zeros_like(value) if name == key else value)


def without_plasticity(layer: PlasticLayer) -> PlasticLayer:
    """Copy of ``layer`` sharing nothing, with alpha zeroed."""
    clone = replace(layer, params=layer.params.copy())
    clone.params.update(f"{layer.name}.alpha", np.zeros((layer.out_dim, layer.in_dim)))
    clone.reset_trace()
    return clone
