"""
Discrete-time dynamical systems and synthetic series generators.

Autonomous maps h_t = f(h_{t-1}; theta), driven maps h_t = f(h_{t-1}, x_t; theta)
and delayed forms that read several past states and inputs.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from services.engine.errors import ContractError, DimensionError, TrajectoryError

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12

# Custom update: (past states newest first, past inputs newest first, theta) -> new state
CustomMap = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

DEFAULT_THETA: Dict[str, Tuple[float, ...]] = {
    'logistic': (3.9,),
    'henon': (1.4, 0.3),
    'narma': (0.3, 0.05, 1.5, 0.0),
    'delayed-driven': (0.5, 1.0),
}

# The usual NARMA-10 benchmark adds a 0.1 offset; the bare map keeps zero as a fixed point.
NARMA_BENCHMARK_THETA = (0.3, 0.05, 1.5, 0.1)

DEFAULT_H0: Dict[str, Tuple[float, ...]] = {
    'logistic': (0.5,),
    'henon': (0.0, 0.0),
    'narma': (0.0,),
    'delayed-driven': (0.0,),
}

_THETA_SIZE = {'logistic': 1, 'henon': 2, 'narma': 4, 'delayed-driven': 2}
_STATE_DIM = {'logistic': 1, 'henon': 2, 'narma': 1, 'delayed-driven': 1}
_INPUT_DIM = {'logistic': 0, 'henon': 0, 'narma': 1, 'delayed-driven': 1}


@dataclass
class MapSystem:
    """
    kind: logistic | henon | narma | delayed-driven | custom.

    ``delay`` is how many past steps the update reads (10 for NARMA-10, the
    input lag for delayed-driven). Custom systems supply ``update``.
    """

    kind: str
    theta: np.ndarray
    state_dim: int
    input_dim: int = 0
    delay: int = 1
    update: Optional[CustomMap] = field(default=None, repr=False)

    @classmethod
    def from_name(cls, kind: str, theta: Optional[Sequence[float]] = None, delay: Optional[int] = None) -> 'MapSystem':
        if kind not in DEFAULT_THETA:
            raise ContractError(f"unknown system {kind!r} (expected one of {sorted(DEFAULT_THETA)} or a custom map)")
        theta = np.asarray(DEFAULT_THETA[kind] if theta is None else theta, dtype=np.float64)
        if theta.shape != (_THETA_SIZE[kind],):
            raise ContractError(f"{kind} takes {_THETA_SIZE[kind]} parameters, got {theta.shape[0]}")
        if delay is None:
            delay = {'narma': 10, 'delayed-driven': 5}.get(kind, 1)
        if delay < 1:
            raise ContractError(f"delay must be at least 1, got {delay}")
        return cls(kind=kind, theta=theta, state_dim=_STATE_DIM[kind], input_dim=_INPUT_DIM[kind], delay=delay)

    @classmethod
    def custom(cls, update: CustomMap, theta: Sequence[float], state_dim: int, input_dim: int = 0, delay: int = 1):
        return cls(kind='custom', theta=np.asarray(theta, dtype=np.float64), state_dim=state_dim,
                   input_dim=input_dim, delay=delay, update=update)

    @property
    def autonomous(self) -> bool:
        return self.input_dim == 0

    def step(self, states: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        """
        Args:
            states: (delay, state_dim) past states, newest first
            inputs: (delay, input_dim) past inputs including the current one, newest first
        """
        theta = self.theta
        if self.kind == 'logistic':
            x = states[0, 0]
            return np.array([theta[0] * x * (1.0 - x)])
        if self.kind == 'henon':
            x, y = states[0]
            return np.array([1.0 - theta[0] * x * x + y, theta[1] * x])
        if self.kind == 'narma':
            alpha, beta, gamma, delta = theta
            y = states[:, 0]
            u = inputs[:, 0]
            return np.array([alpha * y[0] + beta * y[0] * y.sum() + gamma * u[-1] * u[0] + delta])
        if self.kind == 'delayed-driven':
            a, b = theta
            return np.array([np.tanh(a * states[0, 0] + b * inputs[-1, 0])])
        return np.asarray(self.update(states, inputs, theta), dtype=np.float64).reshape(self.state_dim)


def simulate(
    system: MapSystem,
    h0: Sequence[float],
    inputs: Optional[np.ndarray] = None,
    steps: int = 100,
) -> np.ndarray:
    """
    Iterate the map.

    States and inputs before t = 0 are taken as zero.

    Returns:
        (steps + 1, state_dim) trajectory starting with h0
    """
    h0 = np.asarray(h0, dtype=np.float64).reshape(-1)
    if h0.shape != (system.state_dim,):
        raise DimensionError(f"{system.kind}: h0 has {h0.shape[0]} entries, state dimension is {system.state_dim}")
    if steps < 0:
        raise ContractError(f"steps must be non-negative, got {steps}")
    if system.autonomous:
        if inputs is not None:
            raise ContractError(f"{system.kind} is autonomous and takes no input series")
        inputs = np.zeros((steps, 0))
    else:
        if inputs is None:
            raise ContractError(f"{system.kind} is driven and needs an input series")
        inputs = np.asarray(inputs, dtype=np.float64).reshape(len(inputs), -1)
        if inputs.shape[0] < steps or inputs.shape[1] != system.input_dim:
            raise DimensionError(
                f"{system.kind}: need ({steps}, {system.input_dim}) inputs, got {inputs.shape}"
            )

    window = system.delay
    states = np.zeros((window, system.state_dim))
    states[0] = h0
    past_inputs = np.zeros((window, system.input_dim))
    trajectory = np.zeros((steps + 1, system.state_dim))
    trajectory[0] = h0
    for t in range(steps):
        past_inputs = np.roll(past_inputs, 1, axis=0)
        past_inputs[0] = inputs[t]
        new_state = system.step(states, past_inputs)
        if not np.all(np.isfinite(new_state)) or np.max(np.abs(new_state)) > DIVERGENCE_LIMIT:
            logger.error(f"{system.kind} diverged at step {t + 1}")
            raise TrajectoryError(f"{system.kind} trajectory diverged at step {t + 1}", step=t + 1)
        states = np.roll(states, 1, axis=0)
        states[0] = new_state
        trajectory[t + 1] = new_state
    return trajectory


# --- synthetic series ---------------------------------------------------------

def narma_series(length: int, rng: np.random.Generator, theta=None) -> Tuple[np.ndarray, np.ndarray]:
    """NARMA-10 driven by u ~ U[0, 0.5]; returns (inputs, outputs), each of shape (length,)."""
    system = MapSystem.from_name('narma', NARMA_BENCHMARK_THETA if theta is None else theta)
    u = rng.uniform(0.0, 0.5, size=(length, 1))
    y = simulate(system, [0.0], u, steps=length)[1:, 0]
    return u[:, 0], y


def periodic_series(length: int, rng: np.random.Generator, period: int = 40, noise: float = 0.1) -> np.ndarray:
    """A random template of length ``period`` repeated, plus Gaussian noise."""
    template = rng.uniform(-1.0, 1.0, size=period)
    return np.resize(template, length) + noise * rng.standard_normal(length)


def interdependent_series(
    length: int,
    rng: np.random.Generator,
    lags: Sequence[int] = (3, 12),
    switch_every: int = 50,
    noise: float = 0.05,
) -> np.ndarray:
    """
    Driven series whose active lag changes over time: y_t = x_{t - L(t)} with
    L(t) cycling through ``lags`` every ``switch_every`` steps.

    Returns:
        (length, 2) array of columns (x, y)
    """
    x = rng.uniform(-1.0, 1.0, size=length)
    y = np.zeros(length)
    for t in range(length):
        lag = lags[(t // switch_every) % len(lags)]
        y[t] = (x[t - lag] if t >= lag else 0.0) + noise * rng.standard_normal()
    return np.column_stack([x, y])


def lag_recall_task(n_sequences: int, rng: np.random.Generator, T: int = 50, lag: int = 30):
    """
    Sequences X (T, 1) of uniform noise; the decoder must emit y_r = x_r for
    r = 1..T-lag, i.e. the output at time lag + r recalls the input lag steps back.

    Returns:
        (inputs of shape (n, T, 1), targets of shape (n, T - lag, 1))
    """
    if not 0 < lag < T:
        raise ContractError(f"lag must lie in 1..{T - 1}, got {lag}")
    X = rng.uniform(-1.0, 1.0, size=(n_sequences, T, 1))
    return X, X[:, :T - lag, :].copy()


def driven_feature_series(
    length: int,
    rng: np.random.Generator,
    n_features: int = 10,
    relevant: Sequence[int] = (2, 5),
    noise: float = 0.01,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Feature matrix of i.i.d. noise plus a target driven only by the
    ``relevant`` features: y_{t+1} = tanh(sum_k x_t^k) + small noise.

    Returns:
        (features (length, n_features), target (length,))
    """
    features = rng.standard_normal((length, n_features))
    drive = features[:, list(relevant)].sum(axis=1)
    target = np.zeros(length)
    target[1:] = np.tanh(drive[:-1]) + noise * rng.standard_normal(length - 1)
    return features, target
