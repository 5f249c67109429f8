"""
Differentiable explicit Euler integration.

The derivative function records its own graph on the tape, so gradients flow
into the initial state, into any parameters the derivative reads and through
every step of the rollout.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np

from services.engine.errors import ContractError, NumericError, TrainingError
from services.engine.tape import Tape
from services.networks.params import ModelParams
from services.networks.primitives import DenseLayer, dense_forward
from services.networks.sequence import NodeOrTensor, as_node
from services.training.losses import loss_mse
from services.training.optim import OptimConfig, Optimizer

logger = logging.getLogger(__name__)

# (tape, state node, time) -> derivative node of the same shape as the state
Derivative = Callable[[Tape, int, float], int]


@dataclass
class OdeProblem:
    derivative: Derivative
    x0: NodeOrTensor
    t_span: Tuple[float, float] = (0.0, 1.0)
    steps: int = 100

    def __post_init__(self):
        if self.steps < 1:
            raise ContractError(f"Euler needs at least one step, got {self.steps}")
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ContractError(f"t_span must satisfy t1 > t0, got {self.t_span}")

    @property
    def dt(self) -> float:
        t0, t1 = self.t_span
        return (t1 - t0) / self.steps


def euler_solve(problem: OdeProblem, tape: Tape, keep_trajectory: bool = False) -> Union[int, Tuple[int, List[int]]]:
    """
    x_{k+1} = x_k + dt * f(x_k, t_k).

    Returns:
        The final-state node, or (final node, [x_0 .. x_N] nodes) with ``keep_trajectory``.
    """
    dt = problem.dt
    t0 = problem.t_span[0]
    x = as_node(tape, problem.x0)
    trajectory = [x]
    for k in range(problem.steps):
        fx = problem.derivative(tape, x, t0 + k * dt)
        x = tape.add(x, tape.scale(fx, dt))
        value = tape.value(x)
        if not np.all(np.isfinite(value)):
            logger.error(f"Euler state became non-finite at step {k + 1}")
            raise NumericError(f"Euler state is not finite at step {k + 1}", index=k + 1)
        if keep_trajectory:
            trajectory.append(x)
    if keep_trajectory:
        return x, trajectory
    return x


# --- derivative functions -------------------------------------------------------

def constant_derivative(value: Sequence[float]) -> Derivative:
    def derivative(tape: Tape, x: int, t: float) -> int:
        return tape.constant(value)
    return derivative


def linear_derivative(theta: int) -> Derivative:
    """f(x) = theta * x for a scalar parameter node ``theta``."""
    def derivative(tape: Tape, x: int, t: float) -> int:
        return tape.scalar_mul(theta, x)
    return derivative


def neural_derivative(layers: Sequence[DenseLayer]) -> Derivative:
    """Autonomous derivative given by a DenseLayer stack."""
    if not layers:
        raise ContractError("neural derivative needs at least one layer")

    def derivative(tape: Tape, x: int, t: float) -> int:
        out = x
        for layer in layers:
            out = dense_forward(layer, out, tape)
        return out
    return derivative


def analytic_euler(theta: float, x0: float, t_span: Tuple[float, float], steps: int) -> float:
    """Closed form of Euler on f = theta x: x0 (1 + theta dt)^N."""
    dt = (t_span[1] - t_span[0]) / steps
    return x0 * (1.0 + theta * dt) ** steps


def convergence_errors(theta: float, t_end: float, steps: Sequence[int]) -> List[float]:
    """|Euler(N) - e^{theta t_end}| for f = theta x, x0 = 1, computed on the tape."""
    errors = []
    for n in steps:
        tape = Tape()
        node = tape.constant([theta])
        final = euler_solve(OdeProblem(linear_derivative(node), [1.0], (0.0, t_end), n), tape)
        errors.append(abs(float(tape.value(final)[0]) - float(np.exp(theta * t_end))))
    return errors


def fit_derivative(
    params: ModelParams,
    layers: Sequence[DenseLayer],
    samples: Sequence[Tuple[np.ndarray, np.ndarray]],
    t_span: Tuple[float, float],
    steps: int,
    config: OptimConfig,
) -> List[float]:
    """
    Train a neural derivative so that Euler rollouts from each x0 reach the
    paired end state.

    Returns:
        Mean end-state MSE per epoch.
    """
    if not samples:
        raise ContractError("fit_derivative needs at least one (x0, target) pair")
    optimizer = Optimizer(params, config)
    derivative = neural_derivative(layers)
    history = []
    for epoch in range(config.epochs):
        total, summed = 0.0, {}
        for x0, target in samples:
            tape = Tape()
            final = euler_solve(OdeProblem(derivative, x0, t_span, steps), tape)
            loss = loss_mse(final, target, tape)
            value = float(tape.value(loss)[0])
            if not np.isfinite(value):
                raise TrainingError(f"ODE fit loss is not finite at epoch {epoch}", epoch=epoch)
            total += value
            for name, grad in tape.backward(loss).items():
                summed[name] = summed.get(name, 0.0) + grad
        optimizer.step({name: g / len(samples) for name, g in summed.items()})
        history.append(total / len(samples))
        logger.debug(f"fit_derivative epoch {epoch}: loss {history[-1]:.6f}")
    return history
