"""
Neural controller composed with a differentiable projectile simulator.

A point mass is launched from the origin with speed v and angle phi under
gravity and a constant horizontal wind acceleration. Integration runs for a
fixed horizon with Euler; the landing distance is read off by linear
interpolation between the last state above ground and the first below it,
so the whole pipeline stays differentiable.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from services.engine.errors import ContractError, TrainingError
from services.engine.tape import Tape
from services.networks.params import ModelParams, ParamInitializer
from services.networks.primitives import DenseLayer, dense_forward
from services.training.optim import OptimConfig, Optimizer

from .ode import Derivative, OdeProblem, euler_solve

logger = logging.getLogger(__name__)

GRAVITY = 9.81

# d/dt [x, y, vx, vy] = [vx, vy, 0, 0] + [0, 0, wind, -g]
_KINEMATICS = np.array([
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
])


@dataclass
class ProjectileSim:
    g: float = GRAVITY
    v_max: float = 30.0
    steps: int = 1000
    horizon: Optional[float] = None

    def __post_init__(self):
        if self.g <= 0 or self.v_max <= 0:
            raise ContractError(f"gravity and v_max must be positive, got g={self.g}, v_max={self.v_max}")
        if self.horizon is None:
            # Longest flight at v_max is 2 v_max / g; leave room for tail wind.
            self.horizon = 2.2 * self.v_max / self.g
        if self.horizon <= 0:
            raise ContractError(f"horizon must be positive, got {self.horizon}")


def closed_form_distance(speed: float, angle: float, g: float = GRAVITY) -> float:
    """Drag-free, wind-free range v^2 sin(2 phi) / g."""
    return speed ** 2 * np.sin(2.0 * angle) / g


def launch_state(speed: int, angle: int, tape: Tape) -> int:
    vx = tape.mul(speed, tape.cos(angle))
    vy = tape.mul(speed, tape.sin(angle))
    return tape.concat(tape.constant([0.0, 0.0]), vx, vy)


def projectile_derivative(tape: Tape, wind: int, sim: ProjectileSim) -> Derivative:
    kinematics = tape.constant(_KINEMATICS)
    accel = tape.concat(tape.constant([0.0, 0.0]), wind, tape.constant([-sim.g]))

    def derivative(tape: Tape, x: int, t: float) -> int:
        return tape.add(tape.matvec(kinematics, x), accel)
    return derivative


def ground_crossing(trajectory: Sequence[int], tape: Tape) -> int:
    """
    x_k + (x_{k+1} - x_k) y_k / (y_k - y_{k+1}) at the first k with
    y_k >= 0 > y_{k+1}. The crossing index is fixed from the forward values;
    only the readout is differentiated.
    """
    heights = [float(tape.value(state)[1]) for state in trajectory]
    for k in range(len(heights) - 1):
        if heights[k] >= 0.0 > heights[k + 1]:
            here, there = trajectory[k], trajectory[k + 1]
            x_k, y_k = tape.slice(here, 0, 1), tape.slice(here, 1, 2)
            x_next, y_next = tape.slice(there, 0, 1), tape.slice(there, 1, 2)
            fraction = tape.div(y_k, tape.sub(y_k, y_next))
            return tape.add(x_k, tape.mul(tape.sub(x_next, x_k), fraction))
    logger.warning(f"projectile still airborne after {len(heights) - 1} steps; using final position")
    return tape.slice(trajectory[-1], 0, 1)


def simulate_launch(speed: int, angle: int, wind: int, tape: Tape, sim: ProjectileSim) -> int:
    """Landing distance node for launch speed, angle and wind nodes (each of shape (1,))."""
    problem = OdeProblem(
        derivative=projectile_derivative(tape, wind, sim),
        x0=launch_state(speed, angle, tape),
        t_span=(0.0, sim.horizon),
        steps=sim.steps,
    )
    _, trajectory = euler_solve(problem, tape, keep_trajectory=True)
    return ground_crossing(trajectory, tape)


def relative_miss(distance: int, target: float, tape: Tape) -> int:
    """((distance - target) / target)^2 as a scalar node."""
    miss = tape.scale(tape.sub(distance, tape.constant([target])), 1.0 / target)
    return tape.sum(tape.mul(miss, miss))


# --- controller -----------------------------------------------------------------

@dataclass
class LaunchController:
    """Two inputs (target distance, wind) to bounded (speed, angle)."""

    params: ModelParams
    layers: List[DenseLayer]
    sim: ProjectileSim = field(default_factory=ProjectileSim)
    target_scale: float = 50.0
    wind_scale: float = 2.0

    @classmethod
    def create(
        cls,
        params: ModelParams,
        init: ParamInitializer,
        sim: Optional[ProjectileSim] = None,
        hidden: int = 16,
        target_scale: float = 50.0,
        wind_scale: float = 2.0,
    ) -> 'LaunchController':
        layers = [
            DenseLayer.create(params, 'controller.0', 2, hidden, init, activation='tanh'),
            DenseLayer.create(params, 'controller.1', hidden, 2, init, activation='identity'),
        ]
        return cls(params, layers, sim or ProjectileSim(), target_scale, wind_scale)


def launch_parameters(controller: LaunchController, target: float, wind: float, tape: Tape) -> Tuple[int, int]:
    """speed = v_max sigmoid(o_1) in (0, v_max), angle = (pi / 2) sigmoid(o_2) in (0, pi / 2)."""
    out = tape.constant([target / controller.target_scale, wind / controller.wind_scale])
    for layer in controller.layers:
        out = dense_forward(layer, out, tape)
    speed = tape.scale(tape.sigmoid(tape.slice(out, 0, 1)), controller.sim.v_max)
    angle = tape.scale(tape.sigmoid(tape.slice(out, 1, 2)), np.pi / 2.0)
    return speed, angle


def controller_sim_demo(controller: LaunchController, target: float, wind: float, tape: Tape) -> int:
    """Network then simulator; returns the achieved-distance node."""
    speed, angle = launch_parameters(controller, target, wind, tape)
    return simulate_launch(speed, angle, tape.constant([wind]), tape, controller.sim)


def sample_queries(
    rng: np.random.Generator,
    count: int,
    target_range: Tuple[float, float] = (5.0, 40.0),
    wind_range: Tuple[float, float] = (-2.0, 2.0),
) -> np.ndarray:
    """(count, 2) array of (target distance, wind) pairs."""
    return np.column_stack([
        rng.uniform(*target_range, size=count),
        rng.uniform(*wind_range, size=count),
    ])


def train_controller(
    controller: LaunchController,
    config: OptimConfig,
    target_range: Tuple[float, float] = (5.0, 40.0),
    wind_range: Tuple[float, float] = (-2.0, 2.0),
) -> List[float]:
    """
    Back-propagate the relative landing miss through the simulator into the
    controller weights.

    Returns:
        Mean squared relative miss per epoch.
    """
    rng = np.random.default_rng(config.seed)
    optimizer = Optimizer(controller.params, config)
    history = []
    for epoch in range(config.epochs):
        total, summed = 0.0, {}
        for target, wind in sample_queries(rng, config.batch_size, target_range, wind_range):
            tape = Tape()
            loss = relative_miss(controller_sim_demo(controller, target, wind, tape), target, tape)
            value = float(tape.value(loss)[0])
            if not np.isfinite(value):
                raise TrainingError(f"controller loss is not finite at epoch {epoch}", epoch=epoch)
            total += value
            for name, grad in tape.backward(loss).items():
                summed[name] = summed.get(name, 0.0) + grad
        optimizer.step({name: g / config.batch_size for name, g in summed.items()})
        history.append(total / config.batch_size)
        if epoch % 25 == 0 or epoch == config.epochs - 1:
            logger.info(f"controller epoch {epoch}: mean squared relative miss {history[-1]:.3e}")
    return history


def evaluate_controller(controller: LaunchController, queries: np.ndarray) -> np.ndarray:
    """|achieved - target| / target for each query row."""
    errors = []
    for target, wind in queries:
        tape = Tape()
        achieved = float(tape.value(controller_sim_demo(controller, target, wind, tape))[0])
        errors.append(abs(achieved - target) / target)
    return np.asarray(errors)


# --- single-query optimisation -------------------------------------------------------

@dataclass
class LaunchSolution:
    speed: float
    angle: float
    distance: float
    history: List[float]


def optimize_launch(
    target: float,
    wind: float,
    sim: Optional[ProjectileSim] = None,
    config: Optional[OptimConfig] = None,
) -> LaunchSolution:
    """Tune (speed, angle) for one query by descending through the simulator alone."""
    if target <= 0:
        raise ContractError(f"target distance must be positive, got {target}")
    sim = sim or ProjectileSim()
    config = config or OptimConfig(eta=0.5, epochs=200, optimizer='sgd-momentum')
    params = ModelParams({'launch.speed': np.zeros(1), 'launch.angle': np.zeros(1)})
    optimizer = Optimizer(params, config)

    def rollout(tape: Tape) -> Tuple[int, int, int]:
        speed = tape.scale(tape.sigmoid(tape.param('launch.speed', params['launch.speed'])), sim.v_max)
        angle = tape.scale(tape.sigmoid(tape.param('launch.angle', params['launch.angle'])), np.pi / 2.0)
        return speed, angle, simulate_launch(speed, angle, tape.constant([wind]), tape, sim)

    history = []
    for epoch in range(config.epochs):
        tape = Tape()
        _, _, distance = rollout(tape)
        loss = relative_miss(distance, target, tape)
        history.append(float(tape.value(loss)[0]))
        optimizer.step(tape.backward(loss))

    tape = Tape()
    speed, angle, distance = rollout(tape)
    solution = LaunchSolution(
        speed=float(tape.value(speed)[0]),
        angle=float(tape.value(angle)[0]),
        distance=float(tape.value(distance)[0]),
        history=history,
    )
    logger.info(
        f"launch for target {target:.2f} (wind {wind:+.2f}): v={solution.speed:.3f}, "
        f"phi={solution.angle:.3f}, distance {solution.distance:.3f}"
    )
    return solution
