"""
Gradient descent: w := w - eta * grad, with optional momentum and global
gradient-norm clipping.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np

from services.engine.errors import ContractError, TrainingError
from services.networks.params import ModelParams

logger = logging.getLogger(__name__)

OPTIMIZERS = ('sgd', 'sgd-momentum')


@dataclass
class OptimConfig:
    eta: float = 0.01
    epochs: int = 100
    batch_size: int = 1
    seed: int = 0
    clip_norm: Optional[float] = None
    optimizer: str = 'sgd'
    momentum: float = 0.9

    def __post_init__(self):
        if self.eta < 0:
            raise ContractError(f"learning rate must be non-negative, got {self.eta}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ContractError(f"batch size must be positive, got {self.batch_size}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ContractError(f"clip norm must be positive, got {self.clip_norm}")
        if self.optimizer not in OPTIMIZERS:
            raise ContractError(f"unknown optimizer {self.optimizer!r} (expected one of {OPTIMIZERS})")


def clip_gradients(grads: Mapping[str, np.ndarray], clip_norm: Optional[float]) -> Dict[str, np.ndarray]:
    """Rescale all gradients together so their global L2 norm is at most ``clip_norm``."""
    grads = {name: np.asarray(g) for name, g in grads.items()}
    if clip_norm is None:
        return grads
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm <= clip_norm:
        return grads
    factor = clip_norm / norm
    return {name: g * factor for name, g in grads.items()}


def sgd_step(
    params: ModelParams,
    grads: Mapping[str, np.ndarray],
    config: OptimConfig,
    velocity: Optional[Dict[str, np.ndarray]] = None,
) -> None:
    """
    Apply one update in place. Parameters without a gradient entry did not
    take part in the graph and are left alone.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}", parameter=name)
    grads = clip_gradients({name: g for name, g in grads.items() if name in params}, config.clip_norm)
    for name, g in grads.items():
        step = g
        if config.optimizer == 'sgd-momentum':
            if velocity is None:
                raise ContractError("momentum updates need a velocity buffer")
            previous = velocity.get(name, np.zeros_like(g))
            step = config.momentum * previous + g
            velocity[name] = step
        params.update(name, params[name] - config.eta * step)


class Optimizer:
    """Stateful wrapper that owns the momentum buffer."""

    def __init__(self, params: ModelParams, config: OptimConfig):
        self.params = params
        self.config = config
        self.velocity: Dict[str, np.ndarray] = {}

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        sgd_step(self.params, grads, self.config, self.velocity)
