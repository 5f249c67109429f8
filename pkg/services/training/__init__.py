"""
Losses and gradient-descent optimisation shared by every trainer.
"""
from .losses import loss_mse, sequence_mse
from .optim import OptimConfig, Optimizer, clip_gradients, sgd_step

__all__ = ['loss_mse', 'sequence_mse', 'OptimConfig', 'Optimizer', 'clip_gradients', 'sgd_step']
