"""
Loss functions recorded on the tape.
"""
from typing import Sequence

import numpy as np

from services.engine.errors import ContractError, DimensionError
from services.engine.tape import Tape
from services.engine.tensor import as_tensor, concat


def loss_mse(pred: int, target, tape: Tape) -> int:
    """Mean squared error between a prediction node and a target tensor."""
    target = as_tensor(target)
    shape = tape.value(pred).shape
    if shape != target.shape:
        raise DimensionError(f"prediction shape {shape} does not match target shape {target.shape}")
    diff = tape.sub(pred, tape.constant(target))
    return tape.scale(tape.sum(tape.mul(diff, diff)), 1.0 / target.size)


def sequence_mse(preds: Sequence[int], targets: Sequence[np.ndarray], tape: Tape) -> int:
    """MSE over a whole output sequence, averaged over every entry."""
    if len(preds) != len(targets):
        raise ContractError(f"{len(preds)} predictions for {len(targets)} targets")
    if len(preds) == 1:
        return loss_mse(preds[0], targets[0], tape)
    return loss_mse(tape.concat(*preds), concat(*(as_tensor(t) for t in targets)), tape)
