"""
Single-hop end-to-end memory network for time series.

Historical vectors n_i are embedded twice, as addresses m_i = A n_i and as
contents c_i = B n_i. The query u_t = C x_t reads
o_t = sum_i softmax(u_t . m_i) c_i and the forecast is
y_t = W1 (o_t + u_t) + W2 y_{t-1}.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from services.engine.errors import ContractError, DimensionError, TapeStateError
from services.engine.tape import Tape
from services.engine.tensor import as_tensor

from .params import ModelParams, ParamInitializer
from .sequence import NodeOrTensor, as_node

logger = logging.getLogger(__name__)


@dataclass
class MemNet:
    params: ModelParams
    n: int
    d: int
    o: int = 1
    capacity: int = 64
    memory: List[np.ndarray] = field(default_factory=list)
    name: str = 'memnet'

    @classmethod
    def create(cls, params: ModelParams, init: ParamInitializer, n: int, d: int, o: int = 1, capacity: int = 64, name: str = 'memnet'):
        if capacity < 1:
            raise ContractError(f"memory capacity must be positive, got {capacity}")
        for matrix in ('A', 'B', 'C'):
            params.add(f"{name}.{matrix}", init.uniform(d, n))
        params.add(f"{name}.W1", init.uniform(o, d))
        params.add(f"{name}.W2", init.uniform(o, o))
        return cls(params=params, n=n, d=d, o=o, capacity=capacity, name=name)

    def weight(self, tape: Tape, key: str) -> int:
        return tape.param(f"{self.name}.{key}", self.params[f"{self.name}.{key}"])


def load_memory(model: MemNet, history: Sequence[np.ndarray]) -> None:
    """
    Replace the memory with ``history``; beyond capacity the oldest entries
    are dropped. Embeddings are computed on the tape at forward time.
    """
    entries = [as_tensor(h) for h in history]
    for index, entry in enumerate(entries):
        if entry.shape != (model.n,):
            raise DimensionError(f"memory entry {index} has shape {entry.shape}, expected ({model.n},)")
    if len(entries) > model.capacity:
        logger.debug(f"{model.name}: evicting {len(entries) - model.capacity} oldest memory entries")
        entries = entries[-model.capacity:]
    model.memory = entries


def memnet_forward(model: MemNet, x_t: NodeOrTensor, y_prev: NodeOrTensor, tape: Tape) -> Tuple[int, int]:
    """
    Returns:
        (y_t node, p_t node) where p_t is the addressing distribution over memory slots
    """
    if not model.memory:
        raise TapeStateError(f"{model.name}: memory is empty; call load_memory first")
    x_t, y_prev = as_node(tape, x_t), as_node(tape, y_prev)
    if tape.value(x_t).shape != (model.n,):
        raise DimensionError(f"{model.name}: x_t shape {tape.value(x_t).shape}, expected ({model.n},)")
    if tape.value(y_prev).shape != (model.o,):
        raise DimensionError(f"{model.name}: y_prev shape {tape.value(y_prev).shape}, expected ({model.o},)")

    A, B, C = (model.weight(tape, key) for key in ('A', 'B', 'C'))
    u = tape.matvec(C, x_t)
    scores, contents = [], []
    for entry in model.memory:
        slot = tape.constant(entry)
        scores.append(tape.dot(u, tape.matvec(A, slot)))
        contents.append(tape.matvec(B, slot))
    p = tape.softmax(tape.concat(*scores))
    o = tape.weighted_sum(p, contents)
    y = tape.add(
        tape.matvec(model.weight(tape, 'W1'), tape.add(o, u)),
        tape.matvec(model.weight(tape, 'W2'), y_prev),
    )
    return y, p
