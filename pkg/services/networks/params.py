"""
Named collections of learnable tensors.
"""
import logging
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from services.engine.errors import ContractError, DimensionError
from services.engine.tensor import as_tensor

logger = logging.getLogger(__name__)

UpdateHook = Callable[[str, np.ndarray], np.ndarray]


class ModelParams:
    """
    Name -> tensor mapping shared by a model's layers.

    Values are immutable tensors; ``update`` swaps in a new tensor and runs the
    registered hooks, which may project the value (e.g. clamp a rate into
    [0, 1]) before it is stored.
    """

    def __init__(self, tensors: Optional[Dict[str, np.ndarray]] = None):
        self._tensors: Dict[str, np.ndarray] = {}
        self._hooks: List[UpdateHook] = []
        for name, value in (tensors or {}).items():
            self.add(name, value)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self._tensors.items())

    def add(self, name: str, value) -> np.ndarray:
        if name in self._tensors:
            raise ContractError(f"parameter {name!r} already exists")
        self._tensors[name] = as_tensor(value)
        return self._tensors[name]

    def add_hook(self, hook: UpdateHook) -> None:
        self._hooks.append(hook)

    def update(self, name: str, value) -> None:
        value = as_tensor(value)
        if value.shape != self._tensors[name].shape:
            raise DimensionError(
                f"update of {name!r} changes shape {self._tensors[name].shape} -> {value.shape}"
            )
        for hook in self._hooks:
            value = as_tensor(hook(name, value))
        self._tensors[name] = value

    def copy(self) -> 'ModelParams':
        clone = ModelParams(dict(self._tensors))
        clone._hooks = list(self._hooks)
        return clone

    def save(self, path: Path) -> None:
        np.savez(path, **self._tensors)

    def load(self, path: Path) -> None:
        """Overwrite values from an ``.npz`` written by ``save``."""
        with np.load(path) as archive:
            for name in archive.files:
                if name in self._tensors:
                    self.update(name, archive[name])
                else:
                    self.add(name, archive[name])


class ParamInitializer:
    """Seeded initialisation: weights uniform in +-1/sqrt(fan_in), biases zero."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def uniform(self, rows: int, cols: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(cols)
        return as_tensor(self.rng.uniform(-bound, bound, size=(rows, cols)))

    def zeros(self, *shape: int) -> np.ndarray:
        return as_tensor(np.zeros(shape))

    def full(self, value: float, *shape: int) -> np.ndarray:
        return as_tensor(np.full(shape, float(value)))
