"""
Sliding-window datasets over multivariate series, plus trajectory CSV I/O.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from sklearn.preprocessing import StandardScaler

from services.engine.errors import ContractError, DataError, DimensionError

logger = logging.getLogger(__name__)

Window = Tuple[np.ndarray, np.ndarray]


@dataclass
class SeriesDataset:
    """
    Windows over a (length, n) series. ``windows[i]`` reads source rows
    i .. i+T-1 (input columns only) and its target starts at row
    i+T+horizon-1 of the target columns.

    Split lists hold window indices; windows whose source rows would overlap
    an earlier split are left out of every split.
    """

    windows: List[Window]
    T: int
    horizon: int
    target_columns: List[int]
    mean: np.ndarray
    std: np.ndarray
    train: List[int] = field(default_factory=list)
    val: List[int] = field(default_factory=list)
    test: List[int] = field(default_factory=list)
    input_columns: Optional[List[int]] = None
    output_steps: int = 1

    def __post_init__(self):
        if self.input_columns is None:
            self.input_columns = list(range(len(self.mean)))

    def __len__(self) -> int:
        return len(self.windows)

    def split(self, name: str) -> List[Window]:
        if name not in ('train', 'val', 'test'):
            raise ContractError(f"unknown split {name!r}")
        return [self.windows[i] for i in getattr(self, name)]

    def source_rows(self, index: int) -> range:
        return range(index, index + self.T + self.horizon + self.output_steps - 1)

    def normalize_inputs(self, X: np.ndarray) -> np.ndarray:
        cols = self.input_columns
        return (np.asarray(X, dtype=np.float64) - self.mean[cols]) / self.std[cols]

    def denormalize_target(self, values: np.ndarray) -> np.ndarray:
        cols = self.target_columns
        return np.asarray(values) * self.std[cols] + self.mean[cols]

    def normalization(self) -> dict:
        return {
            'mean': self.mean.tolist(),
            'std': self.std.tolist(),
            'target_columns': list(self.target_columns),
            'input_columns': list(self.input_columns),
            'output_steps': self.output_steps,
            'T': self.T,
            'horizon': self.horizon,
        }


def _split_sizes(count: int, splits: Sequence[float]) -> Tuple[int, int]:
    if len(splits) != 3 or any(s < 0 for s in splits) or not np.isclose(sum(splits), 1.0):
        raise ContractError(f"splits must be three non-negative fractions summing to 1, got {tuple(splits)}")
    n_train = max(1, int(np.floor(splits[0] * count)))
    n_val = int(np.floor(splits[1] * count))
    return n_train, min(n_val, count - n_train)


def make_dataset(
    series: np.ndarray,
    T: int,
    horizon: int = 1,
    splits: Sequence[float] = (0.7, 0.15, 0.15),
    normalize: bool = True,
    target_columns: Optional[Sequence[int]] = None,
    input_columns: Optional[Sequence[int]] = None,
    output_steps: int = 1,
) -> SeriesDataset:
    """
    Cut ``series`` into (window, target) pairs and split them chronologically.

    With ``output_steps`` > 1 the target is the block of that many rows
    starting ``horizon`` steps after the window, shape (output_steps, k);
    otherwise it is the single row of shape (k,).

    Normalisation statistics come from the source rows of the training
    windows only. Windows at a split boundary that would share source rows
    with the previous split are dropped from the later split.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    if series.ndim != 2:
        raise DimensionError(f"series must be 1-D or 2-D, got shape {series.shape}")
    if T < 1 or horizon < 1 or output_steps < 1:
        raise ContractError(
            f"window T, horizon and output steps must be positive, got T={T}, horizon={horizon}, "
            f"output_steps={output_steps}"
        )
    length, n = series.shape
    span = T + horizon + output_steps - 2
    if length < span + 1:
        raise ContractError(f"series of length {length} is too short for T={T} and horizon={horizon}")
    if not np.all(np.isfinite(series)):
        raise DataError("series contains non-finite values")
    target_columns = list(range(n)) if target_columns is None else list(target_columns)
    input_columns = list(range(n)) if input_columns is None else list(input_columns)
    for label, columns in (('target', target_columns), ('input', input_columns)):
        if not columns or any(not 0 <= c < n for c in columns):
            raise ContractError(f"{label} columns {columns} outside 0..{n - 1}")

    count = length - span
    n_train, n_val = _split_sizes(count, splits)
    train = list(range(n_train))
    train_end = train[-1] + span
    val = [i for i in range(n_train, n_train + n_val) if i > train_end]
    val_end = val[-1] + span if val else train_end
    test = [i for i in range(n_train + n_val, count) if i > val_end]

    if normalize:
        scaler = StandardScaler().fit(series[:train_end + 1])
        zero = np.flatnonzero(scaler.var_ == 0.0)
        if zero.size:
            raise DataError(f"features {zero.tolist()} have zero variance on the training split")
        mean, std = scaler.mean_, scaler.scale_
        scaled = scaler.transform(series)
    else:
        mean, std = np.zeros(n), np.ones(n)
        scaled = series

    first = T + horizon - 1
    windows = []
    for i in range(count):
        X = scaled[i:i + T][:, input_columns].copy()
        block = scaled[i + first:i + first + output_steps][:, target_columns]
        windows.append((X, block.copy() if output_steps > 1 else block[0].copy()))
    logger.debug(
        f"dataset: {count} windows (train {len(train)}, val {len(val)}, test {len(test)}), T={T}, horizon={horizon}"
    )
    return SeriesDataset(
        windows=windows, T=T, horizon=horizon, target_columns=target_columns,
        mean=np.asarray(mean, dtype=np.float64), std=np.asarray(std, dtype=np.float64),
        train=train, val=val, test=test, input_columns=input_columns, output_steps=output_steps,
    )


def sequence_dataset(
    inputs: np.ndarray,
    targets: np.ndarray,
    splits: Sequence[float] = (0.7, 0.15, 0.15),
) -> SeriesDataset:
    """
    Dataset of independent sequences (sequence-to-sequence tasks): each
    sample is already a window, so splits cannot leak and no scaling is applied.
    """
    inputs, targets = np.asarray(inputs, dtype=np.float64), np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 3 or targets.ndim != 3 or len(inputs) != len(targets):
        raise DimensionError(f"need (count, T, n) inputs and (count, T', o) targets, got {inputs.shape} and {targets.shape}")
    count, T, n = inputs.shape
    n_train, n_val = _split_sizes(count, splits)
    return SeriesDataset(
        windows=[(inputs[i], targets[i]) for i in range(count)],
        T=T, horizon=1, target_columns=list(range(targets.shape[2])),
        mean=np.zeros(n), std=np.ones(n),
        train=list(range(n_train)),
        val=list(range(n_train, n_train + n_val)),
        test=list(range(n_train + n_val, count)),
        output_steps=targets.shape[1],
    )


# --- trajectory CSV -----------------------------------------------------------

def write_trajectory(path: Union[str, Path, TextIO], trajectory: np.ndarray, t0: int = 0) -> Union[Path, TextIO]:
    """Header ``t,x1..xn``; values printed with 17 significant digits. ``path`` may be an open text stream."""
    trajectory = np.asarray(trajectory, dtype=np.float64)
    if trajectory.ndim == 1:
        trajectory = trajectory[:, None]
    if not hasattr(path, 'write'):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
    header = ','.join(['t'] + [f"x{i + 1}" for i in range(trajectory.shape[1])])
    t = np.arange(t0, t0 + len(trajectory), dtype=np.float64)[:, None]
    np.savetxt(path, np.hstack([t, trajectory]), delimiter=',', header=header, comments='', fmt='%.17g')
    return path


def read_trajectory(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns:
        (time indices, states of shape (rows, n))
    """
    path = Path(path)
    with path.open(encoding='utf-8') as handle:
        header = handle.readline().strip().split(',')
    if not header or header[0] != 't':
        raise DataError(f"{path}: trajectory header must start with 't', got {header}")
    data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise DataError(f"{path}: {data.shape[1]} columns under a {len(header)}-column header")
    return data[:, 0], data[:, 1:]
