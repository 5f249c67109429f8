"""
Feedforward forecasters over a flattened lag window, and the least-squares
autoregressive baseline.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from sklearn.linear_model import LinearRegression

from services.engine.errors import ContractError, DimensionError
from services.engine.tape import Tape

from .params import ModelParams, ParamInitializer
from .primitives import DenseLayer, dense_forward

logger = logging.getLogger(__name__)


@dataclass
class WindowRegressor:
    """
    Time-delay network: the (T, n) window is flattened and pushed through a
    stack of dense layers. No hidden layers gives a linear model.
    """

    params: ModelParams
    layers: List[DenseLayer]
    T: int
    n: int

    @classmethod
    def create(
        cls,
        params: ModelParams,
        init: ParamInitializer,
        T: int,
        n: int,
        output_dim: int = 1,
        hidden_sizes: Sequence[int] = (),
        activation: str = 'tanh',
    ) -> 'WindowRegressor':
        sizes = [T * n, *hidden_sizes, output_dim]
        layers = []
        for index, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = index == len(sizes) - 2
            layers.append(DenseLayer.create(
                params, f"ff{index}", fan_in, fan_out, init,
                activation='identity' if last else activation,
            ))
        return cls(params=params, layers=layers, T=T, n=n)


def regressor_forward(model: WindowRegressor, X: np.ndarray, tape: Tape) -> int:
    X = np.asarray(X)
    if X.shape != (model.T, model.n):
        raise DimensionError(f"window shape {X.shape} does not match ({model.T}, {model.n})")
    node = tape.constant(X.reshape(-1))
    for layer in model.layers:
        node = dense_forward(layer, node, tape)
    return node


@dataclass
class AutoregressiveModel:
    order: int
    coef: np.ndarray
    intercept: float

    def predict(self, history: np.ndarray) -> float:
        """One-step forecast from the last ``order`` values of ``history``."""
        history = np.asarray(history, dtype=np.float64)
        if history.shape[0] < self.order:
            raise ContractError(f"need {self.order} past values, got {history.shape[0]}")
        return float(self.coef @ history[-self.order:] + self.intercept)


def lag_matrix(series: np.ndarray, order: int):
    """Rows of ``order`` consecutive values and the value that follows each row."""
    series = np.asarray(series, dtype=np.float64).reshape(-1)
    if series.shape[0] <= order:
        raise ContractError(f"series of length {series.shape[0]} is too short for order {order}")
    rows = np.lib.stride_tricks.sliding_window_view(series[:-1], order)
    return rows, series[order:]


def fit_autoregressive(series: np.ndarray, order: int) -> AutoregressiveModel:
    """Least-squares AR(order) fit."""
    if order < 1:
        raise ContractError(f"AR order must be positive, got {order}")
    rows, targets = lag_matrix(series, order)
    regression = LinearRegression().fit(rows, targets)
    logger.debug(f"AR({order}) fit on {rows.shape[0]} rows")
    return AutoregressiveModel(order=order, coef=regression.coef_, intercept=float(regression.intercept_))
