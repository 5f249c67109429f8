"""
Turn an ExperimentConfig into a TrainingTask: parameters, train/val/test
samples and a per-sample loss recorded on a tape.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from apps.core.utils import read_series_csv
from services.engine.errors import ContractError, DataError
from services.engine.tape import Tape
from services.networks.params import ModelParams, ParamInitializer
from services.networks.plasticity import (
    PatternCompletionTask, PlasticLayer, bit_accuracy, episode_loss, without_plasticity,
)
from services.systems.dataset import SeriesDataset, make_dataset, sequence_dataset
from services.systems.maps import (
    DEFAULT_H0, MapSystem, driven_feature_series, interdependent_series, lag_recall_task, narma_series,
    periodic_series, simulate,
)
from services.systems.projectile import (
    LaunchController, ProjectileSim, controller_sim_demo, evaluate_controller, relative_miss, sample_queries,
)

from .config import ExperimentConfig, parse_config_text
from .forecasters import Forecaster, ModelDims, build_forecaster

logger = logging.getLogger(__name__)

# Column coefficients of the exactly linear synthetic source.
LINEAR_COEFFICIENTS = (0.5, -0.3)


class TrainingTask:
    """Samples plus the loss of one sample; subclasses add reporting hooks."""

    def __init__(self, params: ModelParams, train: List, val: List, test: List):
        self.params = params
        self.train = train
        self.val = val
        self.test = test

    def loss(self, tape: Tape, sample) -> int:
        raise NotImplementedError

    def metrics(self) -> Dict[str, Any]:
        return {}

    def normalization(self) -> Dict[str, Any]:
        return {}

    def attention(self) -> Dict[str, np.ndarray]:
        return {}


class ForecastTask(TrainingTask):
    def __init__(self, forecaster: Forecaster, dataset: SeriesDataset):
        super().__init__(forecaster.params, dataset.split('train'), dataset.split('val'), dataset.split('test'))
        self.forecaster = forecaster
        self.dataset = dataset

    def loss(self, tape, sample):
        return self.forecaster.loss(tape, sample)

    def normalization(self):
        values = self.dataset.normalization()
        values['dims'] = {
            'n_inputs': self.forecaster.dims.n_inputs,
            'n_outputs': self.forecaster.dims.n_outputs,
            'T': self.forecaster.dims.T,
            'output_steps': self.forecaster.dims.output_steps,
            'target_positions': list(self.forecaster.dims.target_positions),
        }
        return values

    def attention(self):
        samples = self.test or self.val or self.train
        return self.forecaster.attention(samples[0][0])


class PlasticTask(TrainingTask):
    def __init__(self, layer: PlasticLayer, episodes: Tuple[List, List, List]):
        super().__init__(layer.params, *episodes)
        self.layer = layer

    def loss(self, tape, sample):
        return episode_loss(self.layer, sample, tape)

    def metrics(self):
        episodes = self.test or self.val
        return {
            'bit_accuracy': bit_accuracy(self.layer, episodes),
            'bit_accuracy_without_plasticity': bit_accuracy(without_plasticity(self.layer), episodes),
        }


class ControllerTask(TrainingTask):
    def __init__(self, controller: LaunchController, queries: Tuple[List, List, List]):
        super().__init__(controller.params, *queries)
        self.controller = controller

    def loss(self, tape, sample):
        target, wind = sample
        return relative_miss(controller_sim_demo(self.controller, target, wind, tape), target, tape)

    def metrics(self):
        queries = self.test or self.val
        errors = evaluate_controller(self.controller, np.asarray(queries))
        return {
            'within_1pct': float(np.mean(errors <= 0.01)) if errors.size else None,
            'max_relative_error': float(errors.max()) if errors.size else None,
        }


# --- data ------------------------------------------------------------------------

def _split_counts(count: int, config: ExperimentConfig) -> Tuple[int, int]:
    n_train = max(1, int(count * config.train_fraction))
    n_val = min(int(count * config.val_fraction), count - n_train)
    return n_train, n_val


def _split_list(items: List, config: ExperimentConfig) -> Tuple[List, List, List]:
    n_train, n_val = _split_counts(len(items), config)
    return items[:n_train], items[n_train:n_train + n_val], items[n_train + n_val:]


def load_series(config: ExperimentConfig, rng: np.random.Generator) -> Tuple[np.ndarray, List[int], List[int]]:
    """
    Raw (length, n) series for a series source with its default input and
    target columns.
    """
    source, length = config.source, config.length
    theta = config.theta or None
    if source == 'csv':
        _, series = read_series_csv(config.path)
        return series, list(range(series.shape[1])), [series.shape[1] - 1]
    if source in ('logistic', 'henon'):
        system = MapSystem.from_name(source, theta)
        h0 = config.h0 or DEFAULT_H0[source]
        series = simulate(system, h0, steps=length - 1)
        return series, list(range(series.shape[1])), list(range(series.shape[1]))
    if source == 'narma':
        u, y = narma_series(length, rng, theta)
        return np.column_stack([u, y]), [0, 1], [1]
    if source == 'delayed-driven':
        system = MapSystem.from_name(source, theta)
        u = rng.uniform(-1.0, 1.0, size=(length - 1, 1))
        h = simulate(system, config.h0 or DEFAULT_H0[source], u, steps=length - 1)
        return np.column_stack([np.vstack([u, [[0.0]]]), h]), [0, 1], [1]
    if source == 'interdependent':
        return interdependent_series(length, rng, noise=config.noise), [0, 1], [1]
    if source == 'periodic':
        return periodic_series(length, rng, noise=config.noise)[:, None], [0], [0]
    if source == 'driven-features':
        features, target = driven_feature_series(length, rng, n_features=config.features)
        n = features.shape[1]
        return np.column_stack([features, target]), list(range(n)), [n]
    if source == 'linear':
        x = rng.standard_normal((length, len(LINEAR_COEFFICIENTS)))
        y = np.zeros(length)
        y[1:] = x[:-1] @ np.asarray(LINEAR_COEFFICIENTS)
        return np.column_stack([x, y]), list(range(x.shape[1] + 1)), [x.shape[1]]
    raise ContractError(f"{source!r} is not a series source")


def load_dataset(config: ExperimentConfig, rng: np.random.Generator) -> SeriesDataset:
    if config.source == 'lag-recall':
        inputs, targets = lag_recall_task(config.sequences, rng, T=config.window, lag=config.lag)
        return sequence_dataset(inputs, targets, config.splits)
    series, inputs, targets = load_series(config, rng)
    return make_dataset(
        series, config.window, horizon=config.horizon, splits=config.splits, normalize=config.normalize,
        target_columns=config.target_columns or targets, input_columns=config.input_columns or inputs,
        output_steps=config.output_steps,
    )


def dims_for(dataset: SeriesDataset) -> ModelDims:
    positions = [
        dataset.input_columns.index(c) if c in dataset.input_columns else -1 for c in dataset.target_columns
    ]
    return ModelDims(
        n_inputs=len(dataset.input_columns), n_outputs=len(dataset.target_columns), T=dataset.T,
        output_steps=dataset.output_steps, target_positions=positions,
    )


# --- tasks ------------------------------------------------------------------------

def build_task(config: ExperimentConfig) -> TrainingTask:
    """
    Data and model are seeded from the config seed through separate
    generators, so every run with the same seed sees identical samples and
    initial weights.
    """
    data_rng = np.random.default_rng([config.seed, 0])
    init = ParamInitializer(np.random.default_rng([config.seed, 1]))
    params = ModelParams()

    if config.kind == 'plastic':
        layer = PlasticLayer.create(params, init, config.hidden, config.hidden, eta=config.plastic_eta,
                                    learn_eta=config.learn_eta)
        task = PatternCompletionTask(n_units=config.hidden, n_patterns=config.patterns, degrade=config.degrade)
        episodes = [task.sample(data_rng) for _ in range(config.sequences)]
        return PlasticTask(layer, _split_list(episodes, config))

    if config.kind == 'ode-demo':
        sim = ProjectileSim(v_max=config.v_max, steps=config.sim_steps)
        controller = LaunchController.create(params, init, sim, hidden=config.hidden)
        queries = [tuple(row) for row in sample_queries(data_rng, config.sequences)]
        return ControllerTask(controller, _split_list(queries, config))

    dataset = load_dataset(config, data_rng)
    if not dataset.train:
        raise DataError(f"{config.name}: no training windows")
    forecaster = build_forecaster(config, dims_for(dataset), init, params)
    logger.info(
        f"{config.name}: {config.kind} on {config.source}, {len(params)} parameter tensors, "
        f"{len(dataset.train)}/{len(dataset.val)}/{len(dataset.test)} windows"
    )
    return ForecastTask(forecaster, dataset)


# --- trained model directories ---------------------------------------------------------

class TrainedModel:
    """A forecaster restored from a model directory, with its normalisation."""

    def __init__(self, config: ExperimentConfig, forecaster: Forecaster, normalization: Dict[str, Any]):
        self.config = config
        self.forecaster = forecaster
        self.normalization = normalization
        self.mean = np.asarray(normalization['mean'])
        self.std = np.asarray(normalization['std'])

    @property
    def T(self) -> int:
        return self.forecaster.dims.T

    def windows(self, data: np.ndarray) -> List[np.ndarray]:
        """
        Normalised sliding windows of length T over raw rows. ``data`` holds
        either the model's input columns or every column of the training
        series, in which case the input columns are picked out.
        """
        cols = self.normalization['input_columns']
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 2 and data.shape[1] == len(self.mean) and data.shape[1] != len(cols):
            data = data[:, cols]
        if data.ndim != 2 or data.shape[1] != len(cols):
            raise DataError(f"input has shape {data.shape}; the model reads {len(cols)} columns")
        if data.shape[0] < self.T:
            raise DataError(f"input has {data.shape[0]} rows; the model window is {self.T}")
        scaled = (data - self.mean[cols]) / self.std[cols]
        return [scaled[i:i + self.T] for i in range(data.shape[0] - self.T + 1)]

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        cols = self.normalization['target_columns']
        return np.asarray(values) * self.std[cols] + self.mean[cols]

    def predict(self, data: np.ndarray) -> np.ndarray:
        """One row per window: the denormalised forecast, steps laid out one after another."""
        rows = [self.denormalize(self.forecaster.predict(X)).reshape(-1) for X in self.windows(data)]
        return np.vstack(rows)

    def prediction_columns(self) -> List[str]:
        targets = self.normalization['target_columns']
        steps = self.forecaster.dims.output_steps
        if steps == 1:
            return [f"y{c + 1}" for c in targets]
        return [f"s{s + 1}_y{c + 1}" for s in range(steps) for c in targets]

    def attention(self, data: np.ndarray) -> Dict[str, np.ndarray]:
        """
        Attention logs for an input file. Memory addressing gives one row per
        window; alignment and dual-stage weights are taken on the last window.
        """
        windows = self.windows(data)
        if self.config.kind == 'memnet':
            return {'memory': np.vstack([self.forecaster.attention(X)['memory'] for X in windows])}
        weights = self.forecaster.attention(windows[-1])
        if not weights:
            raise ContractError(f"{self.config.kind} models keep no attention weights")
        return weights


def load_trained(model_dir: Path) -> TrainedModel:
    model_dir = Path(model_dir)
    for artefact in ('config.ini', 'params.npz', 'normalization.json'):
        if not (model_dir / artefact).is_file():
            raise FileNotFoundError(f"{model_dir} is not a trained model directory (missing {artefact})")
    config = parse_config_text((model_dir / 'config.ini').read_text(encoding='utf-8'), str(model_dir / 'config.ini'))
    normalization = json.loads((model_dir / 'normalization.json').read_text(encoding='utf-8'))
    if 'dims' not in normalization:
        raise ContractError(f"{config.kind} models do not make forecasts from input files")
    dims = ModelDims(**normalization['dims'])
    params = ModelParams()
    forecaster = build_forecaster(config, dims, ParamInitializer(np.random.default_rng(0)), params)
    params.load(model_dir / 'params.npz')
    return TrainedModel(config, forecaster, normalization)

