"""
Experiment trainer: gradient descent over a TrainingTask, a JSON run report
and the model directory.
"""
import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from apps.core.utils import write_matrix_csv
from services.engine.errors import TrainingError
from services.engine.tape import Tape
from services.training.optim import Optimizer

from .config import ExperimentConfig
from .workloads import TrainingTask, build_task

logger = logging.getLogger(__name__)

REPORT_KEYS = ('epochs', 'train_loss', 'val_loss', 'test_mse', 'wall_s')


def _sample_loss(task: TrainingTask, sample, epoch: int):
    tape = Tape()
    loss = task.loss(tape, sample)
    value = float(tape.value(loss)[0])
    if not np.isfinite(value):
        raise TrainingError(f"loss diverged at epoch {epoch}", epoch=epoch)
    return tape, loss, value


def evaluate(task: TrainingTask, samples: List, epoch: int = 0) -> Optional[float]:
    """Mean loss over ``samples``; None for an empty split."""
    if not samples:
        return None
    return float(np.mean([_sample_loss(task, sample, epoch)[2] for sample in samples]))


class Trainer:
    """
    Runs one experiment.

    The report always starts at epoch 0 with the losses of the initial
    parameters; every later entry is measured after that epoch's updates.
    """

    def __init__(self, config: ExperimentConfig, output_dir: Optional[Path] = None, task: Optional[TrainingTask] = None):
        self.config = config
        self.output_dir = Path(output_dir) if output_dir is not None else None
        # a prebuilt task lets callers adjust the model (e.g. an ablation) before training
        self.task = task
        self.report: Optional[Dict[str, Any]] = None

    def run(self) -> Dict[str, Any]:
        started = time.perf_counter()
        config = self.config
        self.task = task = self.task if self.task is not None else build_task(config)
        optim = config.optim
        rng = np.random.default_rng([config.seed, 2])
        optimizer = Optimizer(task.params, optim)

        epochs = [0]
        train_loss = [evaluate(task, task.train)]
        val_loss = [evaluate(task, task.val)]
        logger.info(f"{config.name} epoch 0: train {train_loss[0]:.6f}, val {self._fmt(val_loss[0])}")

        for epoch in range(1, optim.epochs + 1):
            order = rng.permutation(len(task.train))
            for start in range(0, len(order), optim.batch_size):
                batch = order[start:start + optim.batch_size]
                summed: Dict[str, np.ndarray] = {}
                for index in batch:
                    tape, loss, _ = _sample_loss(task, task.train[index], epoch)
                    for name, grad in tape.backward(loss).items():
                        summed[name] = summed[name] + grad if name in summed else np.array(grad)
                optimizer.step({name: grad / len(batch) for name, grad in summed.items()})
            epochs.append(epoch)
            train_loss.append(evaluate(task, task.train, epoch))
            val_loss.append(evaluate(task, task.val, epoch))
            logger.info(f"{config.name} epoch {epoch}: train {train_loss[-1]:.6f}, val {self._fmt(val_loss[-1])}")

        report: Dict[str, Any] = {
            'name': config.name,
            'kind': config.kind,
            'seed': config.seed,
            'epochs': epochs,
            'train_loss': train_loss,
            'val_loss': val_loss,
            'test_mse': evaluate(task, task.test),
        }
        report.update(task.metrics())
        report['wall_s'] = round(time.perf_counter() - started, 3)
        self.report = report
        if self.output_dir is not None:
            self.write_artifacts(report)
        logger.info(f"{config.name}: finished in {report['wall_s']}s, test {self._fmt(report['test_mse'])}")
        return report

    @staticmethod
    def _fmt(value: Optional[float]) -> str:
        return 'n/a' if value is None else f"{value:.6f}"

    def write_artifacts(self, report: Dict[str, Any]) -> Path:
        """config.ini, params.npz, normalization.json, report.json and attention CSVs."""
        out = self.output_dir
        out.mkdir(parents=True, exist_ok=True)
        (out / 'config.ini').write_text(self.config.to_ini(), encoding='utf-8')
        self.task.params.save(out / 'params.npz')
        (out / 'normalization.json').write_text(
            json.dumps(self.task.normalization(), indent=2, sort_keys=True), encoding='utf-8'
        )
        write_report(out / 'report.json', report)
        for label, matrix in self.task.attention().items():
            filename = 'attention.csv' if label in ('alignment', 'temporal', 'memory') else f'attention_{label}.csv'
            write_matrix_csv(out / filename, matrix, [f"w{i + 1}" for i in range(matrix.shape[1])], index='row')
        logger.info(f"{self.config.name}: artifacts written to {out}")
        return out


def write_report(path: Path, report: Dict[str, Any]) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + '\n', encoding='utf-8')


def train(config: ExperimentConfig, output_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Train one experiment and return its report."""
    return Trainer(config, output_dir).run()
