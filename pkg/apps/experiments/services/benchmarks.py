"""
Acceptance experiments behind ``manage.py benchmark``.

Each benchmark trains its models through the regular Trainer at a scale set
by BenchmarkScale, summarises every seed and reports the median over seeds
together with a pass flag for its threshold.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from services.engine.tape import Tape
from services.networks.feedforward import fit_autoregressive
from services.networks.plasticity import pin_alpha_to_zero
from services.networks.sequence import input_sensitivity
from services.systems.ode import convergence_errors
from services.systems.projectile import ProjectileSim, closed_form_distance, simulate_launch

from .config import ExperimentConfig, build_config
from .trainer import Trainer
from .workloads import build_task

logger = logging.getLogger(__name__)


@dataclass
class BenchmarkScale:
    """Sizes shared by all benchmarks; None keeps a benchmark's own default."""

    seeds: int = 5
    sequences: Optional[int] = None
    epochs: Optional[int] = None
    hidden: Optional[int] = None


@dataclass
class BenchmarkResult:
    name: str
    passed: bool
    summary: Dict[str, Any]
    per_seed: List[Dict[str, Any]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def _config(scale: BenchmarkScale, seed: int, **values) -> ExperimentConfig:
    for key in ('sequences', 'epochs', 'hidden'):
        if getattr(scale, key) is not None:
            values[key] = getattr(scale, key)
    values['seed'] = seed
    return build_config(values)


def _median(rows: List[Dict[str, Any]], key: str) -> float:
    return float(np.median([row[key] for row in rows]))


WEIGHT_SUM_TOLERANCE = 1e-12


def weight_sum_error(weights: np.ndarray) -> float:
    """Largest distance from 1 of a row sum; a 1-D array counts as one row."""
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    return float(np.max(np.abs(weights.sum(axis=1) - 1.0)))


# --- long inputs: plain vs attention encoder-decoder -------------------------------------

def lag_recall(scale: BenchmarkScale, T: int = 50, lag: int = 30) -> BenchmarkResult:
    """
    Recall x_{t-L} from a length-T sequence. The attention decoder should
    beat the plain one by an order of magnitude, and decoder step r should
    attend to input r.
    """
    common = dict(
        source='lag-recall', window=T, lag=lag, hidden=32, sequences=2000, score_hidden=16,
        eta=0.05, epochs=20, batch_size=16, optimizer='sgd-momentum', clip_norm=5.0,
    )
    rows = []
    for seed in range(scale.seeds):
        plain = Trainer(_config(scale, seed, name='lag-recall-plain', kind='encdec', **common))
        plain_report = plain.run()
        attn = Trainer(_config(scale, seed, name='lag-recall-attn', kind='encdec-attn', **common))
        attn_report = attn.run()

        hits, total, sum_error = 0, 0, 0.0
        for X, _ in attn.task.test:
            alignment = attn.task.forecaster.attention(X)['alignment']
            sum_error = max(sum_error, weight_sum_error(alignment))
            hits += int(np.sum(np.argmax(alignment, axis=1) == np.arange(alignment.shape[0])))
            total += alignment.shape[0]
        rows.append({
            'seed': seed,
            'plain_test_mse': plain_report['test_mse'],
            'attention_test_mse': attn_report['test_mse'],
            'mse_ratio': attn_report['test_mse'] / plain_report['test_mse'],
            'alignment_hit_rate': hits / total if total else 0.0,
            'alignment_sum_error': sum_error,
            'plain_input_sensitivity': input_sensitivity(plain.task.forecaster.model.encoder, attn.task.test[0][0]),
        })
        logger.info(f"lag-recall seed {seed}: ratio {rows[-1]['mse_ratio']:.3f}, hits {rows[-1]['alignment_hit_rate']:.2f}")

    summary = {
        'median_mse_ratio': _median(rows, 'mse_ratio'),
        'median_alignment_hit_rate': _median(rows, 'alignment_hit_rate'),
        'max_weight_sum_error': max(row['alignment_sum_error'] for row in rows),
    }
    passed = (
        summary['median_mse_ratio'] <= 0.1 and summary['median_alignment_hit_rate'] >= 0.8
        and summary['max_weight_sum_error'] <= WEIGHT_SUM_TOLERANCE
    )
    return BenchmarkResult('lag-recall', passed, summary, rows)


# --- dual-stage input attention picks the driving features ----------------------------------

def feature_selection(scale: BenchmarkScale, relevant=(2, 5), n_features: int = 10) -> BenchmarkResult:
    rows = []
    for seed in range(scale.seeds):
        trainer = Trainer(_config(
            scale, seed, name='feature-selection', kind='dual-stage', source='driven-features',
            features=n_features, window=10, hidden=16, length=1500, noise=0.01,
            eta=0.02, epochs=15, batch_size=8, optimizer='sgd-momentum', clip_norm=5.0,
        ))
        report = trainer.run()
        logs = [trainer.task.forecaster.attention(X) for X, _ in trainer.task.test]
        alphas = np.mean([log['input'].mean(axis=0) for log in logs], axis=0)
        sum_error = max(max(weight_sum_error(log['input']), weight_sum_error(log['temporal'])) for log in logs)
        others = [a for k, a in enumerate(alphas) if k not in relevant]
        ratio = float(min(alphas[k] for k in relevant) / max(others))
        rows.append({
            'seed': seed, 'test_mse': report['test_mse'], 'mean_alpha': alphas.tolist(),
            'alpha_ratio': ratio, 'weight_sum_error': sum_error,
        })
        logger.info(f"feature-selection seed {seed}: alpha ratio {ratio:.2f}")

    summary = {
        'median_alpha_ratio': _median(rows, 'alpha_ratio'),
        'relevant_features': list(relevant),
        'max_weight_sum_error': max(row['weight_sum_error'] for row in rows),
    }
    passed = summary['median_alpha_ratio'] >= 2.0 and summary['max_weight_sum_error'] <= WEIGHT_SUM_TOLERANCE
    return BenchmarkResult('feature-selection', passed, summary, rows)


# --- memory network vs an autoregressive baseline -----------------------------------------

def _ar_test_mse(trainer: Trainer, order: int) -> float:
    """
    AR(order) fitted on the normalised training stretch and scored on the
    same test windows as the trained model.
    """
    dataset = trainer.task.dataset
    first = dataset.windows[dataset.train[0]][0][:, 0]
    series = np.concatenate([first, [dataset.windows[i][1][0] for i in dataset.train]])
    model = fit_autoregressive(series, order)
    errors = [(model.predict(X[:, 0]) - target[0]) ** 2 for X, target in trainer.task.test]
    return float(np.mean(errors))


def memory(scale: BenchmarkScale, period: int = 40, order: int = 5) -> BenchmarkResult:
    rows = []
    for seed in range(scale.seeds):
        trainer = Trainer(_config(
            scale, seed, name='memory', kind='memnet', source='periodic', window=period + 10, length=1200,
            noise=0.1, memory_dim=16, memory_lag=5, capacity=64,
            eta=0.01, epochs=20, batch_size=8, optimizer='sgd-momentum', clip_norm=5.0,
        ))
        report = trainer.run()
        ar_mse = _ar_test_mse(trainer, order)
        entropies, slots, sum_error = [], 0, 0.0
        for X, _ in trainer.task.test:
            p = trainer.task.forecaster.attention(X)['memory'][0]
            sum_error = max(sum_error, weight_sum_error(p))
            slots = p.size
            entropies.append(float(-np.sum(p * np.log(np.clip(p, 1e-300, None)))))
        concentration = float(np.log(slots) - np.mean(entropies))
        rows.append({
            'seed': seed,
            'memnet_test_mse': report['test_mse'],
            'ar_test_mse': ar_mse,
            'improvement': 1.0 - report['test_mse'] / ar_mse,
            'entropy_below_uniform': concentration,
            'weight_sum_error': sum_error,
        })
        logger.info(f"memory seed {seed}: improvement {rows[-1]['improvement']:.2f}, concentration {concentration:.2f} nats")

    summary = {
        'median_improvement': _median(rows, 'improvement'),
        'median_entropy_below_uniform': _median(rows, 'entropy_below_uniform'),
        'max_weight_sum_error': max(row['weight_sum_error'] for row in rows),
    }
    passed = (
        summary['median_improvement'] >= 0.3 and summary['median_entropy_below_uniform'] >= 1.0
        and summary['max_weight_sum_error'] <= WEIGHT_SUM_TOLERANCE
    )
    return BenchmarkResult('memory', passed, summary, rows)


# --- Hebbian plasticity vs the alpha = 0 ablation -----------------------------------------

def plasticity(scale: BenchmarkScale) -> BenchmarkResult:
    rows = []
    for seed in range(scale.seeds):
        values = dict(
            kind='plastic', source='pattern-completion', hidden=8, patterns=3, degrade=0.5, sequences=400,
            plastic_eta=0.1, eta=0.03, epochs=30, batch_size=10, optimizer='sgd-momentum',
        )
        trained = Trainer(_config(scale, seed, name='plasticity', **values)).run()
        ablation_config = _config(scale, seed, name='plasticity-ablation', **values)
        task = build_task(ablation_config)
        pin_alpha_to_zero(task.layer)
        ablation = Trainer(ablation_config, task=task).run()
        rows.append({
            'seed': seed,
            'bit_accuracy': trained['bit_accuracy'],
            'ablation_bit_accuracy': ablation['bit_accuracy'],
        })
        logger.info(f"plasticity seed {seed}: {trained['bit_accuracy']:.3f} vs ablation {ablation['bit_accuracy']:.3f}")

    summary = {
        'median_bit_accuracy': _median(rows, 'bit_accuracy'),
        'median_ablation_bit_accuracy': _median(rows, 'ablation_bit_accuracy'),
    }
    passed = summary['median_bit_accuracy'] >= 0.9 and summary['median_ablation_bit_accuracy'] <= 0.6
    return BenchmarkResult('plasticity', passed, summary, rows)


# --- Euler convergence, the projectile oracle and the launch controller ---------------------

def ode(scale: BenchmarkScale, theta: float = 1.0) -> BenchmarkResult:
    errors = convergence_errors(theta, 1.0, [25, 50, 100, 200])
    ratios = [later / earlier for earlier, later in zip(errors, errors[1:])]
    converges = all(0.4 <= r <= 0.6 for r in ratios)

    sim = ProjectileSim(steps=1000)
    oracle = []
    for speed, angle in ((20.0, np.pi / 6), (25.0, np.pi / 4), (15.0, np.pi / 3)):
        tape = Tape()
        distance = simulate_launch(
            tape.constant([speed]), tape.constant([angle]), tape.constant([0.0]), tape, sim,
        )
        exact = closed_form_distance(speed, angle)
        oracle.append(abs(float(tape.value(distance)[0]) - exact) / exact)
    oracle_ok = max(oracle) <= 0.02

    rows = []
    for seed in range(scale.seeds):
        report = Trainer(_config(
            scale, seed, name='projectile-controller', kind='ode-demo', source='projectile', hidden=16,
            sequences=1000, sim_steps=200, eta=0.01, epochs=30, batch_size=10, optimizer='sgd-momentum',
            clip_norm=1.0, train_fraction=0.8, val_fraction=0.0,
        )).run()
        rows.append({'seed': seed, 'within_1pct': report['within_1pct'], 'max_relative_error': report['max_relative_error']})
        logger.info(f"ode seed {seed}: {report['within_1pct']:.3f} of queries within 1%")

    summary = {
        'euler_errors': errors,
        'halving_ratios': ratios,
        'closed_form_relative_errors': oracle,
        'median_within_1pct': _median(rows, 'within_1pct'),
    }
    passed = converges and oracle_ok and summary['median_within_1pct'] >= 0.95
    return BenchmarkResult('ode', passed, summary, rows)


BENCHMARKS: Dict[str, Callable[[BenchmarkScale], BenchmarkResult]] = {
    'lag-recall': lag_recall,
    'feature-selection': feature_selection,
    'memory': memory,
    'plasticity': plasticity,
    'ode': ode,
}


def run_benchmark(name: str, scale: Optional[BenchmarkScale] = None) -> BenchmarkResult:
    if name not in BENCHMARKS:
        raise KeyError(f"unknown benchmark {name!r} (expected one of {', '.join(BENCHMARKS)})")
    result = BENCHMARKS[name](scale or BenchmarkScale())
    logger.info(f"benchmark {name}: {'passed' if result.passed else 'failed'} {result.summary}")
    return result
