"""
Background execution of training runs.

A seed sweep trains independent replicas in worker threads. Each replica
builds its own model and data from its seed; only the calling thread writes
artefacts and touches the database.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from django.utils import timezone

from .models import ExperimentRun
from .services.config import ExperimentConfig
from .services.trainer import Trainer

logger = logging.getLogger(__name__)


def _train_replica(config: ExperimentConfig) -> Trainer:
    trainer = Trainer(config)
    trainer.run()
    return trainer


def create_run(config: ExperimentConfig, output_dir: Path) -> ExperimentRun:
    return ExperimentRun.objects.create(
        name=config.name,
        kind=config.kind,
        seed=config.seed,
        status=ExperimentRun.Status.QUEUED,
        config=config.flat(),
        output_dir=str(output_dir),
    )


def mark_running(run: ExperimentRun) -> None:
    run.status = ExperimentRun.Status.RUNNING
    run.started_at = timezone.now()
    run.save(update_fields=['status', 'started_at', 'updated_at'])


def mark_completed(run: ExperimentRun, report: Dict) -> None:
    run.status = ExperimentRun.Status.COMPLETED
    run.report = report
    run.completed_at = timezone.now()
    run.save(update_fields=['status', 'report', 'completed_at', 'updated_at'])


def mark_failed(run: ExperimentRun, error: Exception) -> None:
    run.status = ExperimentRun.Status.FAILED
    run.error_message = f"{type(error).__name__}: {error}"
    run.completed_at = timezone.now()
    run.save(update_fields=['status', 'error_message', 'completed_at', 'updated_at'])


def run_seed_sweep(
    config: ExperimentConfig,
    seeds: Sequence[int],
    workers: int = 1,
    output_dir: Optional[Path] = None,
    on_report: Optional[Callable[[ExperimentRun, Dict], None]] = None,
) -> List[ExperimentRun]:
    """
    Train one replica per seed and write each into ``output_dir/seed_<n>``.

    Args:
        config: base experiment; only the seed changes between replicas
        seeds: distinct non-negative seeds
        workers: thread pool size
        output_dir: parent directory, defaults to the config's output dir
        on_report: called in seed order once a replica's artefacts are written

    Returns:
        The ExperimentRun rows in seed order. A failed replica is recorded
        and the first failure is re-raised after all replicas finish.
    """
    root = Path(output_dir) if output_dir is not None else config.output_dir
    replicas = [config.with_seed(seed) for seed in seeds]
    runs = [create_run(replica, root / f'seed_{replica.seed}') for replica in replicas]
    for run in runs:
        mark_running(run)
    logger.info(f"{config.name}: sweeping {len(seeds)} seeds on {workers} worker(s)")

    first_error: Optional[Exception] = None
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(_train_replica, replica) for replica in replicas]
        for run, future in zip(runs, futures):
            try:
                trainer = future.result()
                trainer.output_dir = Path(run.output_dir)
                trainer.write_artifacts(trainer.report)
                mark_completed(run, trainer.report)
                if on_report is not None:
                    on_report(run, trainer.report)
            except Exception as e:
                logger.error(f"{run.name} seed {run.seed} failed: {e}")
                mark_failed(run, e)
                first_error = first_error or e
    if first_error is not None:
        raise first_error
    return runs


def run_experiment(config: ExperimentConfig, output_dir: Optional[Path] = None) -> ExperimentRun:
    """Train a single run in the calling thread, recording it as an ExperimentRun."""
    output_dir = Path(output_dir) if output_dir is not None else config.output_dir
    run = create_run(config, output_dir)
    mark_running(run)
    try:
        report = Trainer(config, output_dir).run()
    except Exception as e:
        logger.error(f"{config.name} failed: {e}")
        mark_failed(run, e)
        raise
    mark_completed(run, report)
    return run
