"""
Train an experiment from an INI config.
Usage: python manage.py train --config experiments/lag.ini [--seeds 1,2,3] [--workers 3]
"""
import json

from django.conf import settings

from apps.experiments.management.base import ExperimentCommand, parse_ints
from apps.experiments.services.config import load_config
from apps.experiments.tasks import run_experiment, run_seed_sweep


class Command(ExperimentCommand):
    help = 'Trains a model from an experiment config and writes its model directory'

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help='Experiment INI file')
        parser.add_argument('--seeds', help='Comma-separated seeds; each trains into <dir>/seed_<n>')
        parser.add_argument('--workers', type=int, default=None, help='Threads for a seed sweep')
        parser.add_argument('--out', help='Output directory (overrides [output] dir)')

    def run(self, **options):
        config = load_config(options['config'])
        output_dir = options['out'] or config.output_dir

        if options['seeds']:
            seeds = parse_ints(options['seeds'])
            workers = options['workers'] or settings.DP_WORKERS
            runs = run_seed_sweep(config, seeds, workers=workers, output_dir=output_dir)
            for run in runs:
                self.stdout.write(f"seed {run.seed}: test_mse {run.test_mse} -> {run.output_dir}")
            self.stdout.write(self.style.SUCCESS(f'Trained {len(runs)} seeds of {config.name}'))
            return

        run = run_experiment(config, output_dir)
        self.stdout.write(json.dumps(run.report, indent=2, sort_keys=True))
        self.stdout.write(self.style.SUCCESS(f'Trained {config.name} -> {run.output_dir}'))
