"""
Run an acceptance experiment and write its JSON report.
Usage: python manage.py benchmark --name lag-recall [--seeds 5] [--sequences 200] [--epochs 5] [--out report.json]
"""
import json
from pathlib import Path

from django.core.management.base import CommandError

from apps.experiments.management.base import ExperimentCommand
from apps.experiments.services.benchmarks import BENCHMARKS, BenchmarkScale, run_benchmark


class Command(ExperimentCommand):
    help = 'Runs one of the acceptance benchmarks at a configurable scale'

    def add_arguments(self, parser):
        parser.add_argument('--name', required=True, choices=list(BENCHMARKS))
        parser.add_argument('--seeds', type=int, default=5)
        parser.add_argument('--sequences', type=int, help='Override the training set size')
        parser.add_argument('--epochs', type=int, help='Override the epoch budget')
        parser.add_argument('--hidden', type=int, help='Override the hidden size')
        parser.add_argument('--out', help='JSON report path (default: stdout)')
        parser.add_argument('--strict', action='store_true', help='Exit 2 when the threshold is missed')

    def run(self, **options):
        if options['seeds'] < 1:
            raise CommandError('--seeds must be at least 1', returncode=1)
        scale = BenchmarkScale(
            seeds=options['seeds'], sequences=options['sequences'], epochs=options['epochs'], hidden=options['hidden'],
        )
        result = run_benchmark(options['name'], scale)
        text = json.dumps(result.as_dict(), indent=2, sort_keys=True)
        if options['out']:
            path = Path(options['out'])
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text + '\n', encoding='utf-8')
        else:
            self.stdout.write(text)
        status = 'passed' if result.passed else 'missed its threshold'
        if not result.passed and options['strict']:
            raise CommandError(f"benchmark {result.name} {status}", returncode=2)
        self.stdout.write(self.style.SUCCESS(f'Benchmark {result.name} {status}'))
