"""
Export attention weights of a trained model for an input file.
Usage: python manage.py export_attention --model runs/lag --input data.csv --out attention.csv
"""
from pathlib import Path

from apps.core.utils import read_series_csv, write_matrix_csv
from apps.experiments.management.base import ExperimentCommand
from apps.experiments.services.workloads import load_trained


class Command(ExperimentCommand):
    help = 'Writes attention matrices (alignment, temporal, input or memory addressing) as CSV'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True)
        parser.add_argument('--input', required=True)
        parser.add_argument('--out', required=True)

    def run(self, **options):
        model = load_trained(options['model'])
        _, data = read_series_csv(options['input'])
        out = Path(options['out'])
        for label, matrix in model.attention(data).items():
            # dual-stage input weights go next to the main file
            path = out if label != 'input' else out.with_name(f'{out.stem}_input{out.suffix}')
            write_matrix_csv(path, matrix, [f"w{i + 1}" for i in range(matrix.shape[1])], index='row')
            self.stdout.write(self.style.SUCCESS(f'Wrote {label} weights {matrix.shape} to {path}'))
