"""
Forecast with a trained model directory.
Usage: python manage.py predict --model runs/narma --input data.csv [--out predictions.csv]
"""
import io

from apps.core.utils import read_series_csv, write_matrix_csv
from apps.experiments.management.base import ExperimentCommand
from apps.experiments.services.workloads import load_trained


class Command(ExperimentCommand):
    help = 'Writes one forecast row per input window'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, help='Model directory written by train')
        parser.add_argument('--input', required=True, help='CSV with a header row')
        parser.add_argument('--out', help='Output CSV (default: stdout)')

    def run(self, **options):
        model = load_trained(options['model'])
        _, data = read_series_csv(options['input'])
        predictions = model.predict(data)
        columns = model.prediction_columns()
        if options['out']:
            write_matrix_csv(options['out'], predictions, columns, index='window')
            self.stdout.write(self.style.SUCCESS(f"Wrote {len(predictions)} forecasts to {options['out']}"))
            return
        buffer = io.StringIO()
        write_matrix_csv(buffer, predictions, columns, index='window')
        self.stdout.write(buffer.getvalue(), ending='')
