"""
Iterate a built-in map and write its trajectory.
Usage: python manage.py simulate --system logistic --theta 4.0 --steps 3 [--out traj.csv]
"""
import io

import numpy as np

from apps.experiments.management.base import ExperimentCommand, parse_floats
from services.systems.dataset import write_trajectory
from services.systems.maps import DEFAULT_H0, DEFAULT_THETA, MapSystem, simulate


class Command(ExperimentCommand):
    help = 'Simulates a discrete dynamical system and writes the trajectory as CSV'

    def add_arguments(self, parser):
        parser.add_argument('--system', required=True, choices=sorted(DEFAULT_THETA))
        parser.add_argument('--theta', default='', help='Comma-separated parameters (default: the system defaults)')
        parser.add_argument('--steps', type=int, required=True)
        parser.add_argument('--h0', default='', help='Comma-separated initial state')
        parser.add_argument('--seed', type=int, default=0, help='Seed for the random drive of driven systems')
        parser.add_argument('--out', help='Output CSV (default: stdout)')

    def run(self, **options):
        name = options['system']
        system = MapSystem.from_name(name, parse_floats(options['theta']) or None)
        h0 = parse_floats(options['h0']) or DEFAULT_H0[name]
        steps = options['steps']
        inputs = None
        if not system.autonomous:
            rng = np.random.default_rng(options['seed'])
            # NARMA is driven on [0, 0.5]; the delayed map on [-1, 1].
            low, high = (0.0, 0.5) if name == 'narma' else (-1.0, 1.0)
            inputs = rng.uniform(low, high, size=(steps, system.input_dim))
        trajectory = simulate(system, h0, inputs, steps=steps)

        if options['out']:
            write_trajectory(options['out'], trajectory)
            self.stdout.write(self.style.SUCCESS(f"Wrote {len(trajectory)} rows to {options['out']}"))
            return
        buffer = io.StringIO()
        write_trajectory(buffer, trajectory)
        self.stdout.write(buffer.getvalue(), ending='')
