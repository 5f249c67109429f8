"""
Run the finite-difference gradient suite.
Usage: python manage.py gradcheck [--module sequence] [--seeds 20]
"""
from django.conf import settings
from django.core.management.base import CommandError

from apps.experiments.management.base import ExperimentCommand
from apps.experiments.services.gradcheck_suite import MODULES, run_suite


class Command(ExperimentCommand):
    help = 'Checks every differentiable operation against central finite differences'

    def add_arguments(self, parser):
        parser.add_argument('--module', action='append', choices=list(MODULES), help='Repeatable; default: all')
        parser.add_argument('--seeds', type=int, default=20)

    def run(self, **options):
        engine = settings.DIFFERENTIABLE_ENGINE
        results = run_suite(
            options['module'],
            seeds=options['seeds'],
            step=engine['GRADCHECK_STEP'],
            tol=engine['GRADCHECK_TOL'],
            loose_tol=engine['GRADCHECK_TOL_PLASTIC'],
        )
        for result in results:
            line = f"{result.module:<12} {len(result.reports):>4} checks  max rel error {result.max_rel_error:.3e}"
            self.stdout.write(self.style.SUCCESS(line) if result.passed else self.style.ERROR(line))
        failed = [result.module for result in results if not result.passed]
        if failed:
            raise CommandError(f"gradient check failed for: {', '.join(failed)}", returncode=2)
        self.stdout.write(self.style.SUCCESS('All gradient checks passed'))
