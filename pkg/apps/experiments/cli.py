"""
Command-line entry point.

    python -m apps.experiments.cli train --config experiments/lag.ini
    python -m apps.experiments.cli simulate --system logistic --theta 4.0 --steps 3

Each subcommand is the management command of the same name (dashes become
underscores). Exit codes: 0 success, 1 validation or usage error, 2 runtime
error.
"""
import logging
import os
import sys
from typing import List, Optional

logger = logging.getLogger(__name__)

SUBCOMMANDS = {
    'train': 'Train a model from an experiment config',
    'predict': 'Forecast with a trained model directory',
    'simulate': 'Write the trajectory of a built-in map',
    'gradcheck': 'Run the finite-difference gradient suite',
    'export-attention': 'Export attention weights of a trained model',
    'benchmark': 'Run an acceptance experiment',
}
# subcommands that record ExperimentRun rows
DATABASE_COMMANDS = ('train',)


def usage() -> str:
    lines = ['usage: python -m apps.experiments.cli <subcommand> [options]', '', 'subcommands:']
    lines += [f'  {name:<18}{text}' for name, text in SUBCOMMANDS.items()]
    lines.append('')
    lines.append("Run '<subcommand> --help' for its options.")
    return '\n'.join(lines) + '\n'


def setup_django() -> None:
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    import django
    django.setup()


def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: arguments without the program name (default: sys.argv[1:])

    Returns:
        Process exit code
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ('-h', '--help'):
        sys.stderr.write(usage())
        return 0 if argv else 1
    subcommand, rest = argv[0], argv[1:]
    if subcommand not in SUBCOMMANDS:
        sys.stderr.write(f"unknown subcommand {subcommand!r}\n\n{usage()}")
        return 1

    setup_django()
    from django.core.management import call_command
    from django.core.management.base import CommandError

    name = subcommand.replace('-', '_')
    try:
        if name in DATABASE_COMMANDS:
            call_command('migrate', verbosity=0, interactive=False)
        call_command(name, *rest)
    except CommandError as e:
        sys.stderr.write(f'{subcommand}: {e}\n')
        return e.returncode
    except SystemExit as e:
        # --help exits through argparse
        return e.code if isinstance(e.code, int) else 1
    except Exception as e:
        logger.exception(f'{subcommand} failed')
        sys.stderr.write(f'{subcommand}: {type(e).__name__}: {e}\n')
        return 2
    return 0


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == '__main__':
    main()
