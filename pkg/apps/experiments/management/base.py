"""
Shared plumbing for the experiment commands: error translation to exit
codes and list-valued options.
"""
import logging

from django.core.management.base import BaseCommand, CommandError

from services.engine.errors import ConfigError, ContractError, DataError, EngineError

logger = logging.getLogger(__name__)

# Exit code 1: the request itself is invalid. Exit code 2: it failed while running.
VALIDATION_ERRORS = (ConfigError, ContractError, DataError, FileNotFoundError, KeyError)
RUNTIME_ERRORS = (EngineError, OSError)


def parse_floats(text: str) -> list:
    try:
        return [float(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise CommandError(f"expected a comma-separated list of numbers, got {text!r}", returncode=1)


def parse_ints(text: str) -> list:
    try:
        return [int(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise CommandError(f"expected a comma-separated list of integers, got {text!r}", returncode=1)


class ExperimentCommand(BaseCommand):
    """BaseCommand whose ``run`` errors leave with exit code 1 or 2."""

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except CommandError:
            raise
        except VALIDATION_ERRORS as e:
            message = e.args[0] if isinstance(e, KeyError) and e.args else str(e)
            logger.debug(f"{type(e).__name__}: {message}")
            raise CommandError(message, returncode=1)
        except RUNTIME_ERRORS as e:
            logger.error(f"{type(e).__name__}: {e}")
            raise CommandError(str(e), returncode=2)

    def run(self, **options):
        raise NotImplementedError
