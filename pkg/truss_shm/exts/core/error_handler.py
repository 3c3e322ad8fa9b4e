import logging
import sys
from typing import Optional

from sentry_sdk import push_scope

from truss_shm.cli import Cli
from truss_shm.constants import EXIT_DATA, EXIT_NUMERICAL, EXIT_USAGE
from truss_shm.utils.exceptions import DataError, NumericalError, UsageError

log = logging.getLogger(__name__)


class CommandErrorHandler:
    """Maps every failure of a command onto a message and an exit code."""

    def __init__(self, cli: Cli):
        self.cli = cli

    def on_command_error(self, command: Optional[str], error: BaseException) -> int:
        """Report `error` raised while running `command`; return the process exit code."""
        log.debug(f"Error encountered: {type(error).__name__} - {error}, command: {command}")

        if isinstance(error, UsageError):
            if error.usage:
                sys.stderr.write(error.usage)
            log.error(str(error))
            if error.suggestion:
                log.error(f"Did you mean: {error.suggestion}")
            return EXIT_USAGE

        if isinstance(error, DataError):
            log.error(str(error))
            return EXIT_DATA

        if isinstance(error, NumericalError):
            log.error(f"Numerical failure: {error}")
            return EXIT_NUMERICAL

        with push_scope() as scope:
            scope.set_tag("command", command or "none")
            scope.set_extra("argv", sys.argv)
            log.exception(f"Unhandled command error: {error}", exc_info=error)
        return EXIT_NUMERICAL


def setup(cli: Cli) -> None:
    """Install the error handler."""
    cli.error_handler = CommandErrorHandler(cli)
