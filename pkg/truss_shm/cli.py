import argparse
import importlib
import inspect
import logging
import re
import sys
from collections.abc import Sequence
from typing import Any, Optional

from truss_shm import log as logging_setup
from truss_shm.config import DATABASE_KEYS, FA_KEYS, Config, load_config
from truss_shm.constants import BUILTIN_MODEL, EXIT_NUMERICAL, EXIT_OK, Client
from truss_shm.utils import suggest
from truss_shm.utils.exceptions import UsageError
from truss_shm.utils.extensions import unqualify, walk_extensions

log = logging.getLogger(__name__)

__all__ = ("ArgumentParser", "Command", "Cli", "main")

# Flag spelling of each firefly and database setting
FA_FLAGS = {
    "n": "--fa-n",
    "max_generation": "--fa-max-generation",
    "alpha0": "--fa-alpha0",
    "beta0": "--fa-beta0",
    "gamma": "--fa-gamma",
    "delta": "--fa-delta",
    "m_exp": "--fa-m-exp",
}
DATABASE_FLAGS = {
    "max_damaged_bars": "--max-bars",
    "grid_step": "--step",
    "n_modes": "--modes",
}


class ArgumentParser(argparse.ArgumentParser):
    """An argument parser that raises `UsageError` instead of exiting."""

    def error(self, message: str) -> None:
        """Turn an argparse failure into a `UsageError`, with a suggestion for a mistyped choice."""
        suggestion = None
        if match := re.search(r"invalid choice: '([^']*)'", message):
            choices = [choice for action in self._actions if action.choices for choice in action.choices]
            suggestion = suggest(match[1], choices)
        raise UsageError(f"{self.prog}: {message}", suggestion, self.format_usage())


class Command:
    """
    A subcommand of the command-line tool.

    Subclasses set `name` and `help`, declare their flags in `add_arguments`
    and do their work in `run`, which returns the exit code (None means success).
    """

    name: str = ""
    help: str = ""

    def __init__(self, cli: "Cli"):
        self.cli = cli

    def add_arguments(self, parser: ArgumentParser) -> None:
        """Declare the flags of this command."""

    def run(self, args: argparse.Namespace, config: Config) -> Optional[int]:
        """Execute the command."""
        raise NotImplementedError


def add_model_argument(parser: ArgumentParser) -> None:
    """`--model`: a model file or the built-in benchmark."""
    parser.add_argument(
        "--model", default=None, help=f"model JSON file, or {BUILTIN_MODEL!r} for the benchmark truss (default)"
    )


def add_seed_argument(parser: ArgumentParser) -> None:
    """`--seed`: root of every random stream of the command."""
    parser.add_argument("--seed", type=int, default=None, help="root random seed (default 0)")


def add_threads_argument(parser: ArgumentParser) -> None:
    """`--threads`: worker count, overriding TRUSS_SHM_THREADS."""
    parser.add_argument("--threads", type=int, default=None, help="worker processes (default: all CPUs)")


def add_fa_arguments(parser: ArgumentParser) -> None:
    """One `--fa-*` flag per firefly parameter."""
    group = parser.add_argument_group("firefly parameters")
    for key, flag in FA_FLAGS.items():
        group.add_argument(flag, dest=f"fa_{key}", type=FA_KEYS[key], default=None, metavar=key.upper())


def add_database_arguments(parser: ArgumentParser, keys: Sequence[str] = tuple(DATABASE_FLAGS)) -> None:
    """Flags for the damage-grid settings named in `keys`."""
    for key in keys:
        parser.add_argument(DATABASE_FLAGS[key], dest=f"db_{key}", type=DATABASE_KEYS[key], default=None)


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """The configuration layer set on the command line."""
    return {
        "model": getattr(args, "model", None),
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", None),
        "fa": {key: getattr(args, f"fa_{key}", None) for key in FA_KEYS},
        "database": {key: getattr(args, f"db_{key}", None) for key in DATABASE_KEYS},
    }


class Cli:
    """
    The command host.

    Commands are contributed by the modules of `truss_shm.exts` through their `setup(cli)`
    function; the error handler extension maps failures onto exit codes.
    """

    name = Client.name

    def __init__(self):
        self.parser = ArgumentParser(
            prog=self.name,
            description="Damage detection in planar trusses from modal signatures.",
        )
        self.parser.add_argument("--version", action="version", version=f"%(prog)s {Client.version}")
        self.parser.add_argument("--config", default=None, help="JSON configuration file")
        self.parser.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics (repeatable)")
        self.parser.add_argument("-q", "--quiet", action="count", default=0, help="only warnings and errors")
        self.subparsers = self.parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=ArgumentParser)
        self.commands: dict[str, Command] = {}
        self.extensions: list[str] = []
        self.error_handler = None

    def add_command(self, command: Command) -> ArgumentParser:
        """Register `command` as a subcommand and let it declare its flags."""
        if command.name in self.commands:
            raise ValueError(f"Command {command.name!r} is already registered.")
        parser = self.subparsers.add_parser(command.name, help=command.help, description=command.help)
        command.add_arguments(parser)
        parser.set_defaults(handler=command)
        self.commands[command.name] = command
        log.trace(f"Command loaded: {command.name}")
        return parser

    def load_extension(self, name: str) -> None:
        """Import the extension module `name` and call its `setup`."""
        module = importlib.import_module(name)
        setup = getattr(module, "setup", None)
        if not inspect.isfunction(setup):
            raise ImportError(f"Extension {name!r} has no setup function.", name=name)
        setup(self)
        self.extensions.append(name)
        log.trace(f"Extension loaded: {unqualify(name)}")

    def on_command_error(self, command: Optional[str], error: BaseException) -> int:
        """Report `error` and return the exit code of the process."""
        if self.error_handler is not None:
            return self.error_handler.on_command_error(command, error)
        log.exception(f"Unhandled error in {command}", exc_info=error)
        return getattr(error, "exit_code", EXIT_NUMERICAL)

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Parse `argv`, run the chosen command and return its exit code."""
        argv = list(sys.argv[1:] if argv is None else argv)
        command = None
        try:
            try:
                args = self.parser.parse_args(argv)
            except SystemExit as exit_:
                # --help and --version
                return exit_.code or EXIT_OK

            if args.verbose or args.quiet:
                logging_setup.setup(args.verbose - args.quiet)
            command = args.command
            if command is None:
                raise UsageError("No command given.", usage=self.parser.format_usage())

            config = load_config(args.config, overrides_from_args(args))
            return args.handler.run(args, config) or EXIT_OK
        except Exception as error:
            return self.on_command_error(command, error)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point: load every extension and run the command line."""
    cli = Cli()
    for extension in walk_extensions():
        cli.load_extension(extension)
    return cli.run(argv)
