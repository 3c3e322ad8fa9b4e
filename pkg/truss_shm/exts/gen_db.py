import argparse
import logging
from pathlib import Path

import arrow

from truss_shm.cli import (
    ArgumentParser,
    Cli,
    Command,
    add_database_arguments,
    add_model_argument,
    add_threads_argument,
)
from truss_shm.config import Config
from truss_shm.database import build_database, save_database
from truss_shm.model import resolve_model
from truss_shm.utils import config_hash, humanize_seconds

log = logging.getLogger(__name__)


class GenDb(Command):
    """Precompute the signature of every scenario of the damage grid."""

    name = "gen-db"
    help = "build a damage-scenario database"

    def add_arguments(self, parser: ArgumentParser) -> None:
        """Model, grid, mode count, output file and worker count."""
        add_model_argument(parser)
        add_database_arguments(parser)
        parser.add_argument("--out", type=Path, required=True, help="database file to write")
        add_threads_argument(parser)

    def run(self, args: argparse.Namespace, config: Config) -> None:
        """Build and save the database."""
        started = arrow.utcnow()
        model = resolve_model(config.model)
        db = build_database(
            model,
            max_damaged_bars=config.database["max_damaged_bars"],
            grid_step=config.database["grid_step"],
            n_modes=config.database["n_modes"],
            n_jobs=config.threads,
            config_hash=config_hash(config.effective()),
            seed=config.seed,
        )
        save_database(db, args.out)
        elapsed = humanize_seconds((arrow.utcnow() - started).total_seconds())
        log.info(f"Wrote {len(db)} scenarios to {args.out} in {elapsed}")


def setup(cli: Cli) -> None:
    """Load the GenDb command."""
    cli.add_command(GenDb(cli))
