import argparse
import json
import logging
import sys
from pathlib import Path

from truss_shm.cli import ArgumentParser, Cli, Command, add_model_argument, add_seed_argument
from truss_shm.config import Config
from truss_shm.constants import DatabaseDefaults
from truss_shm.database import check_fingerprint, load_database, verify_database
from truss_shm.model import resolve_model
from truss_shm.utils.exceptions import DatabaseFormatError

log = logging.getLogger(__name__)


class VerifyDb(Command):
    """Check a database against its model and the modal invariants."""

    name = "verify-db"
    help = "re-solve a sample of database entries and check the file is consistent"

    def add_arguments(self, parser: ArgumentParser) -> None:
        """Database, model, sample fraction and seed."""
        parser.add_argument("--db", type=Path, required=True, help="database file written by gen-db")
        add_model_argument(parser)
        parser.add_argument(
            "--sample",
            type=float,
            default=DatabaseDefaults.verify_sample,
            help=f"fraction of entries to re-solve (default {DatabaseDefaults.verify_sample})",
        )
        add_seed_argument(parser)
        parser.add_argument("--force", action="store_true", help="accept a database built for another model")

    def run(self, args: argparse.Namespace, config: Config) -> None:
        """Print the verification summary; any problem is a data error."""
        db = load_database(args.db)
        model = resolve_model(config.model)
        check_fingerprint(db, model, force=args.force)

        summary = verify_database(db, model, sample=args.sample, seed=config.seed)
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
        if summary["problems"]:
            for problem in summary["problems"]:
                log.error(problem)
            raise DatabaseFormatError(f"{args.db} failed verification with {len(summary['problems'])} problem(s).")
        log.info(f"{args.db}: {summary['checked']} of {summary['entries']} entries verified")


def setup(cli: Cli) -> None:
    """Load the VerifyDb command."""
    cli.add_command(VerifyDb(cli))
