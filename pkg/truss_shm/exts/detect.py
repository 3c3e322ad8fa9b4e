import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

import arrow

from truss_shm.cli import ArgumentParser, Cli, Command, add_fa_arguments, add_model_argument, add_seed_argument
from truss_shm.config import Config
from truss_shm.constants import Client
from truss_shm.database import Scenario, check_fingerprint, get_signature, load_database, load_signature
from truss_shm.detection import NoiseSpec, add_noise, brute_force, detect, search_dimension
from truss_shm.model import resolve_model
from truss_shm.utils import config_hash, humanize_seconds
from truss_shm.utils.randomization import make_rng

log = logging.getLogger(__name__)

# Sub-stream of the root seed that perturbs the test signature; the swarm uses the root seed itself
NOISE_STREAM = 1


class Detect(Command):
    """Locate and size the damage of one test structure."""

    name = "detect"
    help = "find the database scenario whose signature best matches a test signature"

    def add_arguments(self, parser: ArgumentParser) -> None:
        """Database, test case, noise, search options and output."""
        parser.add_argument("--db", type=Path, required=True, help="database file written by gen-db")
        add_model_argument(parser)
        test = parser.add_mutually_exclusive_group(required=True)
        test.add_argument("--test", type=Path, help="measured signature JSON")
        test.add_argument("--scenario", help="take the test signature from the database, e.g. 3:30,8:85")
        parser.add_argument("--noise-omega", type=float, default=0.0, help="relative frequency noise")
        parser.add_argument("--noise-phi", type=float, default=0.0, help="relative mode-shape noise")
        add_seed_argument(parser)
        parser.add_argument("--brute-force", action="store_true", help="evaluate every entry instead of searching")
        parser.add_argument("--force", action="store_true", help="accept a database built for another model")
        parser.add_argument("--timing", action="store_true", help="include the wall time in the output")
        parser.add_argument("--out", type=Path, default=None, help="JSON file (default: standard output)")
        add_fa_arguments(parser)

    def run(self, args: argparse.Namespace, config: Config) -> None:
        """Run the search and write the prediction."""
        db = load_database(args.db)
        check_fingerprint(db, resolve_model(config.model), force=args.force)

        if args.test is not None:
            test = load_signature(args.test)
            source = str(args.test)
        else:
            scenario = Scenario.parse(args.scenario)
            test = get_signature(db, scenario)
            source = str(scenario)
        noise = NoiseSpec(args.noise_omega, args.noise_phi)
        test = add_noise(test, noise, make_rng(config.seed, NOISE_STREAM))

        started = arrow.utcnow()
        if args.brute_force:
            prediction = brute_force(test, db)
        else:
            prediction = detect(test, db, fa_params=config.fa_params(search_dimension(db)))
        elapsed = (arrow.utcnow() - started).total_seconds()
        log.info(f"{source}: detected {prediction.scenario} in {humanize_seconds(elapsed)}")

        effective = config.effective()
        document: dict[str, Any] = {
            "generator": f"{Client.name} {Client.version}",
            "config_hash": config_hash(effective),
            "config": effective,
            "seed": config.seed,
            "test": source,
            "search": "brute-force" if args.brute_force else "firefly",
            "noise": {"omega": noise.n_omega, "phi": noise.n_phi},
            **prediction.to_json(),
        }
        if args.timing:
            document["wall_time_s"] = elapsed

        text = json.dumps(document, indent=2) + "\n"
        if args.out is None:
            sys.stdout.write(text)
        else:
            with args.out.open("w", encoding="utf-8", newline="\n") as f:
                f.write(text)


def setup(cli: Cli) -> None:
    """Load the Detect command."""
    cli.add_command(Detect(cli))
