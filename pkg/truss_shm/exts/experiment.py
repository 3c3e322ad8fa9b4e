import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, Optional

from truss_shm.cli import (
    ArgumentParser,
    Cli,
    Command,
    add_fa_arguments,
    add_model_argument,
    add_seed_argument,
    add_threads_argument,
)
from truss_shm.config import Config
from truss_shm.database import ScenarioDatabase, check_fingerprint, load_database
from truss_shm.detection import search_dimension
from truss_shm.experiments import database_family, factorial_2k, run_mode_count_study, run_noise_sweep
from truss_shm.experiments.accuracy import CHANNELS, SEARCHES
from truss_shm.experiments.presets import FACTORIAL, MODE_COUNTS, SWEEP_ITERATIONS, SWEEP_LEVELS, TRIALS_PER_CELL
from truss_shm.experiments.reports import (
    accuracy_rows,
    factorial_rows,
    mode_count_rows,
    pareto_rows,
    responses_rows,
    sweep_rows,
)
from truss_shm.model import resolve_model
from truss_shm.utils import format_number, write_csv
from truss_shm.utils.exceptions import UsageError

log = logging.getLogger(__name__)

EXPERIMENTS = ("mode-count", "noise-sweep", "location-only", "factorial")

# (file name, rows, extra header lines) written under --plot-data
PlotFiles = list[tuple[str, list[list[Any]], Sequence[str]]]
DEFAULT_LEVELS = ",".join(f"{100 * level:g}" for level in SWEEP_LEVELS)


def parse_levels(text: str) -> tuple[float, ...]:
    """Comma-separated noise levels in percent, e.g. `0,4,7.5`, as fractions."""
    try:
        levels = tuple(float(item) / 100 for item in text.split(",") if item.strip())
    except ValueError:
        raise UsageError(f"--levels must be comma-separated percentages, got {text!r}.") from None
    if not levels or any(level < 0 for level in levels):
        raise UsageError(f"--levels must list non-negative percentages, got {text!r}.")
    return levels


def parse_factor(text: str) -> tuple[str, tuple[float, float]]:
    """`NAME=LOW,HIGH`, e.g. `n=25,40`: one factor of the two-level design."""
    name, _, values = text.partition("=")
    try:
        low, high = (float(value) for value in values.split(","))
    except ValueError:
        raise UsageError(f"--factor must look like NAME=LOW,HIGH, got {text!r}.") from None
    return name.strip(), (low, high)


class Experiment(Command):
    """Reproduce one of the accuracy or parameter studies."""

    name = "experiment"
    help = "run an accuracy study or the factorial analysis of the firefly parameters"

    def add_arguments(self, parser: ArgumentParser) -> None:
        """Study name, database, study sizes and outputs."""
        parser.add_argument("study", choices=EXPERIMENTS, help="which study to run")
        parser.add_argument("--db", type=Path, required=True, help="database file written by gen-db")
        add_model_argument(parser)
        add_seed_argument(parser)
        parser.add_argument("--out", type=Path, default=None, help="report CSV (default: standard output)")
        parser.add_argument("--plot-data", type=Path, default=None, metavar="DIR", help="also write plot-ready CSVs")
        parser.add_argument("--force", action="store_true", help="accept a database built for another model")
        add_threads_argument(parser)

        sizes = parser.add_argument_group("study sizes")
        sizes.add_argument("--trials", type=int, default=TRIALS_PER_CELL, help="trials per mode-count cell")
        sizes.add_argument("--iterations", type=int, default=SWEEP_ITERATIONS, help="trials per sweep level")
        sizes.add_argument(
            "--levels",
            type=parse_levels,
            default=SWEEP_LEVELS,
            help=f"sweep noise levels in percent (default: {DEFAULT_LEVELS})",
        )
        sizes.add_argument("--channel", choices=CHANNELS, default="both", help="where sweep noise applies")
        sizes.add_argument("--search", choices=SEARCHES, default="firefly", help="search back-end of the trials")
        sizes.add_argument("--replicates", type=int, default=FACTORIAL.replicates, help="factorial replicates")
        sizes.add_argument(
            "--factor",
            type=parse_factor,
            action="append",
            default=None,
            metavar="NAME=LOW,HIGH",
            help="factor levels replacing the preset design (repeatable)",
        )
        add_fa_arguments(parser)

    def run(self, args: argparse.Namespace, config: Config) -> None:
        """Run the chosen study and write its report."""
        db = load_database(args.db)
        check_fingerprint(db, resolve_model(config.model), force=args.force)

        studies: dict[str, Callable[[argparse.Namespace, Config, ScenarioDatabase], tuple]] = {
            "mode-count": self._mode_count,
            "noise-sweep": self._sweep,
            "location-only": self._sweep,
            "factorial": self._factorial,
        }
        settings, rows, plot_files = studies[args.study](args, config, db)

        header = {**config.effective(), "experiment": {"study": args.study, **settings}}
        text = write_csv(rows, args.out, header, config.seed)
        if args.out is None:
            sys.stdout.write(text)
        else:
            log.info(f"Wrote {args.study} report to {args.out}")

        if args.plot_data is not None:
            for file_name, plot_rows, extra_header in plot_files:
                write_csv(plot_rows, args.plot_data / file_name, header, config.seed, extra_header)
            log.info(f"Wrote plot data to {args.plot_data}")

    @staticmethod
    def _mode_count(
        args: argparse.Namespace, config: Config, db: ScenarioDatabase
    ) -> tuple[dict[str, Any], list[list[Any]], PlotFiles]:
        family = database_family(db, MODE_COUNTS)
        report = run_mode_count_study(
            family,
            trials_per_cell=args.trials,
            seed=config.seed,
            fa_params=config.fa_params(search_dimension(db)),
            search=args.search,
            n_jobs=config.threads,
        )
        rows = mode_count_rows(report)
        settings = {"trials": args.trials, "search": args.search}
        return settings, rows, [("mode_count.csv", rows, ())]

    @staticmethod
    def _sweep(
        args: argparse.Namespace, config: Config, db: ScenarioDatabase
    ) -> tuple[dict[str, Any], list[list[Any]], PlotFiles]:
        report = run_noise_sweep(
            db,
            noise_levels=args.levels,
            iterations=args.iterations,
            seed=config.seed,
            channel=args.channel,
            fa_params=config.fa_params(search_dimension(db)),
            search=args.search,
            n_jobs=config.threads,
            scoring="location" if args.study == "location-only" else "combined",
        )
        settings = {
            "levels": list(args.levels),
            "iterations": args.iterations,
            "channel": args.channel,
            "search": args.search,
        }
        return settings, sweep_rows(report), [("accuracy.csv", accuracy_rows(report), ())]

    @staticmethod
    def _factorial(
        args: argparse.Namespace, config: Config, db: ScenarioDatabase
    ) -> tuple[dict[str, Any], list[list[Any]], PlotFiles]:
        # --fa-* flags adjust the constants of the design, --factor its levels
        fixed: dict[str, Optional[float]] = {key: getattr(args, f"fa_{key}") for key in FACTORIAL.fixed}
        fixed = {key: value for key, value in fixed.items() if value is not None}
        levels = dict(args.factor) if args.factor else dict(FACTORIAL.levels)
        run = factorial_2k(
            db, levels=levels, replicates=args.replicates, seed=config.seed, fixed=fixed, n_jobs=config.threads
        )

        for name in run.table.significant_terms:
            log.info(f"Significant term at {run.table.significance}: {name}")
        settings = {
            "replicates": args.replicates,
            "levels": {name: list(pair) for name, pair in levels.items()},
            "fixed": {**FACTORIAL.fixed, **fixed},
        }
        plot_files = [
            ("pareto.csv", pareto_rows(run.table), (f"# t_crit={format_number(run.table.t_crit)}",)),
            ("responses.csv", responses_rows(run), ()),
        ]
        return settings, factorial_rows(run.table), plot_files


def setup(cli: Cli) -> None:
    """Load the Experiment command."""
    cli.add_command(Experiment(cli))
