import argparse
import logging
import sys
from pathlib import Path

from truss_shm.cli import ArgumentParser, Cli, Command, add_database_arguments, add_model_argument
from truss_shm.config import Config
from truss_shm.database import Scenario
from truss_shm.fem import DofMap, modal_signature
from truss_shm.model import apply_damage, dump_model, resolve_model
from truss_shm.utils import write_csv

log = logging.getLogger(__name__)


class Modal(Command):
    """Natural frequencies and mass-normalized mode shapes of a structure."""

    name = "modal"
    help = "print the modal signature of a (possibly damaged) truss as CSV"

    def add_arguments(self, parser: ArgumentParser) -> None:
        """Model, mode count, optional damage and outputs."""
        add_model_argument(parser)
        add_database_arguments(parser, ("n_modes",))
        parser.add_argument(
            "--scenario", default=None, help="damage as `bar:percent[,bar:percent...]`, e.g. 3:30,8:85"
        )
        parser.add_argument("--out", type=Path, default=None, help="CSV file (default: standard output)")
        parser.add_argument("--export-model", type=Path, default=None, help="also write the model file used")

    def run(self, args: argparse.Namespace, config: Config) -> None:
        """Solve and print the signature."""
        model = resolve_model(config.model)
        scenario = Scenario.parse(args.scenario) if args.scenario else Scenario()
        signature = modal_signature(apply_damage(model, scenario.damage_state()), config.database["n_modes"])
        if args.export_model is not None:
            dump_model(model, args.export_model)

        rows = [["mode", "omega_rad_s", "freq_hz", *(f"phi_{dof}" for dof in range(1, signature.n_dofs + 1))]]
        for j in range(signature.n_modes):
            rows.append([j + 1, signature.frequencies[j], signature.frequencies_hz[j], *signature.modes[:, j]])

        # phi_k is the k-th free DOF
        dofs = "# dofs " + " ".join(DofMap(model).labels())
        header = {**config.effective(), "scenario": str(scenario)}
        text = write_csv(rows, args.out, header, config.seed, extra_header=(dofs,))
        if args.out is None:
            sys.stdout.write(text)
        log.info(f"{scenario}: lowest frequency {signature.frequencies_hz[0]:.3f} Hz")


def setup(cli: Cli) -> None:
    """Load the Modal command."""
    cli.add_command(Modal(cli))
