import logging
import os
from os import environ
from pathlib import Path
from typing import NamedTuple

__all__ = (
    "Client",
    "Logging",
    "FireflyDefaults",
    "DatabaseDefaults",
    "Solver",
    "Parallelism",
    "Grid",
    "RESOURCES",
    "BENCHMARK_MODEL_PATH",
    "EXPERIMENTS_PATH",
    "BUILTIN_MODEL",
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_DATA",
    "EXIT_NUMERICAL",
)

log = logging.getLogger(__name__)


RESOURCES = Path(__file__).parent / "resources"
BENCHMARK_MODEL_PATH = RESOURCES / "benchmark_truss.json"
EXPERIMENTS_PATH = RESOURCES / "experiments.yaml"

# Value of `--model` selecting the bundled benchmark truss
BUILTIN_MODEL = "builtin"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _env_int(name: str, default: int) -> int:
    """Read an integer environment variable, falling back to `default` when unset or blank."""
    raw = environ.get(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        log.warning(f"Ignoring non-integer value {raw!r} of {name}; using {default}.")
        return default


class Client(NamedTuple):
    name = "truss-shm"
    version = "0.1.0"
    debug = environ.get("TRUSS_SHM_DEBUG", "false").lower() == "true"
    sentry_dsn = environ.get("TRUSS_SHM_SENTRY_DSN")


class Logging(NamedTuple):
    debug = Client.debug
    file_logs = environ.get("TRUSS_SHM_FILE_LOGS", "false").lower() == "true"
    file_path = environ.get("TRUSS_SHM_LOG_FILE", "logs/truss-shm.log")
    trace_loggers = environ.get("TRUSS_SHM_TRACE_LOGGERS")


class FireflyDefaults(NamedTuple):
    n = 40
    max_generation = 2500
    alpha0 = 0.2
    beta0 = 1.0
    gamma = 1.0
    delta = 0.97
    m_exp = 2.0


class DatabaseDefaults(NamedTuple):
    max_damaged_bars = 2
    grid_step = 5
    n_modes = 8
    # Fraction of entries re-solved by `verify-db`
    verify_sample = 0.01


class Grid(NamedTuple):
    # Damage percentages live on range(min_percent, max_percent + 1, step)
    min_percent = 5
    max_percent = 95


class Solver(NamedTuple):
    max_sweeps = 100
    # Off-diagonal Frobenius norm relative to the full norm
    tolerance = 1e-12
    # Smallest admissible pivot of chol(K), relative to the largest diagonal entry of K
    mechanism_tolerance = 1e-12
    residual_tolerance = 1e-8
    normalization_tolerance = 1e-8


class Parallelism(NamedTuple):
    threads = _env_int("TRUSS_SHM_THREADS", os.cpu_count() or 1)
