from typing import NamedTuple

import yaml

from truss_shm.constants import EXPERIMENTS_PATH
from truss_shm.detection import NoiseSpec

__all__ = (
    "PRESETS",
    "NoiseSet",
    "NOISE_SETS",
    "MODE_COUNTS",
    "TRIALS_PER_CELL",
    "SWEEP_LEVELS",
    "SWEEP_ITERATIONS",
    "FactorialPreset",
    "FACTORIAL",
)

with EXPERIMENTS_PATH.open("r", encoding="utf8") as f:
    PRESETS = yaml.load(f, Loader=yaml.FullLoader)


class NoiseSet(NamedTuple):
    """A named measurement-noise condition of the mode-count study."""

    name: str
    spec: NoiseSpec


class FactorialPreset(NamedTuple):
    """Factor levels, constants and test-case noise of the two-level factorial design."""

    replicates: int
    levels: dict[str, tuple]
    fixed: dict[str, float]
    noise: NoiseSpec
    significance: float


NOISE_SETS = tuple(
    NoiseSet(name, NoiseSpec(float(n_omega), float(n_phi)))
    for name, (n_omega, n_phi) in PRESETS["noise_sets"].items()
)

MODE_COUNTS = tuple(int(count) for count in PRESETS["mode_counts"])
TRIALS_PER_CELL = int(PRESETS["trials_per_cell"])
SWEEP_LEVELS = tuple(float(level) for level in PRESETS["sweep_levels"])
SWEEP_ITERATIONS = int(PRESETS["sweep_iterations"])

FACTORIAL = FactorialPreset(
    replicates=int(PRESETS["factorial"]["replicates"]),
    levels={name: tuple(values) for name, values in PRESETS["factorial"]["levels"].items()},
    fixed=dict(PRESETS["factorial"]["fixed"]),
    noise=NoiseSpec(*(float(level) for level in PRESETS["factorial"]["noise"])),
    significance=float(PRESETS["factorial"]["significance"]),
)
