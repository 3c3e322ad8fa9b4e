import logging
import math
from dataclasses import dataclass
from typing import Any, Optional

import arrow
import numpy as np

from truss_shm.database import Scenario, ScenarioDatabase, get_signature
from truss_shm.fem import ModalSignature
from truss_shm.firefly import FaParams, run
from truss_shm.utils import humanize_seconds
from truss_shm.utils.exceptions import DimensionMismatchError, InvalidParameterError

__all__ = (
    "Weights",
    "NoiseSpec",
    "Prediction",
    "objective",
    "add_noise",
    "encode",
    "decode",
    "search_dimension",
    "detect",
    "brute_force",
)

log = logging.getLogger(__name__)


class Weights:
    """
    Weighting factors of the frequency and mode-shape terms of the objective.

    `w_omega` holds one weight per mode, `w_phi` one per (mode, DOF) pair.
    A zero weight masks a DOF that is not measured.
    """

    __slots__ = ("w_omega", "w_phi")

    def __init__(self, w_omega: Any, w_phi: Any):
        self.w_omega = np.array(w_omega, dtype=float)
        self.w_phi = np.array(w_phi, dtype=float)
        if self.w_omega.ndim != 1 or self.w_phi.ndim != 2 or self.w_phi.shape[0] != self.w_omega.shape[0]:
            raise DimensionMismatchError(
                f"Weights need shapes (n_modes,) and (n_modes, n_dofs), "
                f"got {self.w_omega.shape} and {self.w_phi.shape}."
            )
        if np.any(self.w_omega < 0) or np.any(self.w_phi < 0):
            raise InvalidParameterError("Objective weights must be non-negative.")

    @classmethod
    def uniform(cls, n_modes: int, n_dofs: int) -> "Weights":
        """All weights 1."""
        return cls(np.ones(n_modes), np.ones((n_modes, n_dofs)))

    @classmethod
    def like(cls, signature: ModalSignature) -> "Weights":
        """Uniform weights shaped after `signature`."""
        return cls.uniform(signature.n_modes, signature.n_dofs)

    @property
    def shape(self) -> tuple[int, int]:
        """(n_modes, n_dofs) these weights apply to."""
        return self.w_phi.shape

    def __repr__(self) -> str:
        return f"Weights(n_modes={self.shape[0]}, n_dofs={self.shape[1]})"


@dataclass(frozen=True)
class NoiseSpec:
    """Relative noise amplitudes of the measured frequencies and mode-shape components."""

    n_omega: float = 0.0
    n_phi: float = 0.0

    def __post_init__(self):
        if not (self.n_omega >= 0 and self.n_phi >= 0):
            raise InvalidParameterError(f"Noise levels must be non-negative, got {self.n_omega} and {self.n_phi}.")

    @classmethod
    def uniform(cls, level: float) -> "NoiseSpec":
        """The same level on both channels."""
        return cls(level, level)

    @property
    def is_zero(self) -> bool:
        """True when this spec leaves a signature unchanged."""
        return self.n_omega == 0 and self.n_phi == 0


@dataclass(frozen=True)
class Prediction:
    """
    Outcome of a search.

    `runner_up_gap` is the objective of the best other scenario evaluated minus the best,
    or None when only one scenario was evaluated.
    """

    scenario: Scenario
    objective_value: float
    runner_up_gap: Optional[float]
    evaluations: int

    def to_json(self) -> dict[str, Any]:
        """Fields of the `detect` output document."""
        return {
            "scenario": str(self.scenario),
            "damaged": self.scenario.to_json(),
            "objective": self.objective_value,
            "runner_up_gap": self.runner_up_gap,
            "evaluations": self.evaluations,
        }


def _check_shapes(test: ModalSignature, candidate: ModalSignature, weights: Weights) -> None:
    if (test.n_modes, test.n_dofs) != (candidate.n_modes, candidate.n_dofs):
        raise DimensionMismatchError(
            f"Test signature has {test.n_modes} modes over {test.n_dofs} DOFs, "
            f"candidate {candidate.n_modes} over {candidate.n_dofs}."
        )
    if weights.shape != (test.n_modes, test.n_dofs):
        raise DimensionMismatchError(f"Weights of shape {weights.shape} do not fit the signatures.")


def objective(test: ModalSignature, candidate: ModalSignature, weights: Weights) -> float:
    """
    Weighted quadratic difference between a measured and a database signature.

    sum_j W_j (1 - omega_test_j / omega_cand_j)^2 + sum_j sum_i W_ji (phi_test_ij - phi_cand_ij)^2,
    where each candidate mode is first negated if that lowers its weighted difference
    (i.e. its weighted dot product with the test mode is negative).
    """
    _check_shapes(test, candidate, weights)
    if np.any(candidate.frequencies <= 0):
        raise InvalidParameterError("Candidate signature has a zero natural frequency.")

    ratio = 1.0 - test.frequencies / candidate.frequencies
    frequency_term = float(np.dot(weights.w_omega, ratio * ratio))

    w_phi = weights.w_phi.T
    dots = np.einsum("ij,ij,ij->j", w_phi, test.modes, candidate.modes)
    aligned = candidate.modes * np.where(dots < 0, -1.0, 1.0)
    difference = test.modes - aligned
    shape_term = float(np.sum(w_phi * difference * difference))
    return frequency_term + shape_term


def add_noise(signature: ModalSignature, spec: NoiseSpec, rng: np.random.Generator) -> ModalSignature:
    """
    Distort a signature the way a measurement would.

    Every frequency is scaled by (1 + u * n_omega), then every mode-shape component by
    (1 + u * n_phi), with an independent u ~ U(-1, 1) per value. Modes are not re-normalized.
    """
    if spec.is_zero:
        return signature
    omega_factors = 1.0 + rng.uniform(-1.0, 1.0, size=signature.frequencies.shape) * spec.n_omega
    phi_factors = 1.0 + rng.uniform(-1.0, 1.0, size=signature.modes.shape) * spec.n_phi
    return ModalSignature(signature.frequencies * omega_factors, signature.modes * phi_factors)


def search_dimension(db: ScenarioDatabase) -> int:
    """Length of a firefly position: a (bar, damage) coordinate pair per damaged-bar slot."""
    return 2 * db.meta.max_damaged_bars


def decode(position: Any, db: ScenarioDatabase) -> Scenario:
    """
    Map a point of [0, 1]^(2K) onto a database scenario.

    Slot k reads its bar from coordinate 2k and its damage level from 2k + 1; level 0
    leaves the slot empty. Coordinates outside [0, 1] are clamped.
    """
    position = np.clip(np.asarray(position, dtype=float), 0.0, 1.0)
    if position.shape != (search_dimension(db),):
        raise DimensionMismatchError(f"Position of shape {position.shape} does not fit {search_dimension(db)} slots.")

    n_bars = db.meta.n_bars
    levels = db.meta.levels
    pairs = []
    for b, v in position.reshape(-1, 2):
        level = math.floor(v * len(levels) + 0.5)
        if level == 0:
            continue
        pairs.append((min(math.floor(b * n_bars) + 1, n_bars), levels[level - 1]))
    return Scenario.of(pairs)


def encode(scenario: Scenario, db: ScenarioDatabase) -> np.ndarray:
    """A position that `decode` maps back onto `scenario`: the centre of each slot's cell."""
    meta = db.meta
    if scenario.n_damaged > meta.max_damaged_bars:
        raise InvalidParameterError(f"{scenario} does not fit in {meta.max_damaged_bars} slots.")
    levels = meta.levels
    position = np.zeros(search_dimension(db))
    for slot, (bar_id, percent) in enumerate(scenario.damaged):
        if percent not in levels:
            raise InvalidParameterError(f"{percent}% is not a level of the {meta.grid_step}% grid.")
        position[2 * slot] = (bar_id - 0.5) / meta.n_bars
        position[2 * slot + 1] = (levels.index(percent) + 1) / len(levels)
    return position


def _rank(values: dict[Scenario, float]) -> tuple[Scenario, float, Optional[float]]:
    """Best scenario (lowest value, then fewest damaged bars, then enumeration order) and the runner-up gap."""
    ordered = sorted(values.items(), key=lambda item: (item[1], item[0].sort_key))
    best, best_value = ordered[0]
    gap = ordered[1][1] - best_value if len(ordered) > 1 else None
    return best, best_value, gap


def detect(
    test: ModalSignature,
    db: ScenarioDatabase,
    weights: Optional[Weights] = None,
    fa_params: Optional[FaParams] = None,
) -> Prediction:
    """
    Search `db` for the scenario whose signature best matches `test` with the firefly algorithm.

    Fireflies live in [0, 1]^(2K) and are decoded to scenarios; the box of `fa_params` is replaced
    by that unit box. Objective values are memoised per scenario, and the returned scenario is the
    best of every scenario the swarm visited.
    """
    weights = weights or Weights.like(test)
    _check_shapes(test, db.healthy, weights)
    dim = search_dimension(db)
    params = (fa_params or FaParams.unit_box(dim)).replace(bounds=((0.0, 1.0),) * dim)

    values: dict[Scenario, float] = {}

    def evaluate(position: np.ndarray) -> float:
        scenario = decode(position, db)
        value = values.get(scenario)
        if value is None:
            value = values[scenario] = objective(test, get_signature(db, scenario), weights)
        return value

    started = arrow.utcnow()
    result = run(evaluate, params)
    scenario, value, gap = _rank(values)
    log.debug(
        f"Detected {scenario} (objective {value:.6e}) after {result.evaluations} evaluations "
        f"over {len(values)} scenarios in {humanize_seconds((arrow.utcnow() - started).total_seconds())}"
    )
    return Prediction(scenario, value, gap, result.evaluations)


def brute_force(
    test: ModalSignature,
    db: ScenarioDatabase,
    weights: Optional[Weights] = None,
) -> Prediction:
    """Exact minimiser of the objective over every database entry, with the tie-breaking of `detect`."""
    weights = weights or Weights.like(test)
    values = {scenario: objective(test, signature, weights) for scenario, signature in db.entries.items()}
    scenario, value, gap = _rank(values)
    log.trace(f"Exhaustive search picked {scenario} (objective {value:.6e})")
    return Prediction(scenario, value, gap, len(values))
