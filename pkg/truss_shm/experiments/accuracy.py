"""
Accuracy studies: how often detection recovers a randomly drawn damage scenario.

Every trial owns its random sub-streams, keyed by the trial's coordinates in the study,
so the outcome of a trial does not depend on which worker runs it or in which order.
"""

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

import arrow
from joblib import Parallel, delayed

from truss_shm.constants import Parallelism
from truss_shm.database import Scenario, ScenarioDatabase, get_signature, truncate_database
from truss_shm.detection import NoiseSpec, Prediction, add_noise, brute_force, detect
from truss_shm.experiments.presets import (
    MODE_COUNTS,
    NOISE_SETS,
    SWEEP_ITERATIONS,
    SWEEP_LEVELS,
    TRIALS_PER_CELL,
    NoiseSet,
)
from truss_shm.firefly import FaParams
from truss_shm.utils import chunked, humanize_seconds
from truss_shm.utils.exceptions import InvalidParameterError, UsageError
from truss_shm.utils.randomization import RandomStream, make_rng

__all__ = (
    "SEARCHES",
    "CHANNELS",
    "Trial",
    "TrialRecord",
    "AccuracyRow",
    "AccuracyReport",
    "score",
    "run_trials",
    "database_family",
    "run_mode_count_study",
    "run_noise_sweep",
    "run_location_only",
)

log = logging.getLogger(__name__)

SEARCHES = ("firefly", "brute-force")
CHANNELS = ("both", "omega", "phi")

# Sub-stream keys: which true scenario, which noise, which swarm
_SCENARIO_STREAM, _NOISE_STREAM, _SEARCH_STREAM = 0, 1, 2


@dataclass(frozen=True)
class Trial:
    """
    One detection attempt of a study.

    `keys` locate the trial in the study and select its random sub-streams;
    `n_modes` picks the database of the family the trial runs against.
    """

    condition: tuple[tuple[str, Any], ...]
    keys: tuple[int, ...]
    noise: NoiseSpec
    n_modes: int


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one trial together with every seed needed to replay it."""

    condition: tuple[tuple[str, Any], ...]
    iteration: int
    scenario_seed: int
    noise_seed: int
    search_seed: int
    true_scenario: Scenario
    predicted: Scenario
    objective: float
    location: bool
    magnitude: bool
    near: bool

    @property
    def correct(self) -> bool:
        """Location and magnitude both right."""
        return self.predicted == self.true_scenario


def score(true: Scenario, predicted: Scenario, grid_step: int) -> tuple[bool, bool, bool]:
    """
    Grade a prediction: (location, magnitude, near).

    Location is right when the same bars are reported damaged. Magnitude additionally needs
    every damaged bar at its exact grid level. Near requires the right location with every
    percentage within one grid step.
    """
    location = true.bars == predicted.bars
    magnitude = location and true.percents == predicted.percents
    near = location and all(abs(a - b) <= grid_step for a, b in zip(true.percents, predicted.percents))
    return location, magnitude, near


@dataclass(frozen=True)
class AccuracyRow:
    """Counts of correct trials under one condition; accuracies are exact fractions."""

    condition: tuple[tuple[str, Any], ...]
    trials: int
    location: int
    magnitude: int
    near: int
    combined: int

    def _fraction(self, count: int) -> Fraction:
        return Fraction(count, self.trials) if self.trials else Fraction(0)

    @property
    def loc_acc(self) -> Fraction:
        """Share of trials with the right damaged bars."""
        return self._fraction(self.location)

    @property
    def mag_acc(self) -> Fraction:
        """Share of trials with the right damage magnitudes."""
        return self._fraction(self.magnitude)

    @property
    def near_acc(self) -> Fraction:
        """Share of trials within one grid step at the right location."""
        return self._fraction(self.near)

    @property
    def combined_acc(self) -> Fraction:
        """Share of trials recovering the exact scenario."""
        return self._fraction(self.combined)


@dataclass(frozen=True)
class AccuracyReport:
    """
    Result of an accuracy study.

    `scoring` is "combined" or "location" and selects what `accuracy` reads.
    """

    study: str
    seed: int
    rows: tuple[AccuracyRow, ...]
    records: tuple[TrialRecord, ...] = field(repr=False)
    scoring: str = "combined"

    def accuracy(self, row: AccuracyRow) -> Fraction:
        """The headline accuracy of `row` under this report's scoring."""
        return row.loc_acc if self.scoring == "location" else row.combined_acc

    def row(self, **condition: Any) -> AccuracyRow:
        """The row whose condition matches every given key."""
        for candidate in self.rows:
            values = dict(candidate.condition)
            if all(values.get(key) == value for key, value in condition.items()):
                return candidate
        raise KeyError(condition)


def _search(test: Any, db: ScenarioDatabase, fa_params: FaParams, search: str) -> Prediction:
    if search == "brute-force":
        return brute_force(test, db)
    return detect(test, db, fa_params=fa_params)


def _run_chunk(
    family: Mapping[int, ScenarioDatabase],
    trials: Sequence[Trial],
    seed: int,
    fa_params: FaParams,
    search: str,
) -> list[TrialRecord]:
    stream = RandomStream(seed)
    records = []
    for trial in trials:
        db = family[trial.n_modes]
        candidates = db.damaged_scenarios()
        # The recorded seeds alone replay the trial
        scenario_seed, noise_seed, search_seed = (
            stream.seed_for(key, *trial.keys) for key in (_SCENARIO_STREAM, _NOISE_STREAM, _SEARCH_STREAM)
        )
        true = candidates[int(make_rng(scenario_seed).integers(len(candidates)))]

        test = add_noise(get_signature(db, true), trial.noise, make_rng(noise_seed))
        prediction = _search(test, db, fa_params.replace(seed=search_seed), search)

        location, magnitude, near = score(true, prediction.scenario, db.meta.grid_step)
        records.append(TrialRecord(
            condition=trial.condition,
            iteration=trial.keys[-1],
            scenario_seed=scenario_seed,
            noise_seed=noise_seed,
            search_seed=search_seed,
            true_scenario=true,
            predicted=prediction.scenario,
            objective=prediction.objective_value,
            location=location,
            magnitude=magnitude,
            near=near,
        ))
        log.trace(f"Trial {trial.keys}: {true} -> {prediction.scenario}")
    return records


def run_trials(
    family: Mapping[int, ScenarioDatabase],
    trials: Sequence[Trial],
    seed: int,
    fa_params: Optional[FaParams] = None,
    search: str = "firefly",
    n_jobs: int = Parallelism.threads,
) -> list[TrialRecord]:
    """Run `trials` on up to `n_jobs` joblib workers; records come back in trial order."""
    if search not in SEARCHES:
        raise UsageError(f"Unknown search back-end {search!r}.", suggestion=None)
    if not trials:
        return []
    fa_params = fa_params or FaParams.unit_box(2)
    n_jobs = max(1, min(int(n_jobs), len(trials)))
    started = arrow.utcnow()

    if n_jobs == 1:
        records = _run_chunk(family, trials, seed, fa_params, search)
    else:
        chunks = chunked(trials, math.ceil(len(trials) / n_jobs))
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_run_chunk)(family, chunk, seed, fa_params, search) for chunk in chunks
        )
        records = [record for part in parts for record in part]

    log.info(f"{len(records)} trials done in {humanize_seconds((arrow.utcnow() - started).total_seconds())}")
    return records


def _aggregate(
    study: str,
    seed: int,
    conditions: Iterable[tuple[tuple[str, Any], ...]],
    records: Sequence[TrialRecord],
    scoring: str = "combined",
) -> AccuracyReport:
    rows = []
    for condition in conditions:
        matching = [record for record in records if record.condition == condition]
        rows.append(AccuracyRow(
            condition=condition,
            trials=len(matching),
            location=sum(record.location for record in matching),
            magnitude=sum(record.magnitude for record in matching),
            near=sum(record.near for record in matching),
            combined=sum(record.correct for record in matching),
        ))
    return AccuracyReport(study, seed, tuple(rows), tuple(records), scoring)


def database_family(db: ScenarioDatabase, mode_counts: Iterable[int] = MODE_COUNTS) -> dict[int, ScenarioDatabase]:
    """One database per mode count, cut from `db`."""
    return {n_modes: truncate_database(db, n_modes) for n_modes in mode_counts}


def run_mode_count_study(
    family: Mapping[int, ScenarioDatabase],
    trials_per_cell: int = TRIALS_PER_CELL,
    seed: int = 0,
    noise_sets: Sequence[NoiseSet] = NOISE_SETS,
    fa_params: Optional[FaParams] = None,
    search: str = "firefly",
    n_jobs: int = Parallelism.threads,
) -> AccuracyReport:
    """
    Accuracy of every (mode count, noise set) cell.

    The true scenarios and search seeds of a noise set are shared by all mode counts,
    so the cells of one column differ only in how many modes detection sees.
    """
    if trials_per_cell < 0:
        raise InvalidParameterError(f"trials_per_cell must be non-negative, got {trials_per_cell}.")
    if not family:
        raise InvalidParameterError("The mode-count study needs at least one database.")

    conditions, trials = [], []
    for n_modes in sorted(family):
        for set_index, noise_set in enumerate(noise_sets):
            condition = (("n_modes", n_modes), ("noise_set", noise_set.name))
            conditions.append(condition)
            for trial in range(trials_per_cell):
                trials.append(Trial(condition, (set_index, trial), noise_set.spec, n_modes))

    log.info(f"Mode-count study: {len(conditions)} cells x {trials_per_cell} trials")
    records = run_trials(family, trials, seed, fa_params, search, n_jobs)
    return _aggregate("mode-count", seed, conditions, records)


def _sweep_spec(level: float, channel: str) -> NoiseSpec:
    if channel not in CHANNELS:
        raise UsageError(f"Unknown noise channel {channel!r}.", suggestion=None)
    return NoiseSpec(0.0 if channel == "phi" else level, 0.0 if channel == "omega" else level)


def run_noise_sweep(
    db: ScenarioDatabase,
    noise_levels: Sequence[float] = SWEEP_LEVELS,
    iterations: int = SWEEP_ITERATIONS,
    seed: int = 0,
    channel: str = "both",
    fa_params: Optional[FaParams] = None,
    search: str = "firefly",
    n_jobs: int = Parallelism.threads,
    scoring: str = "combined",
) -> AccuracyReport:
    """
    Accuracy at every noise level, `iterations` random damage scenarios each.

    `channel` selects where the level applies: both frequencies and mode shapes, or only one of them.
    """
    if iterations < 0:
        raise InvalidParameterError(f"iterations must be non-negative, got {iterations}.")
    conditions, trials = [], []
    for level_index, level in enumerate(noise_levels):
        condition = (("noise_pct", round(100 * level, 6)), ("channel", channel))
        conditions.append(condition)
        spec = _sweep_spec(level, channel)
        for iteration in range(iterations):
            trials.append(Trial(condition, (level_index, iteration), spec, db.meta.n_modes))

    log.info(f"Noise sweep on {channel}: {len(noise_levels)} levels x {iterations} iterations")
    records = run_trials({db.meta.n_modes: db}, trials, seed, fa_params, search, n_jobs)
    return _aggregate("noise-sweep" if scoring == "combined" else "location-only", seed, conditions, records, scoring)


def run_location_only(
    db: ScenarioDatabase,
    noise_levels: Sequence[float] = SWEEP_LEVELS,
    iterations: int = SWEEP_ITERATIONS,
    seed: int = 0,
    channel: str = "both",
    fa_params: Optional[FaParams] = None,
    search: str = "firefly",
    n_jobs: int = Parallelism.threads,
) -> AccuracyReport:
    """The noise sweep with the same seeds, graded on damage location only."""
    return run_noise_sweep(db, noise_levels, iterations, seed, channel, fa_params, search, n_jobs, scoring="location")
