import dataclasses
import itertools
import json
import logging
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Optional, Union

import arrow
import numpy as np
from joblib import Parallel, delayed

from truss_shm.constants import Client, DatabaseDefaults, Grid, Parallelism
from truss_shm.fem import ModalSignature, assemble, check_signature, solve_modes
from truss_shm.model import DamageState, TrussModel, apply_damage, model_fingerprint
from truss_shm.utils import chunked, config_hash as hash_config, humanize_seconds
from truss_shm.utils.exceptions import (
    DatabaseFormatError,
    DatabaseVersionError,
    FingerprintMismatchError,
    InvalidParameterError,
    NumericalError,
    ScenarioBuildError,
    ScenarioError,
)
from truss_shm.utils.randomization import make_rng

__all__ = (
    "SCHEMA_VERSION",
    "Scenario",
    "DatabaseMeta",
    "ScenarioDatabase",
    "grid_levels",
    "enumerate_scenarios",
    "scenario_signature",
    "build_database",
    "save_database",
    "load_database",
    "get_signature",
    "truncate_database",
    "signature_to_json",
    "signature_from_json",
    "load_signature",
    "save_signature",
    "check_fingerprint",
    "verify_database",
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True, order=False)
class Scenario:
    """
    A point of the damage grid: which bars are damaged and by how many percent.

    `damaged` is canonical: sorted by bar id, one entry per bar, percents > 0.
    The empty scenario is the healthy structure.
    """

    damaged: tuple[tuple[int, int], ...] = ()

    @classmethod
    def of(cls, pairs: Iterable[Sequence[int]]) -> "Scenario":
        """
        Canonical scenario from (bar, percent) pairs in any order.

        Pairs with a zero percent are dropped; a bar listed twice keeps its larger damage.
        """
        merged: dict[int, int] = {}
        for bar_id, percent in pairs:
            bar_id, percent = int(bar_id), int(percent)
            if percent == 0:
                continue
            merged[bar_id] = max(percent, merged.get(bar_id, 0))
        return cls(tuple(sorted(merged.items())))

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        """
        Parse `bar:percent[,bar:percent...]`, e.g. `3:30,8:85`.

        `healthy` or an empty string is the healthy scenario.
        """
        text = text.strip()
        if text in ("", "healthy", "none"):
            return cls()
        pairs = []
        for item in text.split(","):
            bar_id, sep, percent = item.partition(":")
            if not sep:
                raise ScenarioError(f"Cannot parse scenario item {item!r}; expected `bar:percent`.")
            try:
                pairs.append((int(bar_id), int(percent)))
            except ValueError:
                raise ScenarioError(f"Cannot parse scenario item {item!r}; bar and percent must be integers.") from None
        return cls.of(pairs)

    @property
    def bars(self) -> tuple[int, ...]:
        """Damaged bar ids, ascending."""
        return tuple(bar_id for bar_id, _ in self.damaged)

    @property
    def percents(self) -> tuple[int, ...]:
        """Damage percent of each bar in `bars`."""
        return tuple(percent for _, percent in self.damaged)

    @property
    def n_damaged(self) -> int:
        """Number of damaged bars."""
        return len(self.damaged)

    @property
    def is_healthy(self) -> bool:
        """True for the empty scenario."""
        return not self.damaged

    @property
    def sort_key(self) -> tuple:
        """Enumeration order: fewer damaged bars first, then bar ids, then percents."""
        return (self.n_damaged, self.bars, self.percents)

    @property
    def label(self) -> str:
        """Magnitudes only, e.g. `30-85`."""
        return "-".join(str(p) for p in self.percents) if self.damaged else "0"

    def damage_state(self) -> DamageState:
        """The stiffness reduction this scenario stands for."""
        return DamageState({bar_id: percent / 100.0 for bar_id, percent in self.damaged})

    def validate(self, n_bars: int, max_damaged_bars: int, grid_step: int) -> None:
        """Raise `ScenarioError` unless this scenario lies on the given grid."""
        levels = set(grid_levels(grid_step))
        if self.n_damaged > max_damaged_bars:
            raise ScenarioError(f"Scenario {self} damages {self.n_damaged} bars; at most {max_damaged_bars} allowed.")
        for bar_id, percent in self.damaged:
            if not 1 <= bar_id <= n_bars:
                raise ScenarioError(f"Scenario {self} references unknown bar {bar_id}.")
            if percent not in levels:
                raise ScenarioError(f"Scenario {self}: {percent}% is not on the {grid_step}% damage grid.")

    def to_json(self) -> list[list[int]]:
        """`[[bar, percent], ...]` as stored in database files."""
        return [[bar_id, percent] for bar_id, percent in self.damaged]

    def __str__(self) -> str:
        if not self.damaged:
            return "healthy"
        return ",".join(f"{bar_id}:{percent}" for bar_id, percent in self.damaged)


@dataclass(frozen=True)
class DatabaseMeta:
    """Everything about a database except its entries."""

    model_fingerprint: str
    n_modes: int
    grid_step: int
    max_damaged_bars: int
    n_bars: int
    # Configuration hash and root seed of the run that wrote the database
    config_hash: str = ""
    seed: int = 0
    version: int = SCHEMA_VERSION

    @cached_property
    def levels(self) -> tuple[int, ...]:
        """Nonzero damage percentages of this database's grid."""
        return grid_levels(self.grid_step)


class ScenarioDatabase:
    """Precomputed modal signatures of every scenario on a damage grid, in enumeration order."""

    def __init__(self, meta: DatabaseMeta, entries: dict[Scenario, ModalSignature]):
        self.meta = meta
        self.entries = dict(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Scenario]:
        return iter(self.entries)

    def __contains__(self, scenario: object) -> bool:
        return scenario in self.entries

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScenarioDatabase):
            return NotImplemented
        return self.meta == other.meta and list(self.entries.items()) == list(other.entries.items())

    @property
    def healthy(self) -> ModalSignature:
        """Signature of the undamaged structure."""
        return self.entries[Scenario()]

    @property
    def n_dofs(self) -> int:
        """Free-DOF dimension shared by every signature."""
        return self.healthy.n_dofs

    def damaged_scenarios(self) -> list[Scenario]:
        """Every scenario except the healthy one, in enumeration order."""
        return [scenario for scenario in self.entries if not scenario.is_healthy]

    def __repr__(self) -> str:
        return (
            f"ScenarioDatabase(entries={len(self)}, n_modes={self.meta.n_modes}, "
            f"grid_step={self.meta.grid_step}, max_damaged_bars={self.meta.max_damaged_bars})"
        )


def grid_levels(grid_step: int) -> tuple[int, ...]:
    """
    Nonzero damage percentages of the grid: 5, 5 + step, ... up to 95.

    A step above 90 leaves the single level 5; otherwise the step must divide 90.
    """
    span = Grid.max_percent - Grid.min_percent
    if grid_step < 1 or (grid_step <= span and span % grid_step):
        raise InvalidParameterError(f"Grid step {grid_step} must be positive and divide {span} (or exceed it).")
    return tuple(range(Grid.min_percent, Grid.max_percent + 1, grid_step))


def enumerate_scenarios(model: TrussModel, max_damaged_bars: int, grid_step: int) -> list[Scenario]:
    """
    Every scenario with at most `max_damaged_bars` damaged bars, healthy first.

    Ordered by number of damaged bars, then lexicographically by bar ids, then by percents.
    """
    if max_damaged_bars < 1:
        raise InvalidParameterError(f"At least one damaged bar must be allowed, got {max_damaged_bars}.")
    if max_damaged_bars > model.n_bars:
        raise InvalidParameterError(
            f"Cannot damage {max_damaged_bars} bars of a truss with {model.n_bars} bars."
        )
    levels = grid_levels(grid_step)
    bar_ids = [bar.id for bar in model.bars]

    scenarios = [Scenario()]
    for count in range(1, max_damaged_bars + 1):
        for bars in itertools.combinations(bar_ids, count):
            for percents in itertools.product(levels, repeat=count):
                scenarios.append(Scenario(tuple(zip(bars, percents))))
    return scenarios


def scenario_signature(model: TrussModel, scenario: Scenario, n_modes: int) -> ModalSignature:
    """Signature of `model` damaged as `scenario` describes."""
    try:
        stiffness, mass, _ = assemble(apply_damage(model, scenario.damage_state()))
        return solve_modes(stiffness, mass, n_modes)
    except NumericalError as error:
        raise ScenarioBuildError(scenario, error) from error


def _signatures(model: TrussModel, scenarios: list[Scenario], n_modes: int) -> list[ModalSignature]:
    return [scenario_signature(model, scenario, n_modes) for scenario in scenarios]


def build_database(
    model: TrussModel,
    max_damaged_bars: int = DatabaseDefaults.max_damaged_bars,
    grid_step: int = DatabaseDefaults.grid_step,
    n_modes: int = DatabaseDefaults.n_modes,
    n_jobs: int = Parallelism.threads,
    config_hash: Optional[str] = None,
    seed: int = 0,
) -> ScenarioDatabase:
    """
    Compute the signature of every enumerated scenario.

    Scenarios are independent; they are split into contiguous chunks evaluated by `n_jobs`
    joblib workers and merged back in enumeration order, so the result does not depend on `n_jobs`.
    `config_hash` and `seed` are recorded in the header; without a hash, the grid settings are hashed.
    """
    model = model.pristine()
    if n_modes > model.free_dofs:
        raise InvalidParameterError(f"Cannot extract {n_modes} modes from {model.free_dofs} free DOFs.")
    scenarios = enumerate_scenarios(model, max_damaged_bars, grid_step)
    log.info(f"Building a database of {len(scenarios)} scenarios with {n_modes} modes on {n_jobs} worker(s)")
    started = arrow.utcnow()

    n_jobs = max(1, int(n_jobs))
    if n_jobs == 1:
        signatures = _signatures(model, scenarios, n_modes)
    else:
        chunks = list(chunked(scenarios, math.ceil(len(scenarios) / (4 * n_jobs))))
        parts = Parallel(n_jobs=n_jobs)(delayed(_signatures)(model, chunk, n_modes) for chunk in chunks)
        signatures = [signature for part in parts for signature in part]

    log.info(f"Database built in {humanize_seconds((arrow.utcnow() - started).total_seconds())}")
    fingerprint = model_fingerprint(model)
    if config_hash is None:
        config_hash = hash_config({
            "model_fingerprint": fingerprint,
            "database": {"max_damaged_bars": max_damaged_bars, "grid_step": grid_step, "n_modes": n_modes},
        })
    meta = DatabaseMeta(
        model_fingerprint=fingerprint,
        n_modes=n_modes,
        grid_step=grid_step,
        max_damaged_bars=max_damaged_bars,
        n_bars=model.n_bars,
        config_hash=config_hash,
        seed=int(seed),
    )
    return ScenarioDatabase(meta, dict(zip(scenarios, signatures)))


def signature_to_json(signature: ModalSignature) -> dict[str, Any]:
    """`{"omegas": [...], "modes": [[...], ...]}` with one inner list per mode."""
    return {
        "omegas": signature.frequencies.tolist(),
        "modes": signature.modes.T.tolist(),
    }


def signature_from_json(data: Any) -> ModalSignature:
    """Inverse of `signature_to_json`."""
    try:
        omegas = np.array(data["omegas"], dtype=float)
        modes = np.array(data["modes"], dtype=float)
    except (KeyError, TypeError, ValueError) as error:
        raise DatabaseFormatError(f"Malformed signature: {error!r}") from error
    if modes.ndim != 2:
        raise DatabaseFormatError("Signature `modes` must be a list of mode-shape lists.")
    return ModalSignature(omegas, modes.T)


def load_signature(path: Union[str, Path]) -> ModalSignature:
    """Read a measured signature stored in the database `signature` layout."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise DatabaseFormatError(f"Cannot read signature {path}: {error.strerror}") from error
    try:
        data = json.loads(text)
    except json.JSONDecodeError as error:
        offset = len(text[:error.pos].encode("utf-8"))
        raise DatabaseFormatError(f"{path} is not a valid signature: {error.msg}", offset=offset) from error
    return signature_from_json(data)


def save_signature(signature: ModalSignature, path: Union[str, Path]) -> None:
    """Write `signature` in the layout `load_signature` reads."""
    Path(path).write_text(json.dumps(signature_to_json(signature), indent=2) + "\n", encoding="utf-8")


def save_database(db: ScenarioDatabase, path: Union[str, Path]) -> None:
    """
    Write `db` as a single JSON document, one entry per line.

    Floats are written by `repr`, the shortest text that reads back to the identical double,
    so load -> save reproduces the file byte for byte.
    """
    meta = db.meta
    header = {
        "version": meta.version,
        "generator": f"{Client.name} {Client.version}",
        "config_hash": meta.config_hash,
        "seed": meta.seed,
        "model_fingerprint": meta.model_fingerprint,
        "n_modes": meta.n_modes,
        "grid_step": meta.grid_step,
        "max_damaged_bars": meta.max_damaged_bars,
        "n_bars": meta.n_bars,
    }
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(header, separators=(",", ":"))[:-1])
        f.write(',"entries":[\n')
        last = len(db.entries) - 1
        for index, (scenario, signature) in enumerate(db.entries.items()):
            entry = {"scenario": scenario.to_json(), "signature": signature_to_json(signature)}
            f.write(json.dumps(entry, separators=(",", ":")))
            f.write(",\n" if index < last else "\n")
        f.write("]}\n")
    log.debug(f"Saved {len(db)} entries to {path}")


def load_database(path: Union[str, Path]) -> ScenarioDatabase:
    """Read a database written by `save_database`."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as error:
        raise DatabaseFormatError(f"Cannot read database {path}: {error.strerror}") from error

    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as error:
        raise DatabaseFormatError(f"{path} is not UTF-8", offset=error.start) from error

    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        offset = len(text[:error.pos].encode("utf-8"))
        raise DatabaseFormatError(f"{path} is not a valid database: {error.msg}", offset=offset) from error

    if not isinstance(document, dict):
        raise DatabaseFormatError(f"{path} does not hold a database object.")
    if document.get("version") != SCHEMA_VERSION:
        raise DatabaseVersionError(document.get("version"), SCHEMA_VERSION)

    try:
        meta = DatabaseMeta(
            model_fingerprint=str(document["model_fingerprint"]),
            n_modes=int(document["n_modes"]),
            grid_step=int(document["grid_step"]),
            max_damaged_bars=int(document["max_damaged_bars"]),
            n_bars=int(document["n_bars"]),
            config_hash=str(document["config_hash"]),
            seed=int(document["seed"]),
        )
        entries = {}
        for item in document["entries"]:
            scenario = Scenario.of(item["scenario"])
            if scenario in entries:
                raise DatabaseFormatError(f"{path}: scenario {scenario} is stored twice.")
            entries[scenario] = signature_from_json(item["signature"])
    except (KeyError, TypeError, ValueError) as error:
        raise DatabaseFormatError(f"{path} is missing or has malformed field {error!r}.") from error

    db = ScenarioDatabase(meta, entries)
    shapes = {(sig.n_modes, sig.n_dofs) for sig in entries.values()}
    if len(shapes) > 1 or any(n_modes != meta.n_modes for n_modes, _ in shapes):
        raise DatabaseFormatError(f"{path}: signatures disagree on mode count or DOF dimension.")
    if Scenario() not in entries:
        raise DatabaseFormatError(f"{path}: the healthy scenario is missing.")
    log.debug(f"Loaded {db!r} from {path}")
    return db


def get_signature(db: ScenarioDatabase, scenario: Scenario) -> ModalSignature:
    """Exact lookup of `scenario`; scenarios off the grid or absent from `db` raise `ScenarioError`."""
    scenario = Scenario.of(scenario.damaged)
    meta = db.meta
    scenario.validate(meta.n_bars, meta.max_damaged_bars, meta.grid_step)
    try:
        return db.entries[scenario]
    except KeyError:
        raise ScenarioError(f"Scenario {scenario} is not in the database.") from None


def truncate_database(db: ScenarioDatabase, n_modes: int) -> ScenarioDatabase:
    """
    The database `db` would have been with only its first `n_modes` modes.

    Modes are sorted by frequency, so this equals a database built with `n_modes` directly.
    """
    if not 1 <= n_modes <= db.meta.n_modes:
        raise InvalidParameterError(f"No {n_modes}-mode database: {db!r} holds {db.meta.n_modes} modes.")
    if n_modes == db.meta.n_modes:
        return db
    meta = dataclasses.replace(db.meta, n_modes=n_modes)
    return ScenarioDatabase(meta, {scenario: sig.truncated(n_modes) for scenario, sig in db.entries.items()})


def check_fingerprint(db: ScenarioDatabase, model: TrussModel, force: bool = False) -> None:
    """Refuse a database built from another model, unless `force` is set (then only warn)."""
    fingerprint = model_fingerprint(model)
    if fingerprint == db.meta.model_fingerprint:
        return
    if not force:
        raise FingerprintMismatchError(db.meta.model_fingerprint, fingerprint)
    log.warning(
        f"Database fingerprint {db.meta.model_fingerprint[:12]} does not match model {fingerprint[:12]}; "
        "continuing because the check was forced."
    )


def verify_database(
    db: ScenarioDatabase,
    model: TrussModel,
    sample: float = DatabaseDefaults.verify_sample,
    seed: int = 0,
) -> dict[str, Any]:
    """
    Re-solve a random sample of entries and check them against the modal invariants.

    Also checks that the entries are exactly the enumeration of the stored grid.
    Returns a summary with the list of problems found (empty when the database is sound).
    """
    if not 0 < sample <= 1:
        raise InvalidParameterError(f"The verification sample must be a fraction in (0, 1], got {sample!r}.")
    meta = db.meta
    problems = []
    expected = enumerate_scenarios(model, meta.max_damaged_bars, meta.grid_step)
    if list(db.entries) != expected:
        problems.append(f"entries do not match the enumeration ({len(db)} stored, {len(expected)} expected)")

    scenarios = list(db.entries)
    count = min(len(scenarios), max(1, math.ceil(sample * len(scenarios))))
    rng = make_rng(seed)
    picked = sorted(rng.choice(len(scenarios), size=count, replace=False).tolist())
    log.info(f"Verifying {count} of {len(scenarios)} entries")

    for index in picked:
        scenario = scenarios[index]
        stiffness, mass, _ = assemble(apply_damage(model, scenario.damage_state()))
        for problem in check_signature(stiffness, mass, db.entries[scenario]):
            problems.append(f"{scenario}: {problem}")
        log.trace(f"Verified {scenario}")

    return {"checked": count, "entries": len(scenarios), "problems": problems}
