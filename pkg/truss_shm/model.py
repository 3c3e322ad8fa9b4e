import dataclasses
import hashlib
import json
import logging
import math
import operator
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Union

from truss_shm.constants import BENCHMARK_MODEL_PATH, BUILTIN_MODEL
from truss_shm.utils.exceptions import InvalidDamageError, ModelValidationError, UnknownBarError

__all__ = (
    "Material",
    "Node",
    "Bar",
    "Support",
    "DamageState",
    "TrussModel",
    "benchmark_truss",
    "apply_damage",
    "bar_length",
    "load_model",
    "dump_model",
    "model_from_dict",
    "model_to_dict",
    "model_fingerprint",
    "resolve_model",
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Material:
    """Linear elastic isotropic material shared by every bar, together with the bar cross-section."""

    young_modulus: float
    poisson_ratio: float
    density: float
    cross_area: float

    def __post_init__(self):
        if not self.young_modulus > 0:
            raise ModelValidationError(f"Young's modulus must be positive, got {self.young_modulus!r}.")
        if not self.density > 0:
            raise ModelValidationError(f"Density must be positive, got {self.density!r}.")
        if not self.cross_area > 0:
            raise ModelValidationError(f"Cross-sectional area must be positive, got {self.cross_area!r}.")
        if not 0 <= self.poisson_ratio < 0.5:
            raise ModelValidationError(f"Poisson's ratio must lie in [0, 0.5), got {self.poisson_ratio!r}.")


@dataclass(frozen=True)
class Node:
    """A pin joint, coordinates in metres."""

    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Bar:
    """An axial member between two nodes."""

    id: int
    node_i: int
    node_j: int


@dataclass(frozen=True)
class Support:
    """Translations fixed at one node."""

    node: int
    fix_x: bool
    fix_y: bool

    @property
    def constrained(self) -> int:
        """Number of DOFs this support removes."""
        return int(self.fix_x) + int(self.fix_y)


@dataclass(frozen=True)
class DamageState:
    """
    Per-bar stiffness reduction.

    `damage` maps bar ids to the fraction d in [0, 1) by which the bar's modulus is reduced.
    A bar that is not listed is undamaged.
    """

    damage: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for bar_id, fraction in self.damage.items():
            if not 0 <= fraction < 1:
                raise InvalidDamageError(bar_id, fraction)
        # Zero entries are dropped: an undamaged bar is the same as an absent one
        cleaned = sorted((int(k), float(v)) for k, v in self.damage.items() if v != 0)
        object.__setattr__(self, "damage", dict(cleaned))

    def fraction(self, bar_id: int) -> float:
        """Damage fraction of `bar_id` (0 when undamaged)."""
        return self.damage.get(bar_id, 0.0)

    @property
    def is_healthy(self) -> bool:
        """True when no bar carries a nonzero damage."""
        return not any(self.damage.values())


@dataclass(frozen=True)
class TrussModel:
    """
    A pin-jointed planar truss.

    Node and bar ids are contiguous from 1. `damage` records the stiffness loss
    applied by `apply_damage`; the material itself always stays pristine.
    """

    nodes: tuple[Node, ...]
    bars: tuple[Bar, ...]
    material: Material
    supports: tuple[Support, ...]
    damage: DamageState = field(default_factory=DamageState)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "bars", tuple(self.bars))
        object.__setattr__(self, "supports", tuple(self.supports))
        self._validate()

    def _validate(self) -> None:
        if [node.id for node in self.nodes] != list(range(1, len(self.nodes) + 1)):
            raise ModelValidationError("Node ids must be unique and contiguous from 1, in order.")
        if [bar.id for bar in self.bars] != list(range(1, len(self.bars) + 1)):
            raise ModelValidationError("Bar ids must be unique and contiguous from 1, in order.")
        if not self.bars:
            raise ModelValidationError("A truss needs at least one bar.")

        for bar in self.bars:
            for end in (bar.node_i, bar.node_j):
                if not 1 <= end <= len(self.nodes):
                    raise ModelValidationError(f"Bar {bar.id} references unknown node {end}.")
            if bar.node_i == bar.node_j:
                raise ModelValidationError(f"Bar {bar.id} connects node {bar.node_i} to itself.")
            if bar_length(self, bar.id) <= 0:
                raise ModelValidationError(f"Bar {bar.id} has zero length.")

        supported = set()
        for support in self.supports:
            if not 1 <= support.node <= len(self.nodes):
                raise ModelValidationError(f"Support references unknown node {support.node}.")
            if support.node in supported:
                raise ModelValidationError(f"Node {support.node} is supported twice.")
            if support.constrained == 0:
                raise ModelValidationError(f"Support at node {support.node} constrains no DOF.")
            supported.add(support.node)

        if self.constrained_dofs < 3:
            raise ModelValidationError(
                f"The supports constrain {self.constrained_dofs} DOFs; "
                "at least 3 are needed to remove rigid-body modes."
            )

        for bar_id in self.damage.damage:
            if not 1 <= bar_id <= len(self.bars):
                raise UnknownBarError(bar_id)

    @property
    def n_bars(self) -> int:
        """Number of bars."""
        return len(self.bars)

    @property
    def constrained_dofs(self) -> int:
        """DOFs removed by the supports."""
        return sum(support.constrained for support in self.supports)

    @property
    def free_dofs(self) -> int:
        """DOFs left after elimination of the supports."""
        return 2 * len(self.nodes) - self.constrained_dofs

    def node(self, node_id: int) -> Node:
        """Node with id `node_id`."""
        return self.nodes[node_id - 1]

    def bar(self, bar_id: int) -> Bar:
        """Bar with id `bar_id`, raising `UnknownBarError` when absent."""
        try:
            index = operator.index(bar_id)
        except TypeError:
            raise UnknownBarError(bar_id) from None
        if not 1 <= index <= len(self.bars):
            raise UnknownBarError(bar_id)
        return self.bars[index - 1]

    def effective_modulus(self, bar_id: int) -> float:
        """Young's modulus of `bar_id` after damage, E * (1 - d)."""
        self.bar(bar_id)
        return self.material.young_modulus * (1.0 - self.damage.fraction(bar_id))

    def pristine(self) -> "TrussModel":
        """The same structure without damage."""
        return dataclasses.replace(self, damage=DamageState())


def bar_length(model: TrussModel, bar_id: int) -> float:
    """Euclidean distance between the end nodes of `bar_id`, in metres."""
    bar = model.bar(bar_id)
    start, end = model.node(bar.node_i), model.node(bar.node_j)
    return math.hypot(end.x - start.x, end.y - start.y)


def apply_damage(model: TrussModel, state: DamageState) -> TrussModel:
    """
    Return `model` with bar moduli reduced by `state`.

    Damage always applies to the pristine structure: applying a state replaces any
    damage the model already carries instead of compounding it. Mass is unchanged.
    """
    for bar_id in state.damage:
        model.bar(bar_id)
    return dataclasses.replace(model, damage=state)


def model_from_dict(data: Mapping[str, Any]) -> TrussModel:
    """Build a model from the JSON model-file layout (`nodes`, `bars`, `material`, `supports`)."""
    try:
        material = data["material"]
        return TrussModel(
            nodes=tuple(Node(int(n["id"]), float(n["x"]), float(n["y"])) for n in data["nodes"]),
            bars=tuple(Bar(int(b["id"]), int(b["i"]), int(b["j"])) for b in data["bars"]),
            material=Material(
                young_modulus=float(material["E"]),
                poisson_ratio=float(material["nu"]),
                density=float(material["rho"]),
                cross_area=float(material["A"]),
            ),
            supports=tuple(
                Support(int(s["node"]), bool(s.get("fix_x", False)), bool(s.get("fix_y", False)))
                for s in data["supports"]
            ),
        )
    except (KeyError, TypeError, ValueError) as error:
        raise ModelValidationError(f"Malformed model description: {error!r}") from error


def model_to_dict(model: TrussModel) -> dict[str, Any]:
    """Inverse of `model_from_dict`; damage is not part of the model file."""
    return {
        "nodes": [{"id": n.id, "x": n.x, "y": n.y} for n in model.nodes],
        "bars": [{"id": b.id, "i": b.node_i, "j": b.node_j} for b in model.bars],
        "material": {
            "E": model.material.young_modulus,
            "nu": model.material.poisson_ratio,
            "rho": model.material.density,
            "A": model.material.cross_area,
        },
        "supports": [{"node": s.node, "fix_x": s.fix_x, "fix_y": s.fix_y} for s in model.supports],
    }


def load_model(path: Union[str, Path]) -> TrussModel:
    """Read a model file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise ModelValidationError(
            f"{path} is not valid JSON: {error.msg} (line {error.lineno}, column {error.colno})"
        ) from error
    except OSError as error:
        raise ModelValidationError(f"Cannot read model file {path}: {error.strerror}") from error

    model = model_from_dict(data)
    log.debug(f"Loaded model {path} with {len(model.nodes)} nodes and {model.n_bars} bars")
    return model


def dump_model(model: TrussModel, path: Union[str, Path]) -> None:
    """Write `model` (without damage) as a model file."""
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def model_fingerprint(model: TrussModel) -> str:
    """
    SHA-256 of the canonical model-file bytes.

    Canonical bytes are the sorted-key compact JSON of `model_to_dict`, so a model read
    from disk and the built-in benchmark share a fingerprint when they describe the same truss.
    """
    canonical = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@lru_cache(maxsize=None)
def benchmark_truss() -> TrussModel:
    """
    The 13-bar gable truss used throughout the benchmark studies.

    Eight nodes, A-36 steel (E = 2e11 Pa, nu = 0.3, rho = 7850 kg/m^3), A = 4e-4 m^2,
    pinned at node 1 and on a roller at node 5; span 7.3152 m, apex height 2.4284 m.
    """
    return load_model(BENCHMARK_MODEL_PATH)


def resolve_model(spec: Union[str, Path, None]) -> TrussModel:
    """Turn a `--model` value (`builtin`, None or a path) into a model."""
    if spec is None or str(spec) == BUILTIN_MODEL:
        return benchmark_truss()
    return load_model(spec)
