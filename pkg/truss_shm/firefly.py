"""
Firefly metaheuristic over a box-bounded continuous search space.

Every firefly is attracted by every brighter one with a strength that decays with distance,
plus a random step whose size shrinks by `delta` each generation. Brightness is the negated
objective, so the swarm minimises.
"""

import dataclasses
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from truss_shm.constants import FireflyDefaults
from truss_shm.utils.exceptions import InvalidParameterError
from truss_shm.utils.randomization import make_rng

__all__ = ("FaParams", "Firefly", "FaResult", "attractiveness", "move_firefly", "random_step", "run")

log = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class FaParams:
    """
    Configuration of one firefly run.

    `alpha0` is a fraction of each dimension's box width, so the random step is dimensionless.
    """

    bounds: tuple[tuple[float, float], ...]
    n: int = FireflyDefaults.n
    max_generation: int = FireflyDefaults.max_generation
    alpha0: float = FireflyDefaults.alpha0
    beta0: float = FireflyDefaults.beta0
    gamma: float = FireflyDefaults.gamma
    delta: float = FireflyDefaults.delta
    m_exp: float = FireflyDefaults.m_exp
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds))
        if not self.bounds:
            raise InvalidParameterError("The search space needs at least one dimension.")
        for index, (lo, hi) in enumerate(self.bounds):
            if not lo < hi:
                raise InvalidParameterError(f"Bounds of dimension {index} must satisfy lo < hi, got [{lo}, {hi}].")
        if self.n < 2:
            raise InvalidParameterError(f"The population needs at least 2 fireflies, got n = {self.n}.")
        if self.max_generation < 1:
            raise InvalidParameterError(f"max_generation must be at least 1, got {self.max_generation}.")
        if not 0 <= self.alpha0 <= 1:
            raise InvalidParameterError(f"alpha0 must lie in [0, 1], got {self.alpha0}.")
        if not self.beta0 > 0:
            raise InvalidParameterError(f"beta0 must be positive, got {self.beta0}.")
        if not self.gamma >= 0:
            raise InvalidParameterError(f"gamma must be non-negative, got {self.gamma}.")
        if not 0 < self.delta <= 1:
            raise InvalidParameterError(f"delta must lie in (0, 1], got {self.delta}.")
        if not self.m_exp > 1:
            raise InvalidParameterError(f"m_exp must exceed 1, got {self.m_exp}.")

    @classmethod
    def unit_box(cls, dim: int, **kwargs) -> "FaParams":
        """Parameters over [0, 1]^dim."""
        return cls(bounds=((0.0, 1.0),) * dim, **kwargs)

    @property
    def dim(self) -> int:
        """Search-space dimension."""
        return len(self.bounds)

    @cached_property
    def lower(self) -> np.ndarray:
        """Lower corner of the box."""
        return np.array([lo for lo, _ in self.bounds])

    @cached_property
    def upper(self) -> np.ndarray:
        """Upper corner of the box."""
        return np.array([hi for _, hi in self.bounds])

    @cached_property
    def width(self) -> np.ndarray:
        """Per-dimension box width."""
        return self.upper - self.lower

    def replace(self, **changes) -> "FaParams":
        """Copy with some fields changed (and validated again)."""
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Firefly:
    """A candidate solution; brighter means a lower objective value."""

    position: np.ndarray
    intensity: float = -math.inf

    @property
    def value(self) -> float:
        """Objective value at `position`."""
        return -self.intensity


@dataclass(frozen=True, eq=False)
class FaResult:
    """Best point found, its value, the best-so-far value after each generation and the evaluation count."""

    best_position: np.ndarray
    best_value: float
    history: np.ndarray = field(repr=False)
    evaluations: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FaResult):
            return NotImplemented
        return (
            np.array_equal(self.best_position, other.best_position)
            and self.best_value == other.best_value
            and np.array_equal(self.history, other.history)
            and self.evaluations == other.evaluations
        )


def attractiveness(params: FaParams, r: float) -> float:
    """beta0 * exp(-gamma * r^m): attraction between two fireflies `r` apart."""
    return params.beta0 * math.exp(-params.gamma * r ** params.m_exp)


def _clamp(position: np.ndarray, params: FaParams) -> np.ndarray:
    return np.clip(position, params.lower, params.upper)


def move_firefly(
    i: Firefly, j: Firefly, alpha: float, params: FaParams, rng: np.random.Generator
) -> Firefly:
    """
    Move `i` towards the brighter `j`.

    x_i + beta(r) * (x_j - x_i) + alpha * (u - 0.5) * width, u ~ U[0, 1) per component,
    clamped to the box. The returned firefly carries `i`'s stale intensity until re-evaluated.
    """
    step = j.position - i.position
    beta = attractiveness(params, float(np.linalg.norm(step)))
    noise = alpha * (rng.random(params.dim) - 0.5) * params.width
    return Firefly(_clamp(i.position + beta * step + noise, params), i.intensity)


def random_step(firefly: Firefly, alpha: float, params: FaParams, rng: np.random.Generator) -> Firefly:
    """The move of a firefly that sees nobody brighter: the random term alone."""
    noise = alpha * (rng.random(params.dim) - 0.5) * params.width
    return Firefly(_clamp(firefly.position + noise, params), firefly.intensity)


def _evaluate(objective: Objective, position: np.ndarray) -> float:
    value = float(objective(position))
    # Non-finite values are the worst possible and can never become the best
    return value if math.isfinite(value) else math.inf


def run(
    objective: Objective,
    params: FaParams,
    initial: Optional[Sequence[Sequence[float]]] = None,
) -> FaResult:
    """
    Minimise `objective` over the box of `params`.

    Each generation compares every pair (i, j) in index order; when j is strictly brighter,
    i moves towards it and is re-evaluated at once, so later comparisons see the new position.
    A firefly that did not move during the generation takes a random step instead.
    `alpha` starts at `alpha0` and is multiplied by `delta` after every generation.

    `initial` optionally fixes the starting positions; otherwise they are uniform in the box.
    """
    rng = make_rng(params.seed)
    if initial is None:
        positions = params.lower + rng.random((params.n, params.dim)) * params.width
    else:
        positions = _clamp(np.asarray(initial, dtype=float).reshape(params.n, params.dim), params)

    swarm = []
    for position in positions:
        swarm.append(Firefly(position, -_evaluate(objective, position)))
    evaluations = params.n

    best = min(swarm, key=lambda firefly: firefly.value)
    best_position, best_value = best.position.copy(), best.value
    history = np.empty(params.max_generation)
    alpha = params.alpha0

    def settle(i: int, candidate: Firefly) -> None:
        nonlocal evaluations, best_position, best_value
        value = _evaluate(objective, candidate.position)
        evaluations += 1
        swarm[i] = Firefly(candidate.position, -value)
        if value < best_value:
            best_position, best_value = candidate.position.copy(), value

    log.trace(f"Firefly run: n={params.n}, generations={params.max_generation}, dim={params.dim}")
    for generation in range(params.max_generation):
        for i in range(params.n):
            moved = False
            for j in range(params.n):
                if swarm[j].intensity <= swarm[i].intensity:
                    continue
                settle(i, move_firefly(swarm[i], swarm[j], alpha, params, rng))
                moved = True

            if not moved:
                settle(i, random_step(swarm[i], alpha, params, rng))

        history[generation] = best_value
        alpha *= params.delta
        if generation % 500 == 0:
            log.trace(f"Generation {generation}: best {best_value:.6e}")

    return FaResult(best_position, best_value, history, evaluations)
