"""
Two-level full factorial study of the firefly parameters.

Factors are coded -1 (low) and +1 (high); treatments are listed in standard order,
the first factor alternating fastest. Effects come from contrasts of the treatment means
and are tested against the pooled within-treatment variance.
"""

import itertools
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from joblib import Parallel, delayed
from scipy import special, stats

from truss_shm.constants import Parallelism
from truss_shm.database import ScenarioDatabase, get_signature
from truss_shm.detection import NoiseSpec, add_noise, detect
from truss_shm.experiments.presets import FACTORIAL
from truss_shm.firefly import FaParams
from truss_shm.utils import chunked
from truss_shm.utils.exceptions import InvalidParameterError
from truss_shm.utils.randomization import RandomStream

__all__ = (
    "EffectTerm",
    "EffectTable",
    "FactorialRun",
    "design_matrix",
    "term_names",
    "t_cdf",
    "t_critical",
    "analyze_factorial",
    "factorial_2k",
    "pareto_effects",
)

log = logging.getLogger(__name__)

_SCENARIO_STREAM, _NOISE_STREAM, _SEARCH_STREAM = 0, 1, 2


def t_cdf(t: float, df: float) -> float:
    """
    Cumulative distribution of Student's t with `df` degrees of freedom.

    Uses the regularized incomplete beta function: the tail beyond |t| is I_x(df/2, 1/2) / 2
    with x = df / (df + t^2).
    """
    if df <= 0:
        raise InvalidParameterError(f"Degrees of freedom must be positive, got {df}.")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 1.0 if t > 0 else 0.0
    tail = 0.5 * float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return 1.0 - tail if t > 0 else tail


def t_critical(df: float, significance: float = 0.05) -> float:
    """Two-sided critical value of Student's t at the given significance."""
    return float(stats.t.ppf(1.0 - significance / 2.0, df))


def term_names(factors: Sequence[str]) -> list[str]:
    """`const`, the main effects, then every interaction by increasing order, e.g. `n*gamma`."""
    names = ["const"]
    for order in range(1, len(factors) + 1):
        names.extend("*".join(combo) for combo in itertools.combinations(factors, order))
    return names


def design_matrix(k: int) -> np.ndarray:
    """
    Coded +-1 columns of every term of a 2^k design, one row per treatment in standard order.

    Columns follow `term_names`: the constant, main effects, then interactions.
    """
    # Standard order: factor 0 alternates fastest
    levels = np.array([[1 if (run >> bit) & 1 else -1 for bit in range(k)] for run in range(2 ** k)], dtype=float)
    columns = [np.ones(2 ** k)]
    for order in range(1, k + 1):
        for combo in itertools.combinations(range(k), order):
            columns.append(np.prod(levels[:, combo], axis=1))
    return np.column_stack(columns)


@dataclass(frozen=True)
class EffectTerm:
    """One row of an effect table; `effect` is None for the constant."""

    name: str
    effect: Optional[float]
    coef: float
    se: float
    t_value: float
    p_value: float

    def significant(self, significance: float = 0.05) -> bool:
        """True when the term's p-value is below `significance`."""
        return self.p_value < significance


@dataclass(frozen=True)
class EffectTable:
    """Estimated effects of a two-level factorial experiment."""

    terms: tuple[EffectTerm, ...]
    df: int
    t_crit: float
    significance: float = 0.05

    def term(self, name: str) -> EffectTerm:
        """The row called `name`."""
        for term in self.terms:
            if term.name == name:
                return term
        raise KeyError(name)

    @property
    def significant_terms(self) -> list[str]:
        """Names of the non-constant terms below the significance level."""
        return [term.name for term in self.terms[1:] if term.significant(self.significance)]


def analyze_factorial(
    responses: Any,
    factors: Sequence[str],
    significance: float = 0.05,
) -> EffectTable:
    """
    Effects, coefficients and t-tests of a replicated 2^k experiment.

    `responses` has one row per treatment (standard order) and one column per replicate.
    effect = contrast / 2^(k-1), coef = effect / 2, se = sqrt(s^2 / N) with the pooled
    within-treatment variance s^2 on N - 2^k degrees of freedom.
    """
    responses = np.asarray(responses, dtype=float)
    k = len(factors)
    runs = 2 ** k
    if responses.ndim != 2 or responses.shape[0] != runs:
        raise InvalidParameterError(f"Expected {runs} treatment rows of replicates, got shape {responses.shape}.")
    replicates = responses.shape[1]
    if replicates < 2:
        raise InvalidParameterError("At least 2 replicates are needed to estimate the error variance.")

    total = runs * replicates
    df = total - runs
    means = responses.mean(axis=1)
    variance = float(np.sum((responses - means[:, None]) ** 2)) / df
    se = math.sqrt(variance / total)

    matrix = design_matrix(k)
    terms = []
    for name, column in zip(term_names(factors), matrix.T):
        if name == "const":
            coef, effect = float(means.mean()), None
        else:
            effect = float(column @ means) / (runs / 2)
            coef = effect / 2.0
        if se > 0:
            t_value = coef / se
        else:
            t_value = 0.0 if coef == 0 else math.copysign(math.inf, coef)
        p_value = 2.0 * (1.0 - t_cdf(abs(t_value), df))
        terms.append(EffectTerm(name, effect, coef, se, t_value, min(1.0, max(0.0, p_value))))

    return EffectTable(tuple(terms), df, t_critical(df, significance), significance)


def pareto_effects(table: EffectTable) -> tuple[list[tuple[str, float]], float]:
    """Non-constant terms by descending |t| (ties keep table order), and the critical value."""
    ranked = sorted(((term.name, abs(term.t_value)) for term in table.terms[1:]), key=lambda item: -item[1])
    return ranked, table.t_crit


@dataclass(frozen=True)
class FactorialRun:
    """Raw data of a factorial experiment together with its analysis."""

    factors: tuple[str, ...]
    treatments: tuple[dict[str, Any], ...]
    responses: np.ndarray
    table: EffectTable
    seed: int


def _treatment_params(base: FaParams, levels: Mapping[str, Sequence[Any]], coded: Sequence[float]) -> FaParams:
    changes = {}
    for (name, (low, high)), code in zip(levels.items(), coded):
        changes[name] = type(getattr(base, name))(high if code > 0 else low)
    return base.replace(**changes)


def _run_replicates(
    db: ScenarioDatabase,
    replicates: Sequence[int],
    treatments: Sequence[FaParams],
    noise: NoiseSpec,
    seed: int,
) -> list[list[float]]:
    stream = RandomStream(seed)
    candidates = db.damaged_scenarios()
    columns = []
    for replicate in replicates:
        true = candidates[int(stream.rng(_SCENARIO_STREAM, replicate).integers(len(candidates)))]
        test = add_noise(get_signature(db, true), noise, stream.rng(_NOISE_STREAM, replicate))
        search_seed = stream.seed_for(_SEARCH_STREAM, replicate)
        column = [detect(test, db, fa_params=params.replace(seed=search_seed)).objective_value for params in treatments]
        log.trace(f"Replicate {replicate} ({true}): {column}")
        columns.append(column)
    return columns


def factorial_2k(
    db: ScenarioDatabase,
    levels: Optional[Mapping[str, Sequence[Any]]] = None,
    replicates: int = FACTORIAL.replicates,
    seed: int = 0,
    fixed: Optional[Mapping[str, float]] = None,
    noise: NoiseSpec = FACTORIAL.noise,
    significance: float = FACTORIAL.significance,
    n_jobs: int = Parallelism.threads,
) -> FactorialRun:
    """
    Run detection at every treatment of the design, `replicates` times, and analyse the objective values.

    Each replicate draws one noisy test case that every treatment searches with the same swarm seed,
    so treatments are compared on common random numbers.
    """
    levels = dict(levels or FACTORIAL.levels)
    if replicates < 2:
        raise InvalidParameterError("At least 2 replicates are needed to estimate the error variance.")
    for name in levels:
        if name not in FaParams.__dataclass_fields__ or name in ("bounds", "seed"):
            raise InvalidParameterError(f"{name!r} is not a firefly parameter.")

    base = FaParams.unit_box(2, **{**FACTORIAL.fixed, **(fixed or {})})
    factors = tuple(levels)
    coded_rows = design_matrix(len(factors))[:, 1:1 + len(factors)]
    treatments = [_treatment_params(base, levels, coded) for coded in coded_rows]

    n_jobs = max(1, min(int(n_jobs), replicates))
    log.info(f"Factorial design: {len(treatments)} treatments x {replicates} replicates on {n_jobs} worker(s)")
    if n_jobs == 1:
        columns = _run_replicates(db, range(replicates), treatments, noise, seed)
    else:
        chunks = chunked(list(range(replicates)), math.ceil(replicates / n_jobs))
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_run_replicates)(db, chunk, treatments, noise, seed) for chunk in chunks
        )
        columns = [column for part in parts for column in part]

    responses = np.array(columns).T
    table = analyze_factorial(responses, factors, significance)

    ranked, _ = pareto_effects(table)
    if ranked and ranked[0][0] != "n" and "n" in factors:
        log.warning(f"Largest standardized effect is {ranked[0][0]!r}, not the population size n.")

    described = tuple(
        {name: getattr(params, name) for name in factors} for params in treatments
    )
    return FactorialRun(factors, described, responses, table, seed)
