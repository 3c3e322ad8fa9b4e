import numpy as np
import pytest
from scipy import stats

from truss_shm.experiments import analyze_factorial, factorial_2k, pareto_effects, t_cdf, t_critical
from truss_shm.experiments.factorial import design_matrix, term_names
from truss_shm.experiments.reports import factorial_rows, pareto_rows, responses_rows
from truss_shm.utils.exceptions import InvalidParameterError

FACTORS = ("n", "max_generation", "gamma")


def synthetic_responses() -> np.ndarray:
    """y = 10 - 3 * [n high] with replicate offsets of +-0.1 shared by every treatment."""
    n_high = design_matrix(3)[:, 1] > 0
    means = 10.0 - 3.0 * n_high
    return means[:, None] + np.array([-0.1, 0.1])[None, :]


def test_term_names():
    assert term_names(FACTORS) == [
        "const", "n", "max_generation", "gamma",
        "n*max_generation", "n*gamma", "max_generation*gamma", "n*max_generation*gamma",
    ]


def test_standard_order():
    matrix = design_matrix(3)
    assert matrix.shape == (8, 8)
    assert list(matrix[:, 1]) == [-1, 1, -1, 1, -1, 1, -1, 1]
    assert list(matrix[:, 2]) == [-1, -1, 1, 1, -1, -1, 1, 1]
    assert list(matrix[:, 3]) == [-1, -1, -1, -1, 1, 1, 1, 1]
    assert np.array_equal(matrix.T @ matrix, 8 * np.eye(8))


def test_t_distribution():
    assert t_cdf(0.0, 10) == 0.5
    assert t_cdf(np.inf, 3) == 1.0
    assert t_cdf(-np.inf, 3) == 0.0
    for t, df in ((0.64, 72), (-2.3, 5), (4.0, 1)):
        assert t_cdf(t, df) == pytest.approx(stats.t.cdf(t, df), abs=1e-12)
    assert 2 * (1 - t_cdf(0.64, 72)) == pytest.approx(0.526, abs=0.02)
    assert t_critical(72) == pytest.approx(1.993, abs=1e-3)
    with pytest.raises(InvalidParameterError):
        t_cdf(1.0, 0)


def test_synthetic_effects_are_recovered():
    table = analyze_factorial(synthetic_responses(), FACTORS)
    assert table.df == 8
    assert table.term("const").effect is None
    assert table.term("const").coef == pytest.approx(8.5)
    assert table.term("n").effect == pytest.approx(-3.0)
    assert table.term("n").coef == pytest.approx(-1.5)
    assert table.term("n").se == pytest.approx(np.sqrt(0.02 / 16))
    assert table.term("n").p_value < 1e-6
    for term in table.terms[2:]:
        assert term.effect == pytest.approx(0.0, abs=1e-12)
        assert term.p_value == pytest.approx(1.0, abs=1e-9)
    assert table.significant_terms == ["n"]


def test_effect_is_twice_the_coefficient():
    rng = np.random.default_rng(3)
    table = analyze_factorial(rng.normal(size=(8, 4)), FACTORS)
    for term in table.terms[1:]:
        assert term.effect == 2 * term.coef
        assert term.t_value == term.coef / term.se


def test_noiseless_responses():
    responses = np.repeat(synthetic_responses()[:, :1], 3, axis=1)
    table = analyze_factorial(responses, FACTORS)
    assert table.term("n").se == pytest.approx(0, abs=1e-12)
    assert table.term("n").t_value == -np.inf
    assert table.term("n").p_value == 0.0
    assert table.term("gamma").t_value == 0.0


def test_shape_checks():
    with pytest.raises(InvalidParameterError):
        analyze_factorial(np.ones((8, 1)), FACTORS)
    with pytest.raises(InvalidParameterError):
        analyze_factorial(np.ones((4, 3)), FACTORS)


def test_pareto_ranking():
    table = analyze_factorial(synthetic_responses(), FACTORS)
    ranked, t_crit = pareto_effects(table)
    assert ranked[0][0] == "n"
    assert len(ranked) == 7
    assert [abs_t for _, abs_t in ranked] == sorted((abs_t for _, abs_t in ranked), reverse=True)
    assert t_crit == table.t_crit
    assert pareto_rows(table)[0] == ["term", "abs_t"]
    assert factorial_rows(table)[1][:2] == ["const", None]


def test_small_factorial_run(small_db):
    run = factorial_2k(
        small_db,
        levels={"n": (4, 6), "max_generation": (2, 3)},
        replicates=2,
        seed=5,
        n_jobs=1,
    )
    assert run.factors == ("n", "max_generation")
    assert run.responses.shape == (4, 2)
    assert np.all(run.responses >= 0)
    assert run.treatments[1] == {"n": 6, "max_generation": 2}
    assert [term.name for term in run.table.terms] == ["const", "n", "max_generation", "n*max_generation"]
    assert len(responses_rows(run)) == 1 + 8


def test_factorial_is_reproducible(small_db):
    kwargs = dict(levels={"n": (4, 6), "gamma": (0.21, 1.0)}, replicates=3, seed=8)
    serial = factorial_2k(small_db, n_jobs=1, **kwargs)
    parallel = factorial_2k(small_db, n_jobs=2, **kwargs)
    assert np.array_equal(serial.responses, parallel.responses)


def test_factorial_arguments(small_db):
    with pytest.raises(InvalidParameterError):
        factorial_2k(small_db, replicates=1)
    with pytest.raises(InvalidParameterError):
        factorial_2k(small_db, levels={"seed": (1, 2)}, replicates=2)
