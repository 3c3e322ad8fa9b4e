import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from truss_shm.firefly import FaParams, Firefly, attractiveness, move_firefly, random_step, run
from truss_shm.utils.exceptions import InvalidParameterError
from truss_shm.utils.randomization import make_rng


def sphere(x: np.ndarray) -> float:
    return float(np.sum(x * x))


@pytest.fixture
def params():
    return FaParams(bounds=((-2.0, 2.0), (-2.0, 2.0)), n=15, max_generation=200, seed=11)


def test_defaults():
    params = FaParams.unit_box(4)
    assert (params.n, params.max_generation) == (40, 2500)
    assert (params.alpha0, params.beta0, params.gamma, params.delta, params.m_exp) == (0.2, 1.0, 1.0, 0.97, 2.0)
    assert params.dim == 4
    assert_array_equal(params.width, np.ones(4))


@pytest.mark.parametrize(
    "changes",
    [
        {"n": 1},
        {"max_generation": 0},
        {"alpha0": 1.5},
        {"beta0": 0.0},
        {"gamma": -1.0},
        {"delta": 0.0},
        {"delta": 1.2},
        {"m_exp": 1.0},
        {"bounds": ((1.0, 1.0),)},
        {"bounds": ()},
    ],
)
def test_invalid_parameters(changes):
    with pytest.raises(InvalidParameterError):
        FaParams.unit_box(2).replace(**changes)


def test_attractiveness():
    params = FaParams.unit_box(2, beta0=0.8, gamma=2.0)
    assert attractiveness(params, 0.0) == 0.8
    assert attractiveness(params, 0.5) == pytest.approx(0.8 * math.exp(-0.5))
    assert attractiveness(params.replace(gamma=0.0), 10.0) == 0.8


def test_move_without_randomness_reaches_the_brighter_firefly():
    params = FaParams.unit_box(2, gamma=0.0)
    dim = Firefly(np.array([0.1, 0.2]), -5.0)
    bright = Firefly(np.array([0.7, 0.4]), -1.0)
    moved = move_firefly(dim, bright, 0.0, params, make_rng(0))
    assert_allclose(moved.position, bright.position)
    assert moved.intensity == dim.intensity


def test_moves_stay_in_the_box():
    params = FaParams(bounds=((0.0, 1.0), (-3.0, 3.0)))
    rng = make_rng(5)
    firefly = Firefly(np.array([0.99, 2.9]))
    for _ in range(100):
        firefly = random_step(firefly, 1.0, params, rng)
        assert np.all(firefly.position >= params.lower)
        assert np.all(firefly.position <= params.upper)


def test_minimises_the_sphere(params):
    result = run(sphere, params)
    assert result.best_value < 1e-2
    assert sphere(result.best_position) == result.best_value
    assert np.all(np.abs(result.best_position) <= 2.0)


def test_history_never_gets_worse(params):
    result = run(sphere, params)
    assert result.history.shape == (200,)
    assert np.all(np.diff(result.history) <= 0)
    assert result.history[-1] == result.best_value


def test_every_firefly_moves_every_generation(params):
    result = run(sphere, params.replace(max_generation=10))
    assert result.evaluations >= params.n * (1 + 10)


def test_same_seed_same_run(params):
    assert run(sphere, params) == run(sphere, params)
    assert run(sphere, params) != run(sphere, params.replace(seed=12))


def test_initial_positions(params):
    initial = np.zeros((params.n, params.dim))
    result = run(sphere, params.replace(max_generation=1), initial=initial)
    assert result.best_value == 0.0


def test_non_finite_values_never_win():
    params = FaParams.unit_box(1, n=4, max_generation=5)

    def objective(x: np.ndarray) -> float:
        return math.nan if x[0] < 0.5 else float(x[0])

    result = run(objective, params, initial=[[0.1], [0.2], [0.8], [0.3]])
    assert math.isfinite(result.best_value)
    assert result.best_position[0] >= 0.5


def test_huge_gamma_leaves_only_the_random_step():
    params = FaParams.unit_box(2, gamma=1e12)
    dim = Firefly(np.array([0.1, 0.2]), -5.0)
    bright = Firefly(np.array([0.7, 0.4]), -1.0)
    assert attractiveness(params, 0.5) == 0.0
    moved = move_firefly(dim, bright, 0.3, params, make_rng(3))
    walked = random_step(dim, 0.3, params, make_rng(3))
    assert_array_equal(moved.position, walked.position)


def test_minimises_a_one_dimensional_parabola():
    params = FaParams.unit_box(1, n=25, max_generation=200, seed=4)
    result = run(lambda x: float((x[0] - 0.7) ** 2), params)
    assert result.best_value < 1e-4
    assert result.best_position[0] == pytest.approx(0.7, abs=1e-2)
