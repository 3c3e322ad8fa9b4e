import numpy as np
import pytest
from numpy.testing import assert_array_equal

from truss_shm.database import Scenario, get_signature
from truss_shm.detection import (
    NoiseSpec,
    Weights,
    add_noise,
    brute_force,
    decode,
    detect,
    encode,
    objective,
    search_dimension,
)
from truss_shm.fem import ModalSignature
from truss_shm.firefly import FaParams
from truss_shm.utils.exceptions import DimensionMismatchError, InvalidParameterError
from truss_shm.utils.randomization import make_rng

FAST_SEARCH = FaParams.unit_box(2, n=12, max_generation=25, seed=4)


def test_objective_of_identical_signatures_is_zero(small_db):
    signature = get_signature(small_db, Scenario.parse("6:35"))
    assert objective(signature, signature, Weights.like(signature)) == 0.0


def test_objective_ignores_mode_sign(small_db):
    signature = get_signature(small_db, Scenario.parse("6:35"))
    flipped = ModalSignature(signature.frequencies, -signature.modes)
    assert objective(signature, flipped, Weights.like(signature)) == 0.0


def test_objective_terms(small_db):
    healthy = small_db.healthy
    shifted = ModalSignature(healthy.frequencies * 2.0, healthy.modes)
    # every frequency ratio is 1/2
    assert objective(healthy, shifted, Weights.like(healthy)) == pytest.approx(8 * 0.25)

    weights = Weights(np.zeros(8), np.zeros((8, 13)))
    assert objective(healthy, shifted, weights) == 0.0


def test_objective_shape_mismatch(small_db):
    healthy = small_db.healthy
    with pytest.raises(DimensionMismatchError):
        objective(healthy.truncated(4), healthy, Weights.like(healthy))
    with pytest.raises(DimensionMismatchError):
        objective(healthy, healthy, Weights.uniform(4, 13))


def test_zero_frequency_candidate(small_db):
    healthy = small_db.healthy
    broken = ModalSignature(np.zeros(8), healthy.modes)
    with pytest.raises(InvalidParameterError):
        objective(healthy, broken, Weights.like(healthy))


def test_zero_noise_is_identity(small_db):
    assert add_noise(small_db.healthy, NoiseSpec(), make_rng(1)) is small_db.healthy


def test_noise_amplitude(small_db):
    healthy = small_db.healthy
    noisy = add_noise(healthy, NoiseSpec(0.02, 0.05), make_rng(1))
    assert np.all(np.abs(noisy.frequencies / healthy.frequencies - 1) <= 0.02 + 1e-12)
    nonzero = healthy.modes != 0
    assert np.all(np.abs(noisy.modes[nonzero] / healthy.modes[nonzero] - 1) <= 0.05 + 1e-12)
    assert noisy != healthy


def test_noise_is_reproducible(small_db):
    spec = NoiseSpec.uniform(0.1)
    assert add_noise(small_db.healthy, spec, make_rng(9)) == add_noise(small_db.healthy, spec, make_rng(9))


def test_negative_noise():
    with pytest.raises(InvalidParameterError):
        NoiseSpec(-0.01, 0.0)


def test_position_encoding(small_db, pair_db):
    for db in (small_db, pair_db):
        for scenario in db.entries:
            position = encode(scenario, db)
            assert position.shape == (search_dimension(db),)
            assert decode(position, db) == scenario


def test_decode_edges(small_db, pair_db):
    assert decode(np.zeros(2), small_db).is_healthy
    assert decode(np.array([1.0, 1.0]), small_db) == Scenario.parse("13:95")
    assert decode(np.array([-3.0, 7.0]), small_db) == Scenario.parse("1:95")
    # both slots on the same bar merge into one
    assert decode(np.array([0.01, 0.5, 0.02, 1.0]), pair_db) == Scenario.parse("1:95")
    with pytest.raises(DimensionMismatchError):
        decode(np.zeros(3), small_db)


def test_brute_force_recovers_every_scenario(small_db):
    for scenario, signature in small_db.entries.items():
        prediction = brute_force(signature, small_db)
        assert prediction.scenario == scenario
        assert prediction.objective_value == 0.0
        assert prediction.runner_up_gap > 0
        assert prediction.evaluations == 53


def test_detect_never_beats_the_oracle(small_db):
    rng = make_rng(21)
    for index, scenario in enumerate(small_db.damaged_scenarios()[::10]):
        test = add_noise(get_signature(small_db, scenario), NoiseSpec(0.01, 0.03), rng)
        found = detect(test, small_db, fa_params=FAST_SEARCH.replace(seed=index))
        oracle = brute_force(test, small_db)
        assert found.objective_value >= oracle.objective_value
        recomputed = objective(test, get_signature(small_db, found.scenario), Weights.like(test))
        assert found.objective_value == recomputed


def test_detect_finds_a_healthy_structure(small_db):
    # the healthy band covers an eighth of the box, so a swarm of 40 starts inside it
    prediction = detect(small_db.healthy, small_db, fa_params=FAST_SEARCH.replace(n=40, max_generation=5))
    assert prediction.scenario.is_healthy
    assert prediction.objective_value == 0.0


def test_detect_is_deterministic(small_db):
    test = get_signature(small_db, Scenario.parse("9:65"))
    first = detect(test, small_db, fa_params=FAST_SEARCH)
    second = detect(test, small_db, fa_params=FAST_SEARCH)
    assert first == second


def test_detect_with_masked_weights(small_db):
    test = get_signature(small_db, Scenario.parse("9:65"))
    weights = Weights(np.ones(8), np.zeros((8, 13)))
    prediction = detect(test, small_db, weights=weights, fa_params=FAST_SEARCH)
    assert prediction.objective_value >= 0.0


def test_prediction_document(small_db):
    prediction = brute_force(get_signature(small_db, Scenario.parse("2:35")), small_db)
    document = prediction.to_json()
    assert document["scenario"] == "2:35"
    assert document["damaged"] == [[2, 35]]
    assert document["objective"] == 0.0
    assert set(document) == {"scenario", "damaged", "objective", "runner_up_gap", "evaluations"}


def test_weights_shape():
    weights = Weights.uniform(3, 5)
    assert weights.shape == (3, 5)
    assert_array_equal(weights.w_omega, np.ones(3))
