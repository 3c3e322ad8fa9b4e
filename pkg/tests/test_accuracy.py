from fractions import Fraction

import pytest

from truss_shm.database import Scenario, get_signature
from truss_shm.detection import NoiseSpec, add_noise, brute_force
from truss_shm.experiments import (
    NOISE_SETS,
    database_family,
    run_location_only,
    run_mode_count_study,
    run_noise_sweep,
    score,
)
from truss_shm.experiments.presets import FACTORIAL, MODE_COUNTS, SWEEP_LEVELS
from truss_shm.experiments.reports import accuracy_rows, mode_count_rows, sweep_rows
from truss_shm.firefly import FaParams
from truss_shm.utils.exceptions import InvalidParameterError, UsageError
from truss_shm.utils.randomization import make_rng


def test_presets():
    assert [noise_set.name for noise_set in NOISE_SETS] == ["N1", "N2", "N3", "N4"]
    assert NOISE_SETS[0].spec.is_zero
    assert (NOISE_SETS[3].spec.n_omega, NOISE_SETS[3].spec.n_phi) == (0.02, 0.05)
    assert MODE_COUNTS == (2, 4, 6, 8)
    assert SWEEP_LEVELS[0] == 0.04
    assert FACTORIAL.levels == {"n": (25, 40), "gamma": (0.21, 1.0), "max_generation": (2500, 5000)}
    assert FACTORIAL.replicates == 10


@pytest.mark.parametrize(
    ("true", "predicted", "expected"),
    [
        ("3:30,8:85", "3:30,8:85", (True, True, True)),
        ("3:30,8:85", "3:35,8:80", (True, False, True)),
        ("3:30,8:85", "3:50,8:85", (True, False, False)),
        ("3:30,8:85", "4:30,8:85", (False, False, False)),
        ("1:30,2:85", "9:30,12:85", (False, False, False)),
        ("3:30,8:85", "3:85,8:30", (True, False, False)),
        ("healthy", "healthy", (True, True, True)),
        ("3:30", "healthy", (False, False, False)),
    ],
)
def test_score(true, predicted, expected):
    assert score(Scenario.parse(true), Scenario.parse(predicted), grid_step=5) == expected


def test_family(small_db):
    family = database_family(small_db)
    assert sorted(family) == [2, 4, 6, 8]
    assert family[8] is small_db
    assert family[2].meta.n_modes == 2
    with pytest.raises(InvalidParameterError):
        database_family(small_db, (2, 10))


def test_zero_noise_sweep_is_exact(small_db):
    report = run_noise_sweep(small_db, noise_levels=(0.0,), iterations=6, seed=2, search="brute-force", n_jobs=1)
    (row,) = report.rows
    assert row.condition == (("noise_pct", 0.0), ("channel", "both"))
    assert row.trials == 6
    assert row.combined_acc == row.loc_acc == row.mag_acc == row.near_acc == 1
    assert all(record.objective == 0.0 for record in report.records)


def test_location_is_never_worse_than_combined(small_db):
    kwargs = dict(noise_levels=(0.05, 0.25), iterations=5, seed=4, search="brute-force", n_jobs=1)
    sweep = run_noise_sweep(small_db, **kwargs)
    location = run_location_only(small_db, **kwargs)
    assert [record.true_scenario for record in sweep.records] == [r.true_scenario for r in location.records]
    for row, location_row in zip(sweep.rows, location.rows):
        assert location.accuracy(location_row) >= sweep.accuracy(row)
    assert location.study == "location-only"


def test_channels(small_db):
    report = run_noise_sweep(
        small_db, noise_levels=(0.1,), iterations=2, seed=1, channel="omega", search="brute-force", n_jobs=1
    )
    assert report.rows[0].condition == (("noise_pct", 10.0), ("channel", "omega"))
    with pytest.raises(UsageError):
        run_noise_sweep(small_db, noise_levels=(0.1,), iterations=1, channel="freq", n_jobs=1)


def test_trials_do_not_depend_on_workers(small_db):
    kwargs = dict(noise_levels=(0.02, 0.1), iterations=3, seed=9, search="brute-force")
    assert run_noise_sweep(small_db, n_jobs=1, **kwargs) == run_noise_sweep(small_db, n_jobs=3, **kwargs)


def test_firefly_trials_record_their_seeds(small_db):
    params = FaParams.unit_box(2, n=6, max_generation=4)
    report = run_noise_sweep(small_db, noise_levels=(0.02,), iterations=2, seed=3, fa_params=params, n_jobs=1)
    seeds = [record.search_seed for record in report.records]
    assert len(set(seeds)) == 2
    assert all(record.predicted in small_db for record in report.records)


def test_mode_count_study(small_db):
    family = database_family(small_db, (4, 8))
    report = run_mode_count_study(
        family, trials_per_cell=2, seed=6, noise_sets=NOISE_SETS[:2], search="brute-force", n_jobs=1
    )
    assert [row.condition for row in report.rows] == [
        (("n_modes", 4), ("noise_set", "N1")),
        (("n_modes", 4), ("noise_set", "N2")),
        (("n_modes", 8), ("noise_set", "N1")),
        (("n_modes", 8), ("noise_set", "N2")),
    ]
    assert report.row(n_modes=8, noise_set="N1").combined_acc == 1
    assert report.row(n_modes=4, noise_set="N1").combined_acc == 1
    # the same true scenarios are tried with every mode count
    by_cell = {}
    for record in report.records:
        by_cell.setdefault(dict(record.condition)["noise_set"], []).append(record.true_scenario)
    assert by_cell["N1"][:2] == by_cell["N1"][2:]


def test_reports(small_db):
    report = run_noise_sweep(small_db, noise_levels=(0.0,), iterations=2, seed=2, search="brute-force", n_jobs=1)
    rows = sweep_rows(report)
    assert rows[0] == [
        "noise_pct", "iteration", "in_scenario", "out_scenario", "P", "D",
        "in_damage", "out_damage", "near", "scenario_seed", "noise_seed", "search_seed",
    ]
    assert [row[1] for row in rows[1:]] == [1, 2]
    for row, record in zip(rows[1:], report.records):
        assert row[6] == row[7] == record.true_scenario.label
        assert row[9:] == [record.scenario_seed, record.noise_seed, record.search_seed]
    assert accuracy_rows(report)[1][:2] == [0.0, 2]
    assert accuracy_rows(report)[1][2] == Fraction(1)

    family = database_family(small_db, (8,))
    grid = run_mode_count_study(
        family, trials_per_cell=2, seed=1, noise_sets=NOISE_SETS[:1], search="brute-force", n_jobs=1
    )
    header, row = mode_count_rows(grid)
    assert header[-1] == "trial_seeds"
    assert row[:3] == [8, "N1", 2]
    assert row[-1] == " ".join(
        f"{record.scenario_seed}:{record.noise_seed}:{record.search_seed}" for record in grid.records
    )


def test_recorded_seeds_replay_a_trial(small_db):
    report = run_noise_sweep(small_db, noise_levels=(0.1,), iterations=3, seed=8, search="brute-force", n_jobs=1)
    candidates = small_db.damaged_scenarios()
    for record in report.records:
        true = candidates[int(make_rng(record.scenario_seed).integers(len(candidates)))]
        assert true == record.true_scenario
        test = add_noise(get_signature(small_db, true), NoiseSpec(0.1, 0.1), make_rng(record.noise_seed))
        assert brute_force(test, small_db).scenario == record.predicted


def test_magnitude_needs_the_location(small_db):
    report = run_noise_sweep(small_db, noise_levels=(0.2, 0.4), iterations=6, seed=11, search="brute-force", n_jobs=1)
    for record in report.records:
        assert record.magnitude == (record.predicted == record.true_scenario)
    for row in report.rows:
        assert row.magnitude <= row.location


def test_study_sizes(small_db):
    with pytest.raises(InvalidParameterError):
        run_noise_sweep(small_db, iterations=-1)
    with pytest.raises(InvalidParameterError):
        run_mode_count_study({}, trials_per_cell=1)
