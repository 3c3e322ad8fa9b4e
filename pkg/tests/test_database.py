import json

import numpy as np
import pytest

from truss_shm.database import (
    Scenario,
    ScenarioDatabase,
    build_database,
    check_fingerprint,
    enumerate_scenarios,
    get_signature,
    grid_levels,
    load_database,
    load_signature,
    save_database,
    save_signature,
    truncate_database,
    verify_database,
)
from truss_shm.fem import ModalSignature, modal_signature
from truss_shm.model import DamageState, apply_damage, model_from_dict, model_to_dict
from truss_shm.utils.exceptions import (
    DatabaseFormatError,
    DatabaseVersionError,
    FingerprintMismatchError,
    InvalidParameterError,
    ScenarioError,
)


def test_scenario_parsing():
    scenario = Scenario.parse("8:85, 3:30")
    assert scenario.damaged == ((3, 30), (8, 85))
    assert str(scenario) == "3:30,8:85"
    assert scenario.label == "30-85"
    assert Scenario.parse("healthy").is_healthy
    assert str(Scenario()) == "healthy"


def test_scenario_canonical_form():
    assert Scenario.of([(5, 40), (2, 0), (5, 60)]) == Scenario(((5, 60),))
    assert Scenario.parse("3:30").damage_state() == DamageState({3: 0.3})


@pytest.mark.parametrize("text", ["3", "3:x", "a:30"])
def test_unparsable_scenario(text):
    with pytest.raises(ScenarioError):
        Scenario.parse(text)


def test_grid_levels():
    assert grid_levels(5) == tuple(range(5, 96, 5))
    assert grid_levels(30) == (5, 35, 65, 95)
    assert grid_levels(100) == (5,)
    for step in (0, 7):
        with pytest.raises(InvalidParameterError):
            grid_levels(step)


def test_enumeration_order(truss):
    scenarios = enumerate_scenarios(truss, 2, 90)
    assert scenarios[0].is_healthy
    assert scenarios[1:3] == [Scenario(((1, 5),)), Scenario(((1, 95),))]
    assert scenarios[27] == Scenario(((1, 5), (2, 5)))
    assert len(scenarios) == 1 + 13 * 2 + 78 * 4
    assert [s.sort_key for s in scenarios] == sorted(s.sort_key for s in scenarios)


def test_full_grid_size(truss):
    assert len(enumerate_scenarios(truss, 1, 5)) == 1 + 13 * 19
    assert len(enumerate_scenarios(truss, 2, 5)) == 28406


def test_enumeration_limits(truss):
    with pytest.raises(InvalidParameterError):
        enumerate_scenarios(truss, 0, 5)
    with pytest.raises(InvalidParameterError):
        enumerate_scenarios(truss, 14, 5)


def test_database_entries(truss, small_db):
    assert len(small_db) == 53
    assert small_db.meta.n_modes == 8
    assert small_db.n_dofs == 13
    assert small_db.healthy == modal_signature(truss, 8)

    scenario = Scenario.parse("4:65")
    expected = modal_signature(apply_damage(truss, DamageState({4: 0.65})), 8)
    assert get_signature(small_db, scenario) == expected


def test_lookup_off_the_grid(small_db):
    with pytest.raises(ScenarioError):
        get_signature(small_db, Scenario.parse("4:50"))
    with pytest.raises(ScenarioError):
        get_signature(small_db, Scenario.parse("4:35,5:35"))
    with pytest.raises(ScenarioError):
        get_signature(small_db, Scenario.parse("14:35"))


def test_parallel_build_is_identical(truss):
    serial = build_database(truss, max_damaged_bars=1, grid_step=90, n_modes=3, n_jobs=1)
    parallel = build_database(truss, max_damaged_bars=1, grid_step=90, n_modes=3, n_jobs=2)
    assert serial == parallel


def test_round_trip_is_byte_identical(small_db, tmp_path):
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    save_database(small_db, first)
    loaded = load_database(first)
    save_database(loaded, second)
    assert loaded == small_db
    assert first.read_bytes() == second.read_bytes()


def test_file_layout(small_db, tmp_path):
    path = tmp_path / "db.json"
    save_database(small_db, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 53 + 1
    document = json.loads(path.read_text(encoding="utf-8"))
    assert document["version"] == 1
    assert document["generator"].startswith("truss-shm ")
    assert document["config_hash"] == small_db.meta.config_hash
    assert len(document["config_hash"]) == 16
    assert document["seed"] == 0
    assert document["entries"][0]["scenario"] == []
    assert len(document["entries"][1]["signature"]["omegas"]) == 8
    assert len(document["entries"][1]["signature"]["modes"]) == 8
    assert len(document["entries"][1]["signature"]["modes"][0]) == 13


def test_corrupt_database(tmp_path):
    path = tmp_path / "db.json"
    path.write_text('{"version": 1, "entries": [', encoding="utf-8")
    with pytest.raises(DatabaseFormatError) as info:
        load_database(path)
    assert info.value.offset == 27


def test_unsupported_version(small_db, tmp_path):
    path = tmp_path / "db.json"
    save_database(small_db, path)
    text = path.read_text(encoding="utf-8").replace('"version":1', '"version":2', 1)
    path.write_text(text, encoding="utf-8")
    with pytest.raises(DatabaseVersionError):
        load_database(path)


def test_duplicate_entry(small_db, tmp_path):
    path = tmp_path / "db.json"
    save_database(small_db, path)
    document = json.loads(path.read_text(encoding="utf-8"))
    document["entries"].append(document["entries"][1])
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(DatabaseFormatError):
        load_database(path)


def test_missing_database_file(tmp_path):
    with pytest.raises(DatabaseFormatError):
        load_database(tmp_path / "nowhere.json")


def test_signature_file(small_db, tmp_path):
    path = tmp_path / "signature.json"
    signature = get_signature(small_db, Scenario.parse("2:95"))
    save_signature(signature, path)
    assert load_signature(path) == signature


def test_truncation(truss, small_db):
    four = truncate_database(small_db, 4)
    assert four.meta.n_modes == 4
    assert len(four) == len(small_db)
    assert four.healthy == modal_signature(truss, 4)
    assert truncate_database(small_db, 8) is small_db
    with pytest.raises(InvalidParameterError):
        truncate_database(small_db, 9)


def test_fingerprint_check(truss, small_db):
    check_fingerprint(small_db, truss)
    data = model_to_dict(truss)
    data["material"]["rho"] = 2700.0
    other = model_from_dict(data)
    with pytest.raises(FingerprintMismatchError):
        check_fingerprint(small_db, other)
    check_fingerprint(small_db, other, force=True)


def test_sound_database_verifies(truss, small_db):
    summary = verify_database(small_db, truss, sample=0.2, seed=3)
    assert summary == {"checked": 11, "entries": 53, "problems": []}


def test_tampered_database_fails_verification(truss, small_db):
    entries = dict(small_db.entries)
    scenario = Scenario.parse("1:5")
    entries[scenario] = ModalSignature(entries[scenario].frequencies * 1.01, entries[scenario].modes)
    tampered = ScenarioDatabase(small_db.meta, entries)
    summary = verify_database(tampered, truss, sample=1.0)
    assert summary["checked"] == 53
    assert summary["problems"]
    assert all(problem.startswith("1:5") for problem in summary["problems"])


def test_verification_sample_range(truss, small_db):
    with pytest.raises(InvalidParameterError):
        verify_database(small_db, truss, sample=0.0)


def test_signature_modes_are_finite(small_db):
    for signature in small_db.entries.values():
        assert np.all(np.isfinite(signature.modes))
        assert np.all(signature.frequencies > 0)


def test_header_records_the_run(truss):
    db = build_database(truss, max_damaged_bars=1, grid_step=90, n_modes=2, n_jobs=1, config_hash="abc123", seed=17)
    assert (db.meta.config_hash, db.meta.seed) == ("abc123", 17)
    other_grid = build_database(truss, max_damaged_bars=1, grid_step=100, n_modes=2, n_jobs=1)
    default = build_database(truss, max_damaged_bars=1, grid_step=90, n_modes=2, n_jobs=1)
    assert default.meta.config_hash != other_grid.meta.config_hash
    assert truncate_database(db, 1).meta.seed == 17
