import dataclasses
import json

import pytest

from truss_shm.model import (
    DamageState,
    apply_damage,
    bar_length,
    dump_model,
    load_model,
    model_fingerprint,
    model_from_dict,
    model_to_dict,
    resolve_model,
)
from truss_shm.utils.exceptions import InvalidDamageError, ModelValidationError, UnknownBarError


def test_benchmark_dimensions(truss):
    assert len(truss.nodes) == 8
    assert truss.n_bars == 13
    assert truss.constrained_dofs == 3
    assert truss.free_dofs == 13
    assert bar_length(truss, 1) == pytest.approx(1.8288)
    assert bar_length(truss, 6) == pytest.approx((1.8288 ** 2 + 1.2142 ** 2) ** 0.5)


def test_resolve_builtin(truss):
    assert resolve_model("builtin") is truss
    assert resolve_model(None) is truss


def test_dump_and_load_keep_fingerprint(truss, tmp_path):
    path = tmp_path / "model.json"
    dump_model(truss, path)
    loaded = load_model(path)
    assert loaded == truss
    assert model_fingerprint(loaded) == model_fingerprint(truss)


def test_fingerprint_changes_with_material(truss):
    data = model_to_dict(truss)
    data["material"]["E"] = 1.9e11
    assert model_fingerprint(model_from_dict(data)) != model_fingerprint(truss)


def test_damage_reduces_modulus_only(truss):
    damaged = apply_damage(truss, DamageState({3: 0.3}))
    assert damaged.effective_modulus(3) == pytest.approx(0.7 * truss.material.young_modulus)
    assert damaged.effective_modulus(4) == truss.material.young_modulus
    assert damaged.material == truss.material
    assert model_fingerprint(damaged) == model_fingerprint(truss)


def test_damage_does_not_compound(truss):
    once = apply_damage(truss, DamageState({3: 0.3}))
    twice = apply_damage(once, DamageState({3: 0.3}))
    assert twice.effective_modulus(3) == once.effective_modulus(3)


def test_zero_damage_is_healthy():
    state = DamageState({2: 0.0})
    assert state.is_healthy
    assert state.damage == {}


@pytest.mark.parametrize("fraction", [-0.1, 1.0, 1.5])
def test_damage_outside_unit_interval(fraction):
    with pytest.raises(InvalidDamageError):
        DamageState({1: fraction})


def test_unknown_bar(truss):
    with pytest.raises(UnknownBarError):
        apply_damage(truss, DamageState({14: 0.2}))
    with pytest.raises(UnknownBarError):
        truss.bar(0)


def test_too_few_supports(truss):
    data = model_to_dict(truss)
    data["supports"] = [{"node": 1, "fix_x": True, "fix_y": True}]
    with pytest.raises(ModelValidationError):
        model_from_dict(data)


def test_bar_to_missing_node(truss):
    data = model_to_dict(truss)
    data["bars"][0]["j"] = 42
    with pytest.raises(ModelValidationError):
        model_from_dict(data)


def test_invalid_material(truss):
    with pytest.raises(ModelValidationError):
        dataclasses.replace(truss.material, young_modulus=0.0)


def test_malformed_model_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"nodes": []}), encoding="utf-8")
    with pytest.raises(ModelValidationError):
        load_model(path)
    path.write_text("{", encoding="utf-8")
    with pytest.raises(ModelValidationError):
        load_model(path)
