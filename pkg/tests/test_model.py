import json

import numpy as np
import pytest

from borelsum import model


def test_derived_constants():
    sys = model.scalar_system(-0.5, {4: 1.0})
    d = model.derived(sys)
    assert d.m[0] == 2
    assert d.beta_prime[0] == pytest.approx(1.5)
    for b in (-0.25, -1.0, -2.7, -3.0):
        d = model.derived(model.scalar_system(b, {4: 1.0}, M=5))
        assert d.m[0] >= 1 and d.beta_prime[0].real - b == d.m[0]
        assert 1 <= d.beta_prime[0].real < 2


def test_complex_beta_floor_uses_real_part():
    sys = model.PreparedSystem(1, [1.0], [-0.5 + 2j], np.zeros((5, 1)), {}, 3, 4)
    d = model.derived(sys)
    assert d.m[0] == 2 and 1 <= d.beta_prime[0].real < 2


def test_spec_roundtrip(spec_path):
    for name in ("euler", "linear", "nonlinear", "two_eigen"):
        sys = model.load_spec(spec_path(name))
        again = model.system_from_dict(json.loads(json.dumps(model.system_to_dict(sys))))
        assert np.array_equal(again.f0, sys.f0) and np.array_equal(again.lam, sys.lam)
        assert again.g.keys() == sys.g.keys()


def test_validation_messages():
    assert model.validate_prepared(model.scalar_system(-0.5, {4: 1.0})) == []
    bad = model.scalar_system(0.5, {4: 1.0})
    assert any(v.startswith("n4") for v in model.validate_prepared(bad))
    low = model.scalar_system(-0.5, {2: 1.0})
    assert any("f0 order s=2" in v for v in model.validate_prepared(low))
    euler = model.scalar_system(0.0, {1: 1.0}, M=0, trunc_x=1, harness=True)
    assert model.validate_prepared(euler) and model.blocking_violations(euler) == []


def test_nonresonance():
    with pytest.raises(model.Resonant):
        model.check_nonresonance([1.0, 2.0], 2)
    rep = model.check_nonresonance([1.0, 1j * np.sqrt(2)], 3)
    assert not rep.resonant and rep.stokes_dirs


def test_nonresonance_monotone():
    lam = [1.0, 3.0]
    with pytest.raises(model.Resonant):
        model.check_nonresonance(lam, 3)
    with pytest.raises(model.Resonant):
        model.check_nonresonance(lam, 4)


def test_shift_to_n5_removes_low_orders():
    raw = model.scalar_system(-0.5, {2: 1.0, 3: 0.5}, {(0, 2): 1.0}, M=3, trunc_x=12)
    sh = model.shift_to_n5(raw, 3)
    assert not [v for v in model.validate_prepared(sh) if v.startswith("n5")]


def test_graded_order():
    ks = model.graded([True, True], 2)
    assert [sum(k) for k in ks] == sorted(sum(k) for k in ks)
    assert model.precedes((1, 0), (2, 1)) and not model.precedes((1, 2), (2, 1))
