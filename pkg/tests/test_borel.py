import mpmath as mp
import numpy as np
import pytest

from borelsum import borel, model


def test_euler_borel_transform_is_geometric(euler):
    bf = euler.bfs[(0,)]
    for p in (0.3, -0.7, 0.5 + 0.5j, 2.5j):
        assert bf(p)[0] == pytest.approx(1 / (1 - p), rel=1e-10)


def test_continuation_beyond_disk(nonlinear):
    bf = nonlinear.bfs[(0,)]
    # beyond the Taylor disk the approximant must agree with a Cauchy-continued value from two sides
    a = bf(1.5j)[0]
    b = bf(1.5j * np.exp(0.01j))[0]
    assert abs(a - b) < 0.05 * abs(a)


def test_euler_stokes_constant(euler):
    assert euler.S == pytest.approx(2j * np.pi, rel=1e-12)


def test_linear_stokes_closed_form():
    from borelsum import checks
    P = checks.pipeline("linear")
    # Y0 = p^{1/2} (1 - p)^{-?}: S = 2 pi i / Gamma(4.5) for f0 = x^-4, beta = -1/2
    assert P.S == pytest.approx(2j * np.pi / float(mp.gamma(4.5)), rel=1e-8)


def test_nonlinear_stokes_stable_in_N():
    from borelsum import checks
    a = checks.pipeline("nonlinear", 40).S
    b = checks.pipeline("nonlinear", 60).S
    assert abs(a - b) < 1e-5 * abs(b)
    assert abs(b.real) < 1e-12


def test_germ_exponent_table():
    sys = model.load_spec(__import__("borelsum.checks").checks.DATA + "/nonlinear.json")
    e, log, mu = borel.germ_exponent(sys, (0,), 1, 0)
    assert e == pytest.approx(0.5) and mu == 2 and not log


def test_gammas_and_poles(euler):
    bf = euler.bfs[(0,)]
    ap = bf.approx[0]
    poles = ap.poles() if ap is not None else []
    assert not len(poles) or min(abs(np.asarray(poles) - 1)) < 1e-8


def test_jump_ratio_identity(nonlinear):
    d = model.derived(nonlinear.sys)
    r = borel.jump_ratio(nonlinear.bfs[(0,)], nonlinear.bfs[(1,)], np.linspace(1.02, 1.1, 4), int(d.m[0]))
    assert np.allclose(r, nonlinear.S, rtol=1e-6)
