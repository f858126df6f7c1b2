import mpmath as mp
import numpy as np
import pytest

from borelsum import model
from borelsum import sum as bsum


def ei_balanced(x):
    return float(mp.e ** (-x) * mp.ei(x))


def test_euler_laplace_off_line(euler):
    bf = euler.bfs[(0,)]
    x = 5.0
    ref = complex(mp.quad(lambda t: mp.exp(-x * t * mp.exp(0.25j * mp.pi)) / (1 - t * mp.exp(0.25j * mp.pi))
                          * mp.exp(0.25j * mp.pi), [0, mp.inf]))
    assert bsum.laplace_ray(bf, x, np.pi / 4)[0] == pytest.approx(ref, rel=1e-11)


def test_euler_lateral_jump(euler):
    bf = euler.bfs[(0,)]
    x = 10.0
    jump = bsum.lateral_sum(bf, x, +1)[0] - bsum.lateral_sum(bf, x, -1)[0]
    # the upper lateral sum exceeds the lower one by 2 pi i e^{-x}
    assert jump == pytest.approx(2j * np.pi * np.exp(-x), rel=1e-8)


def test_euler_balanced_is_principal_value(euler):
    for x in (8.0, 10.0, 20.0):
        y = bsum.averaged_sum(euler.bfs, euler.sys, x, 0.5, euler.S)[0]
        assert y.real == pytest.approx(ei_balanced(x), rel=1e-11)
        assert abs(y.imag) < 1e-12


def test_conjugation_symmetry(nonlinear):
    bf = nonlinear.bfs[(0,)]
    x = 9.0 + 0.5j
    up = bsum.lateral_sum(bf, x, +1, phi=0.0)[0]
    dn = bsum.lateral_sum(bf, np.conj(x), -1, phi=0.0)[0]
    assert up == pytest.approx(np.conj(dn), rel=1e-9)


def test_alpha_family_reflection(nonlinear):
    x = 10.0
    f = lambda a: bsum.averaged_sum(nonlinear.bfs, nonlinear.sys, x, a, nonlinear.S)[0]
    for a in (0.3, 0.1 + 0.2j):
        assert abs(f(1 - np.conj(a)) - np.conj(f(a))) < 1e-11


def test_alpha_family_affine_in_loops(nonlinear):
    # loop j enters with weight (-alpha S)^j: a polynomial in alpha of degree ~ loop count
    x = 10.0
    al = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    ys = np.array([bsum.averaged_sum(nonlinear.bfs, nonlinear.sys, x, a, nonlinear.S)[0] for a in al])
    coef = np.polyfit(al, ys, 4)
    base = bsum.lateral_sum(nonlinear.bfs[(0,)], x, +1)[0]
    assert coef[-1] == pytest.approx(base, rel=1e-9)


def test_analytic_ray_average_is_plain_sum(euler):
    # Y_1 = 1 for the Euler harness is entire
    x = 10.0
    plain = bsum.laplace_ray(euler.bfs[(1,)], x, 0.0)[0]
    assert plain == pytest.approx(1 / x, rel=1e-12)
    for a in (0.0, 0.5, 1.0):
        got = bsum.averaged_sum(euler.bfs, euler.sys, x, a, euler.S, k=(1,))[0]
        assert got == pytest.approx(plain, rel=1e-12)


def test_above_line_alpha0_is_ray_sum(nonlinear):
    x = 10.0 * np.exp(0.4j)
    plain = bsum.laplace_ray(nonlinear.bfs[(0,)], x, 0.4)[0]
    got = bsum.averaged_sum(nonlinear.bfs, nonlinear.sys, x, 0.0, nonlinear.S, phi=0.4)[0]
    assert got == pytest.approx(plain, rel=1e-10)


def test_ray_through_singularity_raises(euler):
    with pytest.raises(bsum.RayHitsSingularity):
        bsum.laplace_ray(euler.bfs[(0,)], 10.0, 0.0)


def test_smallness_guard(nonlinear):
    with pytest.raises(bsum.SmallnessViolated) as e:
        bsum.sum_transseries(nonlinear.bfs, nonlinear.sys, 3.0, [50.0], 0.5, nonlinear.S)
    assert e.value.k == (1,)


def test_optimal_truncation_euler():
    a = [0.0] + [float(mp.factorial(l - 1)) for l in range(1, 30)]
    val, idx = bsum.optimal_truncation(a, 0, 10.0)
    assert 9 <= idx <= 11
    assert abs(val - ei_balanced(10.0)) < 2 * a[idx] * 10.0 ** -idx


def test_stokes_jump_euler(euler):
    r = bsum.stokes_jump(euler.bfs, euler.sys, euler.S, 0.0)
    assert r.C_plus == pytest.approx(2j * np.pi, rel=1e-8)
    assert r.C_zero == pytest.approx(1j * np.pi, rel=1e-8)
