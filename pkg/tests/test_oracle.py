import numpy as np
import pytest

from borelsum import model, oracle


def test_kernel_convolution_exact():
    h, J = 0.01, 100
    one = oracle.kernel(0, 0.0, h, J) if False else oracle.from_function(lambda p: np.ones_like(p), 0.0, h, J)
    c = oracle.cumulative(one)
    assert np.allclose(c.values()[:, 0], h * np.arange(J + 1), atol=1e-14)


def test_singular_moments():
    h, J = 0.01, 100
    a = oracle.from_function(lambda p: np.ones_like(p), 0.0, h, J, gamma=0.5)
    b = oracle.from_function(lambda p: np.ones_like(p), 0.0, h, J, gamma=0.5)
    c = oracle.conv_grid(a, b)
    # p^{-1/2} * p^{-1/2} = pi
    assert np.allclose(c.values()[1:, 0], np.pi, rtol=1e-12)


def test_euler_exact():
    sys = model.scalar_system(0.0, {1: 1.0}, M=0, trunc_x=1, harness=True)
    Y, info = oracle.solve_Y0(sys, 0.0, 0.01, 50)
    assert np.allclose(Y.A[:, 0], 1 / (1 - Y.p), rtol=1e-13)


def test_grid_matches_series(nonlinear):
    h, J = 2e-3, 400
    Y, info = oracle.solve_Y0(nonlinear.sys, 0.0, h, J)
    ref = nonlinear.bfs[(0,)](Y.p[1:J])
    assert np.max(np.abs(Y.A[1:J] - ref)) < 1e-5
    assert info.iterations < 40


def test_grid_Y1_matches_series(nonlinear):
    h, J = 2e-3, 300
    Y0, _ = oracle.solve_Y0(nonlinear.sys, 0.0, h, J)
    Y1, _ = oracle.solve_Yk(nonlinear.sys, {(0,): Y0}, (1,))
    ref = nonlinear.bfs[(1,)].A(Y1.p[1:J])
    got = Y1.A[1:J]
    assert np.max(np.abs(got - ref)) < 1e-4 * np.max(np.abs(ref))


def test_off_axis_ray(nonlinear):
    h, J = 2e-3, 300
    Y, _ = oracle.solve_Y0(nonlinear.sys, 0.5, h, J)
    ref = nonlinear.bfs[(0,)](Y.p[1:J])
    assert np.max(np.abs(Y.A[1:J] - ref)) < 1e-5


def test_weighted_norm_decreases():
    Y = oracle.from_function(lambda p: 1 / (1 - p), 0.0, 0.01, 50)
    norms = [oracle.weighted_norm(Y, nu) for nu in (1, 5, 25)]
    assert norms[0] > norms[1] > norms[2]


def test_csv(tmp_path):
    Y = oracle.from_function(lambda p: p, 0.0, 0.1, 4)
    path = tmp_path / "y.csv"
    Y.to_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("p_re,p_im,Y1_re") and len(lines) == 6


def test_germ_match_half_interval(nonlinear):
    h = 1e-3
    J = 500
    Y, _ = oracle.solve_Y0(nonlinear.sys, 0.0, h, J)
    ref = nonlinear.bfs[(0,)](Y.p[1:J])
    assert np.max(np.abs(Y.A[1:J] - ref)) < 1e-6


def test_seed_scaling(nonlinear):
    h, J = 4e-3, 150
    Y0, _ = oracle.solve_Y0(nonlinear.sys, 0.0, h, J)
    g1 = {(0,): Y0}
    g2 = {(0,): Y0}
    for k in [(1,), (2,)]:
        g1[k] = oracle.solve_Yk(nonlinear.sys, g1, k, seed=1.0)[0]
        g2[k] = oracle.solve_Yk(nonlinear.sys, g2, k, seed=2.0)[0]
    for k in [(1,), (2,)]:
        assert np.allclose(g2[k].A[1:], 2 ** sum(k) * g1[k].A[1:], rtol=1e-9)
