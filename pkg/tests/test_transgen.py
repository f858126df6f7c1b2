import math

import numpy as np
import pytest

from borelsum import model, series, transgen
from borelsum.checks import _order_rel


def test_euler_coefficients_are_factorials():
    sys = model.scalar_system(0.0, {1: 1.0}, M=0, trunc_x=1, harness=True)
    h = transgen.generate(sys, 20, 2)
    a = series.to_complex(h.a0[:, 0])
    assert a[0] == 0
    for l in range(1, 21):
        assert a[l] == pytest.approx(math.factorial(l - 1))


def test_linear_y1_and_higher_vanish():
    sys = model.scalar_system(0.0, {1: 1.0}, M=0, trunc_x=1, harness=True)
    h = transgen.generate(sys, 10, 3)
    assert series.to_complex(h.u[(1,)][0, 0]) == 1
    for k in [(2,), (3,)]:
        assert not np.any(series.to_complex(h.u[k]))


def test_nonlinear_residuals(nonlinear):
    h = transgen.generate(nonlinear.sys, 30, 3)
    assert _order_rel(transgen.residual_y0(h)[:30], h.a0) < 1e-12
    for k in h.indices:
        assert _order_rel(transgen.residual_yk(h, k)[:30], h.u[k]) < 1e-12


def test_float_and_exact_agree(nonlinear):
    he = transgen.generate(nonlinear.sys, 15, 2, exact=True)
    hf = transgen.generate(nonlinear.sys, 15, 2, exact=False)
    a, b = series.to_complex(he.a0), series.to_complex(hf.a0)
    assert np.allclose(a, b, rtol=1e-10, atol=0)


def test_two_eigen_indices():
    sys = model.load_spec(__import__("borelsum.checks").checks.DATA + "/two_eigen.json")
    h = transgen.generate(sys, 12, 2)
    # arg x = 0: both exponentials decay (Re i sqrt2 = 0 is not decaying)
    assert h.active == [True, False]
    assert all(k[1] == 0 for k in h.indices)


def test_missing_predecessor(nonlinear):
    h = transgen.generate(nonlinear.sys, 10, 1)
    with pytest.raises(transgen.MissingPredecessor):
        transgen.gen_tk(h, (3,))
