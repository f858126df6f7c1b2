import mpmath as mp
import numpy as np
from hypothesis import given, settings, strategies as st

from borelsum import series
from borelsum.series import P, X, GenSeries

coef = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)
expo = st.sampled_from([0.5, 1.0, 1.5, 2.0, 1.25 + 0.5j])


def gs(e, c):
    return GenSeries(e, np.array(c, dtype=complex), P)


@settings(max_examples=60, deadline=None)
@given(expo, expo, st.lists(coef, min_size=1, max_size=6), st.lists(coef, min_size=1, max_size=6))
def test_conv_commutes(ea, eb, ca, cb):
    a, b = gs(ea, ca), gs(eb, cb)
    assert series.series_equal(series.conv_p(a, b), series.conv_p(b, a), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(expo, st.lists(coef, min_size=1, max_size=6))
def test_borel_laplace_inverse(e, c):
    a = GenSeries(e, np.array(c, dtype=complex), X)
    back = series.laplace_formal(series.borel(a))
    assert series.series_equal(back, a, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(expo, expo, st.lists(coef, min_size=1, max_size=5), st.lists(coef, min_size=1, max_size=5))
def test_borel_is_a_morphism(ea, eb, ca, cb):
    a = GenSeries(ea, np.array(ca, dtype=complex), X)
    b = GenSeries(eb, np.array(cb, dtype=complex), X)
    lhs = series.borel(series.mul_x(a, b))
    rhs = series.conv_p(series.borel(a), series.borel(b))
    assert series.series_equal(lhs, rhs, rtol=1e-10)


def test_beta_function_monomials_exact():
    with mp.workdps(30):
        got = series.conv_p(series.monomial(0.5, 0, P, exact=True), series.monomial(0.5, 0, P, exact=True))
        assert abs(got.coeffs[0] - mp.pi) < mp.mpf(10) ** -28
        assert complex(got.exponent) == 1.0


def test_add_offsets():
    a = GenSeries(1.0, np.array([1, 2, 3], complex), X)
    b = GenSeries(2.0, np.array([5, 7], complex), X)
    s = a + b
    assert np.allclose(s.coeffs, [1, 7, 10])


def test_nonsummable_exponent():
    a = GenSeries(0.0, np.array([1.0, 1.0], complex), X)
    try:
        series.borel(a)
    except series.NonsummableExponent:
        pass
    else:
        raise AssertionError("constant term should not be Borel transformable")


def test_json_roundtrip():
    a = GenSeries(1.5 + 0.5j, np.array([[1, 2j], [3, 4]], complex), P)
    b = GenSeries.from_json(a.to_json())
    assert series.series_equal(a, b, rtol=0)
