"""Generalized formal series in the x-plane and the Borel p-plane.

A ``GenSeries`` stands for

    plane X:  x^{-g} sum_l a_l x^{-l}
    plane P:  p^{g-1} sum_l b_l p^l

with ``g`` the exponent.  Coefficients are numpy arrays whose first axis is
the order ``l``; the remaining axes (if any) hold an n-vector.  Two number
types are supported: complex128 arrays, and object arrays of mpmath ``mpc``
for extended precision.  All operations propagate the smaller truncation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import mpmath as mp
import numpy as np
from scipy import special

X, P = "X", "P"
FLOAT_RTOL = 1e-12


class IncompatibleExponents(ValueError):
    pass


class NonsummableExponent(ValueError):
    pass


# ---------------------------------------------------------------------------
# number helpers

def is_mp(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


def to_mp(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype == object:
        return a
    out = np.empty(a.shape, dtype=object)
    for idx, v in np.ndenumerate(a):
        out[idx] = mp.mpc(complex(v))
    return out


def to_complex(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype != object:
        return a.astype(complex)
    out = np.empty(a.shape, dtype=complex)
    for idx, v in np.ndenumerate(a):
        out[idx] = complex(v)
    return out


def scalar(v, exact: bool):
    return mp.mpc(v) if exact else complex(v)


def gamma(z, exact: bool = False):
    """Complex Gamma; scipy in double precision, mpmath otherwise."""
    if exact:
        return mp.gamma(z)
    return complex(special.gamma(complex(z)))


def rgamma(z, exact: bool = False):
    if exact:
        return mp.rgamma(z)
    return complex(special.rgamma(complex(z)))


def gamma_ratio_table(g, count: int, exact: bool) -> np.ndarray:
    """Gamma(g + l) for l = 0..count-1 via forward recursion."""
    out = np.empty(count, dtype=object if exact else complex)
    if count == 0:
        return out
    out[0] = gamma(g, exact)
    for l in range(1, count):
        out[l] = out[l - 1] * (g + l - 1)
    return out


def zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(mp.mpc(0))
        return out
    return np.zeros(shape, dtype=complex)


def cauchy(a: np.ndarray, b: np.ndarray, N: int) -> np.ndarray:
    """Truncated Cauchy product along axis 0 with elementwise trailing axes."""
    exact = is_mp(a) or is_mp(b)
    if exact:
        a, b = to_mp(a), to_mp(b)
    shape = (N + 1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:])
    out = zeros(shape, exact)
    la, lb = min(len(a), N + 1), min(len(b), N + 1)
    if not exact and a.ndim == 1 and b.ndim == 1:
        return np.convolve(a[:la], b[:lb])[: N + 1] if la and lb else out
    for i in range(la):
        top = min(N + 1 - i, lb)
        if top <= 0:
            break
        out[i:i + top] = out[i:i + top] + a[i] * b[:top]
    return out


# ---------------------------------------------------------------------------
# GenSeries

@dataclass(frozen=True)
class GenSeries:
    exponent: complex
    coeffs: np.ndarray
    plane: str = X

    def __post_init__(self):
        if self.plane not in (X, P):
            raise ValueError("plane must be 'X' or 'P'")
        c = self.coeffs
        if not isinstance(c, np.ndarray):
            c = np.asarray(c)
            if c.dtype != object:
                c = c.astype(complex)
            object.__setattr__(self, "coeffs", c)
        if self.plane == P and self.exact:
            pass
        if self.plane == P and complex(self.exponent).real <= 0 and self.nonzero:
            raise NonsummableExponent("plane P requires Re(exponent) > 0")

    @property
    def exact(self) -> bool:
        return is_mp(self.coeffs)

    @property
    def trunc(self) -> int:
        return len(self.coeffs) - 1

    @property
    def nonzero(self) -> bool:
        return bool(np.any(to_complex(self.coeffs) != 0)) if self.exact else bool(np.any(self.coeffs != 0))

    @property
    def vshape(self) -> Tuple[int, ...]:
        return self.coeffs.shape[1:]

    def component(self, i: int) -> "GenSeries":
        return GenSeries(self.exponent, self.coeffs[:, i], self.plane)

    def truncate(self, N: int) -> "GenSeries":
        return GenSeries(self.exponent, self.coeffs[: N + 1], self.plane)

    def as_complex(self) -> "GenSeries":
        return GenSeries(complex(self.exponent), to_complex(self.coeffs), self.plane)

    def as_mp(self) -> "GenSeries":
        e = self.exponent if isinstance(self.exponent, mp.mpc) else mp.mpc(complex(self.exponent))
        return GenSeries(e, to_mp(self.coeffs), self.plane)

    def normalized(self) -> "GenSeries":
        """Strip leading zero coefficients into the exponent."""
        c = self.coeffs
        k = 0
        vals = to_complex(c) if self.exact else c
        while k < len(c) - 1 and not np.any(vals[k] != 0):
            k += 1
        return GenSeries(self.exponent + k, c[k:], self.plane)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, c):
        return scale(self, c)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        e = complex(self.exponent)
        vals = to_complex(self.coeffs)
        return {"exponent": [e.real, e.imag], "plane": self.plane,
                "coeffs": _json_array(vals)}

    @staticmethod
    def from_json(d: dict) -> "GenSeries":
        e = complex(*d["exponent"])
        return GenSeries(e, _from_json_array(d["coeffs"]), d["plane"])


def _json_array(vals: np.ndarray):
    if vals.ndim == 1:
        return [[float(v.real), float(v.imag)] for v in vals]
    return [_json_array(v) for v in vals]


def _from_json_array(obj) -> np.ndarray:
    def conv(o):
        if isinstance(o, list) and len(o) == 2 and all(isinstance(t, (int, float)) for t in o):
            return complex(o[0], o[1])
        return [conv(t) for t in o]
    return np.array(conv(obj), dtype=complex)


def zero_series(exponent, N: int, vshape=(), plane=X, exact=False) -> GenSeries:
    return GenSeries(exponent, zeros((N + 1,) + tuple(vshape), exact), plane)


def monomial(exponent, N: int = 0, plane=X, exact=False) -> GenSeries:
    c = zeros((N + 1,), exact)
    c[0] = scalar(1, exact)
    return GenSeries(exponent, c, plane)


def _int_offset(d) -> int:
    dc = complex(d)
    k = int(round(dc.real))
    if abs(dc.imag) > 1e-12 or abs(dc.real - k) > 1e-12:
        raise IncompatibleExponents(f"exponents differ by {dc}")
    return k


def add(a: GenSeries, b) -> GenSeries:
    """Sum of series whose exponents differ by an integer."""
    if not isinstance(b, GenSeries):
        if b == 0:
            return a
        raise TypeError("add expects a GenSeries or the scalar 0")
    if a.plane != b.plane:
        raise ValueError("cannot add series from different planes")
    d = _int_offset(b.exponent - a.exponent)
    if d < 0:
        a, b, d = b, a, -d
    # result exponent is a's; b shifted by d orders
    N = min(a.trunc, b.trunc + d)
    exact = a.exact or b.exact
    ca = to_mp(a.coeffs) if exact else a.coeffs
    cb = to_mp(b.coeffs) if exact else b.coeffs
    out = zeros((N + 1,) + np.broadcast_shapes(ca.shape[1:], cb.shape[1:]), exact)
    out = out + ca[: N + 1]
    if d <= N:
        out[d:] = out[d:] + cb[: N + 1 - d]
    return GenSeries(a.exponent, out, a.plane)


def scale(a: GenSeries, c) -> GenSeries:
    if a.exact and not isinstance(c, (mp.mpc, mp.mpf)):
        c = mp.mpc(complex(c)) if not isinstance(c, np.ndarray) else to_mp(c)
    return GenSeries(a.exponent, a.coeffs * c, a.plane)


def mul_x(a: GenSeries, b: GenSeries) -> GenSeries:
    """Formal product in the x-plane: exponents add, coefficients convolve."""
    if a.plane != X or b.plane != X:
        raise ValueError("mul_x needs plane X")
    N = min(a.trunc, b.trunc)
    return GenSeries(a.exponent + b.exponent, cauchy(a.coeffs, b.coeffs, N), X)


def conv_p(a: GenSeries, b: GenSeries) -> GenSeries:
    """Borel-plane convolution, termwise p^q * p^r = B(q+1, r+1) p^{q+r+1}."""
    if a.plane != P or b.plane != P:
        raise ValueError("conv_p needs plane P")
    N = min(a.trunc, b.trunc)
    exact = a.exact or b.exact
    ga = gamma_ratio_table(a.exponent, N + 1, exact)
    gb = gamma_ratio_table(b.exponent, N + 1, exact)
    gc = gamma_ratio_table(a.exponent + b.exponent, N + 1, exact)
    ca = _weight(a.coeffs[: N + 1], ga)
    cb = _weight(b.coeffs[: N + 1], gb)
    c = cauchy(ca, cb, N)
    return GenSeries(a.exponent + b.exponent, _weight(c, 1 / gc if not exact else
                                                       np.array([1 / v for v in gc], dtype=object)), P)


def _weight(c: np.ndarray, w: np.ndarray) -> np.ndarray:
    if is_mp(c) or w.dtype == object:
        c = to_mp(c)
    return c * w.reshape((-1,) + (1,) * (c.ndim - 1))


def borel(a: GenSeries) -> GenSeries:
    """Termwise x^{-g-l} -> p^{g+l-1} / Gamma(g+l)."""
    if a.plane != X:
        raise ValueError("borel needs plane X")
    a = _lift_exponent(a)
    N = a.trunc
    g = gamma_ratio_table(a.exponent, N + 1, a.exact)
    inv = np.array([1 / v for v in g], dtype=object) if a.exact else 1 / g
    return GenSeries(a.exponent, _weight(a.coeffs, inv), P)


def _lift_exponent(a: GenSeries) -> GenSeries:
    c = a.coeffs
    e = a.exponent
    k = 0
    vals = to_complex(c) if a.exact else c
    while complex(e + k).real <= 0:
        if k >= len(c):
            return GenSeries(e + k, c[:1] * 0, a.plane)
        if np.any(vals[k] != 0):
            raise NonsummableExponent(
                f"term x^({-complex(e + k)}) has Re(exponent) <= 0; carry it separately")
        k += 1
    return GenSeries(e + k, c[k:], a.plane) if k else a


def laplace_formal(a: GenSeries) -> GenSeries:
    """Termwise p^{g+l-1} -> Gamma(g+l) x^{-g-l}; left inverse of ``borel``."""
    if a.plane != P:
        raise ValueError("laplace_formal needs plane P")
    g = gamma_ratio_table(a.exponent, a.trunc + 1, a.exact)
    return GenSeries(a.exponent, _weight(a.coeffs, g), X)


def series_equal(a: GenSeries, b: GenSeries, rtol: float = FLOAT_RTOL) -> bool:
    """Equality to the smaller truncation (exact for mp, relative otherwise)."""
    if a.plane != b.plane:
        return False
    if abs(complex(a.exponent) - complex(b.exponent)) > 0:
        return False
    N = min(a.trunc, b.trunc)
    ca, cb = a.coeffs[: N + 1], b.coeffs[: N + 1]
    if a.exact and b.exact:
        return all(x == y for x, y in zip(ca.ravel(), cb.ravel()))
    ca, cb = to_complex(ca), to_complex(cb)
    scale_ = max(1.0, float(np.max(np.abs(ca))) if ca.size else 1.0)
    return bool(np.all(np.abs(ca - cb) <= rtol * np.maximum(np.abs(ca), np.abs(cb)) + 1e-300 * scale_))


def evaluate_p(a: GenSeries, p) -> complex:
    """Direct evaluation of the truncated Borel-plane series at p."""
    if a.plane != P:
        raise ValueError("evaluate_p needs plane P")
    c = to_complex(a.coeffs)
    p = complex(p)
    return p ** (complex(a.exponent) - 1) * np.polyval(c[::-1], p)


# ---------------------------------------------------------------------------
# transseries container

@dataclass
class Transseries:
    """Terms ``k -> (series, rate k.lambda, power k.m)`` plus constants C."""

    terms: Dict[Tuple[int, ...], Tuple[GenSeries, complex, int]] = field(default_factory=dict)
    C: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    def weight(self, k) -> complex:
        out = 1.0 + 0j
        for c, e in zip(self.C, k):
            out *= complex(c) ** e
        return out

    def evaluate_truncated(self, x: complex, orders: int) -> np.ndarray:
        """Sum each term's first ``orders`` coefficients at x (diagnostic)."""
        total = 0
        for k, (s, rate, power) in self.terms.items():
            c = to_complex(s.coeffs[:orders])
            xs = x ** (-(complex(s.exponent) + np.arange(len(c))))
            val = np.tensordot(xs, c, axes=(0, 0))
            total = total + self.weight(k) * np.exp(-rate * x) * x**power * val
        return total
