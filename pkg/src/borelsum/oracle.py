"""Grid solution of the Borel-plane convolution equations.

In the Borel plane the prepared system reads

    (Lambda - p) Y_0 = F_0 - B (1 * Y_0) + sum_{s,l} g_{s,l} (p^{s-1}/Gamma(s)) * Y_0^{*l},

and, for the coefficient of C^k,

    (Lambda - k.lambda - p) Y_k + (B + k.m)(1 * Y_k) = [C^k] sum g_{s,l} K_s * Z^{*l},

with Z = Y_0 + sum_q C^q Y_q and K_s = p^{s-1}/Gamma(s) (K_0 the unit).
For k = e_j the j-th component is resonant; its solution is

    Y = p^{g-1} [1/Gamma(g) - rho/p - g int_0^p rho(s)/s^2 ds],   R = p^{g-1} rho,

with g = beta'_j, which fixes the normalisation Y ~ p^{g-1}/Gamma(g).

Grid functions store the smooth factor A of Y = p^{gamma-1} A on
p = j h e^{i phi}.  Convolutions use product integration against the
weight s^a (p-s)^b (piecewise-linear interpolation of the smooth part,
exact moments through incomplete beta functions), which reduces to the
trapezoid rule when a = b = 0.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import beta as beta_fn, betainc, gamma as gamma_fn

from . import model
from .model import MultiIndex

TOL = 1e-12
MAX_ITER = 200


class NotContracting(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


@dataclass
class GridFunction:
    phi: float
    h: float
    A: np.ndarray          # (J+1, n) smooth factor
    gamma: float = 1.0     # Y = p^{gamma-1} A

    @property
    def J(self) -> int:
        return self.A.shape[0] - 1

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.h * np.arange(self.J + 1)

    @property
    def p(self) -> np.ndarray:
        return self.t * np.exp(1j * self.phi)

    def values(self) -> np.ndarray:
        """Y on the grid (the p = 0 row is the limit, inf or 0 if gamma != 1)."""
        if self.gamma == 1:
            return self.A.copy()
        p = self.p
        with np.errstate(divide="ignore", invalid="ignore"):
            pw = np.where(p == 0, 0.0 if self.gamma > 1 else np.inf, p ** (self.gamma - 1))
        return pw[:, None] * self.A

    def with_gamma(self, gamma: float) -> "GridFunction":
        """Same function written against a smaller origin exponent."""
        d = self.gamma - gamma
        if abs(d) < 1e-14:
            return self
        if d < 0:
            raise ValueError("can only lower the origin exponent")
        return GridFunction(self.phi, self.h, (self.p ** d)[:, None] * self.A, gamma)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        g = min(self.gamma, other.gamma)
        a, b = self.with_gamma(g), other.with_gamma(g)
        return GridFunction(self.phi, self.h, a.A + b.A, g)

    def scale(self, c) -> "GridFunction":
        return GridFunction(self.phi, self.h, c * self.A, self.gamma)

    def component(self, i: int) -> "GridFunction":
        return GridFunction(self.phi, self.h, self.A[:, i:i + 1], self.gamma)

    def to_csv(self, path: str) -> None:
        y = self.values()
        p = self.p
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["p_re", "p_im"]
            for i in range(self.n):
                head += [f"Y{i + 1}_re", f"Y{i + 1}_im"]
            w.writerow(head)
            for j in range(self.J + 1):
                row = [f"{p[j].real:.17g}", f"{p[j].imag:.17g}"]
                for i in range(self.n):
                    row += [f"{y[j, i].real:.17g}", f"{y[j, i].imag:.17g}"]
                w.writerow(row)


def zeros_like(gf: GridFunction, n: Optional[int] = None, gamma: Optional[float] = None) -> GridFunction:
    n = gf.n if n is None else n
    return GridFunction(gf.phi, gf.h, np.zeros((gf.J + 1, n), complex), gf.gamma if gamma is None else gamma)


def from_function(f, phi: float, h: float, J: int, gamma: float = 1.0) -> GridFunction:
    """Grid of the smooth factor A(p) = f(p) (a callable returning (len, n))."""
    p = h * np.arange(J + 1) * np.exp(1j * phi)
    v = np.asarray(f(p), dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    return GridFunction(phi, h, v, gamma)


def kernel(s: int, phi: float, h: float, J: int) -> GridFunction:
    """p^{s-1}/Gamma(s), s >= 1."""
    return GridFunction(phi, h, np.full((J + 1, 1), 1.0 / math.gamma(s), complex), float(s))


# ---------------------------------------------------------------------------
# convolution

@lru_cache(maxsize=32)
def _moments(a: float, b: float, J: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-step product-integration weights.

    For t = j (h = 1) and cells [i, i+1], i < j:
        M0[j, i] = int s^a (j-s)^b ds,  M1[j, i] = int s^a (j-s)^b (s-i) ds.
    """
    M0 = np.zeros((J + 1, J + 1))
    M1 = np.zeros((J + 1, J + 1))
    Ba = beta_fn(a + 1, b + 1)
    Bb = beta_fn(a + 2, b + 1)
    for j in range(1, J + 1):
        i = np.arange(j + 1)
        x = np.clip(i / j, 0.0, 1.0)
        I0 = betainc(a + 1, b + 1, x) * Ba * j ** (a + b + 1)
        I1 = betainc(a + 2, b + 1, x) * Bb * j ** (a + b + 2)
        m0 = np.diff(I0)
        m1 = np.diff(I1) - np.arange(j) * m0
        M0[j, :j] = m0
        M1[j, :j] = m1
    return M0, M1


def conv_scalar(fa: np.ndarray, ga: float, fb: np.ndarray, gb: float, h: float, phi: float
                ) -> Tuple[np.ndarray, float]:
    """Smooth factor and exponent of (p^{ga-1} fa) * (p^{gb-1} fb) on the grid."""
    J = len(fa) - 1
    a, b = ga - 1.0, gb - 1.0
    ge = ga + gb
    out = np.zeros(J + 1, complex)
    rot = np.exp(1j * phi * (a + b + 1))
    if abs(a) < 1e-15 and abs(b) < 1e-15:
        full = np.convolve(fa, fb)[: J + 1]
        out = h * (full - 0.5 * fa[0] * fb - 0.5 * fa * fb[0])
        out[0] = 0
        val = rot * out
        t = h * np.arange(J + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            A = np.where(t > 0, val / (t * np.exp(1j * phi)) ** (ge - 1), fa[0] * fb[0] * math.gamma(ga) * math.gamma(gb) / math.gamma(ge))
        return A, ge
    M0, M1 = _moments(a, b, J)
    hs = h ** (a + b + 1)
    for j in range(1, J + 1):
        i = np.arange(j)
        phi_i = fa[i] * fb[j - i]
        phi_n = fa[i + 1] * fb[j - i - 1]
        w0 = M0[j, :j] - M1[j, :j]
        w1 = M1[j, :j]
        out[j] = hs * (np.dot(w0, phi_i) + np.dot(w1, phi_n))
    val = rot * out
    t = h * np.arange(J + 1)
    A = np.empty(J + 1, complex)
    A[1:] = val[1:] / (t[1:] * np.exp(1j * phi)) ** (ge - 1)
    A[0] = fa[0] * fb[0] * math.gamma(ga) * math.gamma(gb) / math.gamma(ge)
    return A, ge


def conv_grid(x: GridFunction, y: GridFunction) -> GridFunction:
    """Componentwise convolution (componentwise if both have n columns,
    broadcast if one of them has a single column)."""
    if x.h != y.h or x.phi != y.phi or x.J != y.J:
        raise ValueError("grids differ")
    n = max(x.n, y.n)
    cols = []
    ge = x.gamma + y.gamma
    for i in range(n):
        fa = x.A[:, i if x.n > 1 else 0]
        fb = y.A[:, i if y.n > 1 else 0]
        A, ge = conv_scalar(fa, x.gamma, fb, y.gamma, x.h, x.phi)
        cols.append(A)
    return GridFunction(x.phi, x.h, np.stack(cols, axis=1), ge)


def cumulative(x: GridFunction) -> GridFunction:
    """1 * Y."""
    one = GridFunction(x.phi, x.h, np.ones((x.J + 1, 1), complex), 1.0)
    return conv_grid(one, x)


def shift_support(x: GridFunction, steps: int) -> GridFunction:
    """H(p - steps h) Y(p - steps h) on the same grid (gamma = 1 only)."""
    if x.gamma != 1:
        raise ValueError("support shift needs gamma = 1")
    A = np.zeros_like(x.A)
    A[steps:] = x.A[: x.J + 1 - steps]
    return GridFunction(x.phi, x.h, A, 1.0)


# ---------------------------------------------------------------------------
# equations

def _f0_grid(sys: model.PreparedSystem, phi: float, h: float, J: int) -> GridFunction:
    p = h * np.arange(J + 1) * np.exp(1j * phi)
    F = np.zeros((J + 1, sys.n), complex)
    for s in range(1, sys.f0.shape[0]):
        if np.any(sys.f0[s]):
            F += np.outer(p ** (s - 1) / math.gamma(s), sys.f0[s])
    return GridFunction(phi, h, F, 1.0)


class _CPoly:
    """Truncated polynomial in C with grid-function coefficients."""

    def __init__(self, terms: Dict[MultiIndex, GridFunction], cap: MultiIndex):
        self.terms = terms
        self.cap = cap

    def conv(self, other: "_CPoly") -> "_CPoly":
        out: Dict[MultiIndex, GridFunction] = {}
        for ka, fa in self.terms.items():
            for kb, fb in other.terms.items():
                k = tuple(a + b for a, b in zip(ka, kb))
                if not model.precedes(k, self.cap):
                    continue
                c = conv_grid(fa, fb)
                out[k] = c if k not in out else out[k] + c
        return _CPoly(out, self.cap)


def _nonlinear(sys: model.PreparedSystem, comps: Dict[MultiIndex, GridFunction], k: MultiIndex,
               phi: float, h: float, J: int) -> Optional[GridFunction]:
    """[C^k] sum_{s,l} g_{s,l} K_s * Z^{*l}, or None if there is no contribution."""
    n = sys.n
    total: Optional[GridFunction] = None
    powers: Dict[Tuple[int, int], _CPoly] = {}

    def zpow(r: int, e: int) -> _CPoly:
        if (r, e) in powers:
            return powers[(r, e)]
        if e == 1:
            P = _CPoly({q: g.component(r) for q, g in comps.items()}, k)
        else:
            P = zpow(r, e - 1).conv(zpow(r, 1))
        powers[(r, e)] = P
        return P

    for (s, l), vec in sys.g.items():
        if not np.any(vec):
            continue
        prod: Optional[_CPoly] = None
        for r in range(n):
            if l[r] == 0:
                continue
            P = zpow(r, l[r])
            prod = P if prod is None else prod.conv(P)
        if prod is None or k not in prod.terms:
            continue
        term = prod.terms[k]
        if s >= 1:
            term = conv_grid(kernel(s, phi, h, J), term)
        val = GridFunction(phi, h, np.outer(term.A[:, 0], vec), term.gamma)
        total = val if total is None else total + val
    return total


@dataclass
class SolveInfo:
    iterations: int
    history: List[float] = field(default_factory=list)

    @property
    def ratios(self) -> List[float]:
        hst = self.history
        return [hst[i + 1] / hst[i] for i in range(len(hst) - 1) if hst[i] > 0]


def solve_Y0(sys: model.PreparedSystem, phi: float, h: float, J: int, tol: float = TOL,
             max_iter: int = MAX_ITER) -> Tuple[GridFunction, SolveInfo]:
    """Fixed-point iteration for Y_0 on p = j h e^{i phi}."""
    n = sys.n
    p = h * np.arange(J + 1) * np.exp(1j * phi)
    den = sys.lam[None, :] - p[:, None]
    if np.min(np.abs(den)) < 1e-12:
        raise NotContracting("grid reaches an eigenvalue")
    F0 = _f0_grid(sys, phi, h, J)
    Bh = sys.beta
    Y = GridFunction(phi, h, np.zeros((J + 1, n), complex), 1.0)
    zero = model.zero(n)
    hist = []
    for it in range(1, max_iter + 1):
        rhs = F0.A - Bh[None, :] * cumulative(Y).with_gamma(1.0).A
        N = _nonlinear(sys, {zero: Y}, zero, phi, h, J)
        if N is not None:
            rhs = rhs + N.with_gamma(1.0).A
        new = rhs / den
        d = float(np.max(np.abs(new - Y.A)))
        hist.append(d)
        Y = GridFunction(phi, h, new, 1.0)
        if d <= tol * max(1.0, float(np.max(np.abs(new)))):
            return Y, SolveInfo(it, hist)
    raise NotContracting(f"no convergence after {max_iter} iterations (last step {hist[-1]:.3g})", hist)


def solve_Yk(sys: model.PreparedSystem, grids: Dict[MultiIndex, GridFunction], k: MultiIndex,
             seed: complex = 1.0, tol: float = TOL, max_iter: int = MAX_ITER
             ) -> Tuple[GridFunction, SolveInfo]:
    """Grid solution for Y_k given grids for every k' strictly before k.

    ``seed`` multiplies the |k| = 1 normalisation 1/Gamma(beta'_j); the
    grids for higher k then scale as seed^{|k|}.
    """
    k = tuple(k)
    n = sys.n
    d = model.derived(sys)
    zero = model.zero(n)
    Y0 = grids[zero]
    phi, h, J = Y0.phi, Y0.h, Y0.J
    p = h * np.arange(J + 1) * np.exp(1j * phi)
    gam = float(np.real(np.dot(k, d.beta_prime)))
    kl = complex(np.dot(k, sys.lam))
    km = float(np.dot(k, d.m))
    res_j = None
    if sum(k) == 1:
        res_j = k.index(1)
    comps = {q: g for q, g in grids.items() if model.precedes(q, k) and q != k}
    Y = GridFunction(phi, h, np.zeros((J + 1, n), complex), gam)
    if res_j is not None:
        Y.A[:, res_j] = seed / math.gamma(gam)
    den = sys.lam[None, :] - kl - p[:, None]
    hist = []
    for it in range(1, max_iter + 1):
        comps[k] = Y
        R = _nonlinear(sys, comps, k, phi, h, J)
        R = GridFunction(phi, h, np.zeros((J + 1, n), complex), gam) if R is None else R.with_gamma(gam)
        I = cumulative(Y).with_gamma(gam)
        new = np.empty_like(Y.A)
        for i in range(n):
            if i == res_j:
                rho = R.A[:, i]
                with np.errstate(divide="ignore", invalid="ignore"):
                    q1 = np.where(p != 0, rho / np.where(p != 0, p, 1), 0)
                    q2 = np.where(p != 0, rho / np.where(p != 0, p, 1) ** 2, 0)
                if J >= 3:
                    q2[0] = 3 * q2[1] - 3 * q2[2] + q2[3]
                integ = np.concatenate([[0], np.cumsum(0.5 * (q2[1:] + q2[:-1]))]) * h * np.exp(1j * phi)
                new[:, i] = seed / math.gamma(gam) - q1 - gam * integ
            else:
                coef = sys.beta[i] + km
                with np.errstate(divide="ignore", invalid="ignore"):
                    new[:, i] = (R.A[:, i] - coef * I.A[:, i]) / den[:, i]
        step = float(np.max(np.abs(new - Y.A)))
        hist.append(step)
        Y = GridFunction(phi, h, new, gam)
        if step <= tol * max(1.0, float(np.max(np.abs(new)))):
            return Y, SolveInfo(it, hist)
    raise NotContracting(f"no convergence after {max_iter} iterations", hist)


def weighted_norm(gf: GridFunction, nu: float) -> float:
    """int_0^{Jh} e^{-nu t} |Y| dt (vector sup over components)."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    t = gf.t
    a = gf.gamma - 1
    absA = np.max(np.abs(gf.A), axis=1)
    f = np.exp(-nu * t) * absA
    if abs(a) < 1e-15:
        return float(gf.h * (np.sum(f) - 0.5 * f[0] - 0.5 * f[-1]))
    # first cell by product integration of t^a against the linear interpolant of f
    hh = gf.h
    first = hh ** (a + 1) * (f[0] * (1 / (a + 1) - 1 / (a + 2)) + f[1] / (a + 2))
    rest = f[1:] * t[1:] ** a
    tail = hh * (np.sum(rest) - 0.5 * rest[0] - 0.5 * rest[-1])
    return float(first + tail)
