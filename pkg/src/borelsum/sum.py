"""Laplace summation of the transseries.

Notation: for the ray ``arg p = phi`` and ``sigma = x e^{i phi}``,

    L_phi Y (x) = int_0^inf Y(t e^{i phi}) e^{-sigma t} e^{i phi} dt.

Lateral sums on a Stokes line use rays tilted by a small angle to either
side (by Cauchy's theorem the value does not depend on the tilt as long as
no singularity is crossed; three tilts give the error estimate).

Prefactor bookkeeping: Y_k has germ exponent k.beta', so
``L Y_k ~ x^{-k.beta'}``; the transseries term is
``C^k e^{-k.lambda x} x^{k.m} L Y_k`` and its net power is ``x^{-k.beta}``.

Averages.  Write ``S = S_1``, ``mu = m_1``.  The alpha-weighted average is

    L Y_k^alpha = sum_i (-alpha S)^i binom(k_1+i, i) x^{i mu} e^{-i lambda_1 x} L^+ Y_{k+i e_1},

which is the same as summing with ``L^+`` and the shifted constant
``C_1 - alpha S`` (or with ``L^-`` and ``C_1 + (1-alpha) S``).  alpha = 0 is
``L^+``, alpha = 1 is ``L^-``, alpha = 1/2 is the balanced average.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath as mp
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp
from scipy.special import roots_jacobi

from . import model
from .borel import BorelFunction
from .model import MultiIndex

TAIL_EPS = 1e-17
ANGLE_EPS = 1e-9
LATERAL_TILTS = (0.35, 0.25, 0.15)
LOOP_MAX = 8
GRADE_TOL = 1e-12


class RayHitsSingularity(ValueError):
    pass


class TailNotConvergent(ValueError):
    pass


class LoopBudgetExceeded(RuntimeError):
    pass


class NotConverging(RuntimeError):
    pass


class FitIllConditioned(RuntimeError):
    pass


class SmallnessViolated(ValueError):
    """|C^k e^{-k.lambda x} x^{k.m}| fails to decrease along the grading at a sample."""

    def __init__(self, k, x, weight, prev):
        super().__init__(f"(c1) violated at x = {complex(x):.6g}: k = {tuple(k)} has weight "
                         f"{weight:.3g} >= {prev:.3g} of the previous grade")
        self.k = tuple(k)
        self.x = complex(x)


class PathLeavesValidity(ValueError):
    pass


_GL = {n: leggauss(n) for n in (16, 32)}


def _angle_diff(a: float, b: float) -> float:
    return abs((a - b + np.pi) % (2 * np.pi) - np.pi)


def singular_on_ray(bf: BorelFunction, phi: float) -> List[complex]:
    return [s for s in bf.sing if _angle_diff(np.angle(s), phi) < ANGLE_EPS]


def _origin_part(bf: BorelFunction, sigma: complex, phi: float, t0: float, w: int, nodes: int = 40):
    """int_0^t0 of p^{gamma-1} A(p) (-p)^w e^{-sigma t} e^{i phi} dt."""
    g = complex(bf.exponent)
    if abs(g.imag) < 1e-15:
        a = g.real - 1
        x, wt = roots_jacobi(nodes, 0.0, a)
        t = 0.5 * t0 * (1 + x)
        p = t * np.exp(1j * phi)
        Ap = bf.A(p)
        h = Ap * ((-p) ** w * np.exp(-sigma * t) * np.exp(1j * phi * g))[:, None]
        return (0.5 * t0) ** (a + 1) * (wt[:, None] * h).sum(axis=0)
    # complex exponent: termwise incomplete gamma
    out = np.zeros(bf.n, complex)
    c = bf._c
    with mp.workdps(20):
        sg = mp.mpc(sigma)
        for n in range(bf.N + 1):
            if not np.any(c[n]):
                continue
            s = mp.mpc(g + n + w)
            val = mp.gammainc(s, 0, sg * t0) * sg ** (-s)
            coef = complex(val * mp.expj(phi * s)) * (-1) ** w
            out += c[n] * coef
    return out


def _panel_sum(f, a: float, b: float, n: int):
    x, wt = _GL[n]
    t = 0.5 * (b - a) * x + 0.5 * (a + b)
    return 0.5 * (b - a) * (wt[:, None] * f(t)).sum(axis=0)


def laplace_ray(bf: BorelFunction, x: complex, phi: Optional[float] = None, side: int = 0,
                w: int = 0, tol: float = 1e-13, full_output: bool = False):
    """L_phi[(-p)^w Y](x); side selects boundary values if the ray lies on a cut."""
    x = complex(x)
    phi = -np.angle(x) if phi is None else float(phi)
    sigma = x * np.exp(1j * phi)
    if sigma.real <= 0:
        raise TailNotConvergent(f"Re(x e^(i phi)) = {sigma.real:.3g} <= 0")
    if bf.is_zero:
        z = np.zeros(bf.n, complex)
        return (z, 0.0) if full_output else z
    hit = singular_on_ray(bf, phi)
    if hit and side == 0:
        raise RayHitsSingularity(f"ray arg p = {phi:.6g} meets {hit[0]}")
    T = -math.log(TAIL_EPS) / sigma.real
    t0 = min(bf.taylor_radius(), T)
    I0 = _origin_part(bf, sigma, phi, t0, w)
    if t0 >= T:
        return (I0, 0.0) if full_output else I0
    e = np.exp(1j * phi)

    def f(t):
        p = t * e + 0j
        return bf(p, side) * ((-p) ** w * np.exp(-sigma * t) * e)[:, None]

    dmin = min([abs(s) * math.sin(min(_angle_diff(np.angle(s), phi), np.pi / 2)) for s in bf.sing
                if _angle_diff(np.angle(s), phi) > ANGLE_EPS] + [1.0])
    h = min(0.5, 4.0 / abs(sigma), max(dmin, 0.02))
    edges = list(np.arange(t0, T, h)) + [T]
    panels = list(zip(edges[:-1], edges[1:]))
    total = np.zeros(bf.n, complex)
    err = 0.0
    scale = max(np.max(np.abs(I0)), 1e-300)
    for _ in range(30):
        nxt = []
        for a, b in panels:
            lo = _panel_sum(f, a, b, 16)
            hi = _panel_sum(f, a, b, 32)
            d = np.max(np.abs(hi - lo))
            if d <= tol * max(scale, np.max(np.abs(hi))) or b - a < 1e-8:
                total += hi
                err += d
            else:
                m = 0.5 * (a + b)
                nxt += [(a, m), (m, b)]
        panels = nxt
        if not panels:
            break
    if panels:
        raise NotConverging("adaptive quadrature did not converge")
    tail = float(np.max(np.abs(f(np.array([T]))))) / sigma.real
    out = I0 + total
    return (out, err + tail) if full_output else out


def _tilt_limit(bf: BorelFunction, phi: float) -> float:
    gaps = [_angle_diff(np.angle(s), phi) for s in bf.sing]
    gaps = [g for g in gaps if g > ANGLE_EPS]
    return 0.8 * min(gaps + [np.pi / 2])


def lateral_sum(bf: BorelFunction, x: complex, side: int, phi: Optional[float] = None, w: int = 0,
                tilts: Sequence[float] = LATERAL_TILTS, full_output: bool = False):
    """L^{+/-} Y along the nominal ray phi (tilted rays, Cauchy ladder)."""
    x = complex(x)
    phi = -np.angle(x) if phi is None else float(phi)
    if not singular_on_ray(bf, phi) or bf.is_zero:
        return laplace_ray(bf, x, phi, w=w, full_output=full_output)
    lim = _tilt_limit(bf, phi)
    vals = []
    for th in tilts:
        th = min(th, lim)
        ang = phi + side * th
        if (x * np.exp(1j * ang)).real <= 0:
            raise TailNotConvergent("tilted ray leaves the half plane of convergence")
        vals.append(laplace_ray(bf, x, ang, w=w))
    spread = max(float(np.max(np.abs(v - vals[0]))) for v in vals)
    return (vals[0], spread) if full_output else vals[0]


# ---------------------------------------------------------------------------
# transseries

def _side_for(x: complex, phi: Optional[float]) -> Tuple[float, int]:
    phi = -np.angle(complex(x)) if phi is None else float(phi)
    if abs(phi) < ANGLE_EPS:
        return 0.0, 0  # on the Stokes line
    return phi, (1 if phi > 0 else -1)


def _lam1_prefactor(sys: model.PreparedSystem, x: complex, i: int) -> complex:
    d = model.derived(sys)
    return complex(x ** (i * d.m[0]) * np.exp(-i * sys.lam[0] * x))


def averaged_sum(bfs: Dict[MultiIndex, BorelFunction], sys: model.PreparedSystem, x: complex,
                 alpha: complex = 0.5, S: complex = 0.0, k: Optional[MultiIndex] = None,
                 phi: Optional[float] = None, loop_max: int = LOOP_MAX, w: int = 0,
                 tol: float = 1e-14) -> np.ndarray:
    """L Y_k^alpha via the loop expansion around j lambda_1 (see module doc).

    Off the Stokes line the value is the analytic continuation of the
    average from the respective side.
    """
    k = model.zero(sys.n) if k is None else tuple(k)
    x = complex(x)
    phi, side = _side_for(x, phi)
    bf = bfs[k]
    on_line = side == 0 and any(singular_on_ray(bfs[q], phi) for q in bfs if q[0] >= k[0] and
                                  all(q[i] == k[i] for i in range(1, sys.n)))
    if side == 0 and not on_line:
        return laplace_ray(bf, x, phi, w=w)
    if side >= 0:
        base, weight = +1, -alpha * S
    else:
        base, weight = -1, (1 - alpha) * S
    out = np.zeros(sys.n, complex)
    last = None
    for i in range(0, loop_max + 1):
        q = tuple(k[0] + i if j == 0 else k[j] for j in range(sys.n))
        if q not in bfs:
            break
        if i and weight == 0:
            break
        coef = weight ** i * math.comb(k[0] + i, i) * (_lam1_prefactor(sys, x, i) if i else 1.0)
        val = _lateral_or_ray(bfs[q], x, phi, base if on_line else 0, w)
        term = coef * val
        out += term
        last = float(np.max(np.abs(term)))
    if last is not None and loop_max and last > max(tol * np.max(np.abs(out)), 1e-300) and i == loop_max:
        raise LoopBudgetExceeded(f"loop term {last:.3g} above tolerance at loop_max = {loop_max}")
    return out


def _lateral_or_ray(bf, x, phi, side, w):
    if side == 0:
        return laplace_ray(bf, x, phi, w=w)
    return lateral_sum(bf, x, side, phi, w=w)


@dataclass
class SumRequest:
    x_samples: List[complex]
    direction: Optional[float] = None
    alpha: complex = 0.5
    C: Optional[np.ndarray] = None
    K: int = 3
    N: int = 40
    loop_max: int = LOOP_MAX


@dataclass
class SumResult:
    x: complex
    y: np.ndarray
    dy: np.ndarray
    per_term: Dict[MultiIndex, np.ndarray]
    truncation_estimate: float
    residual: float


def _cpow(C: np.ndarray, k: MultiIndex) -> complex:
    out = 1.0 + 0j
    for c, e in zip(C, k):
        if e:
            out *= complex(c) ** e
    return out


def check_smallness(sys: model.PreparedSystem, C: Sequence[complex], x: complex,
                    keys: Sequence[MultiIndex]) -> Dict[int, float]:
    """Largest |C^k e^{-k.lambda x} x^{k.m}| per grade; raise unless it decreases (grade 0 weighs 1)."""
    C = np.asarray(C, dtype=complex)
    m = model.derived(sys).m
    worst: Dict[int, Tuple[float, MultiIndex]] = {0: (1.0, model.zero(sys.n))}
    for q in keys:
        if not sum(q):
            continue
        w = abs(_cpow(C, q) * np.exp(-complex(np.dot(q, sys.lam)) * x) * x ** float(np.dot(q, m)))
        if w > worst.get(sum(q), (-1.0, q))[0]:
            worst[sum(q)] = (w, q)
    prev = 1.0
    for g in sorted(worst)[1:]:
        w, q = worst[g]
        if w > 0 and w >= prev:
            raise SmallnessViolated(q, x, w, prev)
        prev = w if w > 0 else prev
    return {g: v[0] for g, v in worst.items()}


def sum_transseries(bfs: Dict[MultiIndex, BorelFunction], sys: model.PreparedSystem, x: complex,
                    C: Optional[Sequence[complex]] = None, alpha: complex = 0.5, S: complex = 0.0,
                    phi: Optional[float] = None, K: Optional[int] = None,
                    grade_tol: float = GRADE_TOL) -> SumResult:
    """y(x) = sum_k C^k e^{-k.lambda x} x^{k.m} L Y_k^alpha, with y'(x) and the ODE residual.

    Values and derivatives are assembled from lateral sums with the shifted
    constant (identical to the loop form term by term up to the grade cut).
    """
    x = complex(x)
    n = sys.n
    C = np.zeros(n, complex) if C is None else np.asarray(C, dtype=complex)
    d = model.derived(sys)
    phi_n, side = _side_for(x, phi)
    keys = sorted(bfs, key=lambda q: (sum(q), [-v for v in q]))
    if K is not None:
        keys = [q for q in keys if sum(q) <= K]
    check_smallness(sys, C, x, keys)
    on_line = side == 0 and any(singular_on_ray(bfs[q], phi_n) for q in keys)
    base = side if side else (1 if on_line else 0)
    Ceff = C.copy()
    if base == 1:
        Ceff[0] = C[0] - alpha * S
    elif base == -1:
        Ceff[0] = C[0] + (1 - alpha) * S
    lam, m = sys.lam, d.m
    y = np.zeros(n, complex)
    dy = np.zeros(n, complex)
    per_term: Dict[MultiIndex, np.ndarray] = {}
    grades: Dict[int, float] = {}
    cache = {}
    for q in keys:
        cq = _cpow(Ceff, q) if sum(q) else 1.0
        if sum(q) and cq == 0:
            continue
        v0 = _lateral_or_ray(bfs[q], x, phi_n, base if on_line else 0, 0)
        v1 = _lateral_or_ray(bfs[q], x, phi_n, base if on_line else 0, 1)
        cache[q] = v0
        kl = complex(np.dot(q, lam))
        km = float(np.dot(q, m))
        pref = np.exp(-kl * x) * x ** km if sum(q) else 1.0
        term = cq * pref * v0
        y += term
        dy += cq * pref * ((-kl + km / x) * v0 + v1)
        grades[sum(q)] = grades.get(sum(q), 0.0) + float(np.max(np.abs(term)))
    # grouped (loop-form) contributions per k
    Cg = C
    for q in keys:
        if sum(q) and _cpow(Cg, q) == 0:
            continue
        acc = np.zeros(n, complex)
        weight = 0.0 if base == 0 else (-alpha * S if base == 1 else (1 - alpha) * S)
        for i in range(0, 64):
            r = tuple(q[0] + i if j == 0 else q[j] for j in range(n))
            if r not in cache:
                break
            if i and weight == 0:
                break
            coef = (weight ** i) * math.comb(q[0] + i, i)
            kl = complex(np.dot(r, lam))
            km = float(np.dot(r, m))
            pref = np.exp(-kl * x) * x ** km if sum(r) else 1.0
            acc += coef * pref * cache[r]
        per_term[q] = (_cpow(Cg, q) if sum(q) else 1.0) * acc
    top = max(grades) if grades else 0
    trunc = grades.get(top, 0.0) if top else 0.0
    if top >= 2 and grades.get(top, 0) > grades.get(top - 1, 0) > 0 and grades[top] > grade_tol * np.max(np.abs(y)):
        raise NotConverging("grade contributions are not decreasing")
    res = float(np.max(np.abs(dy - sys.rhs(x, y))))
    return SumResult(x=x, y=y, dy=dy, per_term=per_term, truncation_estimate=trunc, residual=res)


# ---------------------------------------------------------------------------
# Stokes transitions

def integrate_ode(sys: model.PreparedSystem, x0: complex, y0: np.ndarray, x1: complex,
                  rtol: float = 1e-13, atol: float = 1e-30, samples: Optional[Sequence[float]] = None):
    """Integrate y' = f(x, y) along the straight segment x0 -> x1."""
    dx = complex(x1) - complex(x0)

    def rhs(s, y):
        return dx * sys.rhs(complex(x0) + s * dx, y)

    sol = solve_ivp(rhs, (0.0, 1.0), np.asarray(y0, dtype=complex), method="DOP853", rtol=rtol,
                    atol=atol, t_eval=samples, dense_output=False)
    if not sol.success:
        raise PathLeavesValidity(sol.message)
    return sol.y.T if samples is not None else sol.y[:, -1]


def _fit_C(bfs, sys, xs, ys, side, C_guess, S, alpha=0.5, K=None):
    """Least-squares C_1 such that the summed representation matches ys.

    side = +1 / -1: plain lateral sums (alpha = 0 / 1 families); 0: balanced.
    """
    from scipy.optimize import least_squares

    def model_y(c):
        C = np.array(C_guess, dtype=complex)
        C[0] = c
        out = []
        for x in xs:
            if side == 0:
                out.append(sum_transseries(bfs, sys, x, C, alpha=alpha, S=S, K=K).y)
            else:
                out.append(_lateral_total(bfs, sys, x, C, side, K))
        return np.concatenate(out)

    target = np.concatenate([np.asarray(v) for v in ys])

    def fun(z):
        v = model_y(complex(z[0], z[1])) - target
        return np.concatenate([v.real, v.imag]) / max(np.max(np.abs(target)), 1e-300)

    c0 = complex(C_guess[0])
    sol = least_squares(fun, [c0.real, c0.imag], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    J = sol.jac
    if J.size and np.linalg.cond(J) > 1e12:
        raise FitIllConditioned("C fit is ill-conditioned")
    return complex(sol.x[0], sol.x[1])


def _lateral_total(bfs, sys, x, C, side, K=None):
    """sum_k C^k e^{-k.lambda x} x^{k.m} L^{side}_phi Y_k on the ray phi = -arg x + side*tilt."""
    x = complex(x)
    d = model.derived(sys)
    y = np.zeros(sys.n, complex)
    phi = -np.angle(x)
    for q, bf in bfs.items():
        if K is not None and sum(q) > K:
            continue
        cq = _cpow(C, q) if sum(q) else 1.0
        if cq == 0:
            continue
        if singular_on_ray(bf, phi):
            v = lateral_sum(bf, x, side, phi)
        else:
            v = laplace_ray(bf, x, phi)
        pref = np.exp(-complex(np.dot(q, sys.lam)) * x) * x ** float(np.dot(q, d.m)) if sum(q) else 1.0
        y += cq * pref * v
    return y


@dataclass
class StokesJump:
    C_minus: complex
    C_plus: complex
    C_zero: complex
    S_fit: complex


def stokes_jump(bfs: Dict[MultiIndex, BorelFunction], sys, S: complex, C_minus: complex = 0.0,
                radius: float = 8.0, xi: float = 0.25, fit_points: int = 3, K: Optional[int] = None
                ) -> StokesJump:
    """Refit C across the Stokes line arg x = 0 by continuing the ODE solution.

    The solution is fixed at x = radius e^{-i xi} (ray above the Stokes
    line, L^+ with C^-), continued numerically to arg x = +xi and to
    arg x = 0.  There the constant is refit against L^- (giving C^+) and
    against the balanced sum (giving C^0).
    """
    C = np.zeros(sys.n, complex)
    C[0] = C_minus
    xa = radius * np.exp(-1j * xi)
    ya = _lateral_total(bfs, sys, xa, C, +1, K)
    xs_p = [radius * np.exp(1j * xi * (1 + 0.2 * j)) for j in range(fit_points)]
    xs_0 = [radius * (1 + 0.05 * j) for j in range(fit_points)]
    ys_p = [integrate_ode(sys, xa, ya, x1) for x1 in xs_p]
    ys_0 = [integrate_ode(sys, xa, ya, x1) for x1 in xs_0]
    C_plus = _fit_C(bfs, sys, xs_p, ys_p, -1, C, S, K=K)
    C_zero = _fit_C(bfs, sys, xs_0, ys_0, 0, C, S, alpha=0.5, K=K)
    return StokesJump(C_minus=complex(C_minus), C_plus=C_plus, C_zero=C_zero, S_fit=C_plus - complex(C_minus))


def optimal_truncation(coeffs: Sequence[complex], gamma: float, x: complex) -> Tuple[complex, int]:
    """Sum of a_l x^{-l-gamma} up to (excluding) the least term."""
    terms = [complex(a) * complex(x) ** (-l - gamma) for l, a in enumerate(coeffs)]
    mags = np.abs(terms)
    nz = np.nonzero(mags)[0]
    if len(nz) == 0:
        return 0j, 0
    start = nz[0]
    # least term after the first nonzero one
    idx = start + int(np.argmin(mags[start:]))
    return complex(np.sum(terms[:idx])), idx


@dataclass
class ClassicalFit:
    radius: float
    x_plus: complex
    x_minus: complex
    coef_plus: complex
    coef_minus: complex


def gamma_point(radius: float, beta1: float, sign: int) -> complex:
    """Point with |x| = radius on the path Re x = (1 - beta_1) ln|x| in the upper/lower half plane."""
    re = (1 - beta1) * math.log(radius)
    im = math.sqrt(radius ** 2 - re ** 2)
    return complex(re, sign * im)


def classical_stokes(bfs, hier, S: complex, C: complex = 0.0, x0: float = 10.0,
                     radii: Sequence[float] = (20.0, 30.0, 40.0)) -> List[ClassicalFit]:
    """Coefficient of e^{-x} x^{m} y~_1 in y - (optimally truncated y~_0) along gamma^{+/-}.

    The solution is the balanced sum with constant C at real x0;
    it is continued numerically to the points of gamma^{+/-} and the
    coefficient obtained there tends to C +/- S/2.
    """
    sys = hier.sys
    d = model.derived(sys)
    Cv = np.zeros(sys.n, complex)
    Cv[0] = C
    y0 = sum_transseries(bfs, sys, x0, Cv, alpha=0.5, S=S).y
    a0 = [complex(v) for v in hier.y0.as_complex().coeffs[:, 0]]
    u1 = hier.yk(model.unit(sys.n, 0)).as_complex()
    a1 = [complex(v) for v in u1.coeffs[:, 0]]
    g1 = complex(u1.exponent).real
    out = []
    for R in radii:
        fits = []
        for sgn in (+1, -1):
            x1 = gamma_point(R, float(np.real(sys.beta[0])), sgn)
            y1 = integrate_ode(sys, x0, y0, x1)
            s0, _ = optimal_truncation(a0, 0.0, x1)
            s1, _ = optimal_truncation(a1, g1, x1)
            fits.append((x1, (y1[0] - s0) / (np.exp(-sys.lam[0] * x1) * x1 ** d.m[0] * s1)))
        out.append(ClassicalFit(R, fits[0][0], fits[1][0], complex(fits[0][1]), complex(fits[1][1])))
    return out


def lateral_jump_S(bfs, sys, x: float = 10.0, K: Optional[int] = None) -> complex:
    """S_1 from L^+ Y_0 - L^- Y_0 at real x (route through the lateral sums).

    Solves  L^- Y_0 = sum_i (-S)^i x^{i m} e^{-i lambda_1 x} L^+ Y_{i e_1}
    for S by Newton iteration.
    """
    n = sys.n
    lp, lm = [], []
    zero = model.zero(n)
    lm0 = lateral_sum(bfs[zero], x, -1)[0]
    i = 0
    while True:
        q = tuple(i if j == 0 else 0 for j in range(n))
        if q not in bfs or (K is not None and i > K):
            break
        lp.append(lateral_sum(bfs[q], x, +1)[0] * (_lam1_prefactor(sys, x, i) if i else 1.0))
        i += 1
    if len(lp) < 2:
        raise FitIllConditioned("need Y_{e1} for the lateral jump")
    S = (lp[0] - lm0) / lp[1]
    for _ in range(50):
        F = sum((-S) ** j * lp[j] for j in range(len(lp))) - lm0
        dF = sum(-j * (-S) ** (j - 1) * lp[j] for j in range(1, len(lp)))
        step = F / dF
        S -= step
        if abs(step) < 1e-16 * abs(S):
            break
    return complex(S)
