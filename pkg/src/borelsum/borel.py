"""Borel-plane analysis of the hierarchy.

``Y_k = B y~_k = p^{k.beta' - 1} A_k(p)`` (for k = 0 the exponent is 1, i.e.
``Y_0 = A_0``).  The analytic factor ``A_k`` is continued past its disk of
convergence with a Pade approximant built in a conformal variable ``w``
that opens the singular rays into the unit circle:

* ``cut1``: one cut ``[r, inf) e^{i phi}``, ``q = 4w/(1+w)^2``;
* ``cut2``: two cuts ``(-inf, -r] U [r, inf)`` along ``e^{i phi}``,
  ``q = 2w/(1+w^2)``;
* ``plain``: Pade in ``p`` itself (meromorphic cases, pole scans).

Here ``q = p e^{-i phi} / r``.  Boundary values on a cut are evaluated at
``|w| = 1`` directly, with the side selecting the half circle.

Local model at a lattice point ``p0``, with ``z = p - p0`` on the branch
that is principal on the counterclockwise side of the ray of approach:

    Y(p0 + z) = d^mu/dz^mu [ z^c (ln z)^{0|1} A(z) ] + B(z).

Stokes constants use ``S_j = r_j Gamma(beta'_j) A(0)`` with
``r_j = 1 - e^{2 pi i (beta'_j - 1)}`` or ``-2 pi i`` in the log case.
``A(0)`` is fitted from the large-order behaviour of the Taylor
coefficients at 0 (a Darboux fit).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath as mp
import numpy as np

from . import model, series
from .model import MultiIndex
from .series import GenSeries, P, to_complex, to_mp
from .transgen import Hierarchy

CLUSTER_TOL = 1e-3
EXCLUSION_FRACTION = 0.05


class PathTooCloseToSingularity(ValueError):
    pass


class ApproximantUnstable(RuntimeError):
    pass


class GermNotFound(LookupError):
    pass


# ---------------------------------------------------------------------------
# conformal maps

def _q_series(kind: str, N: int) -> List:
    """Taylor coefficients of q(w) for the two cut maps."""
    if kind == "cut1":
        return [mp.mpf(0)] + [mp.mpf(4 * (-1) ** (j - 1) * j) for j in range(1, N + 1)]
    if kind == "cut2":
        return [mp.mpf(0)] + [mp.mpf(2 * (-1) ** ((j - 1) // 2)) if j % 2 else mp.mpf(0)
                              for j in range(1, N + 1)]
    raise ValueError(kind)


def compose(c: Sequence, qser: Sequence, N: int) -> List:
    """Coefficients of sum_n c_n q(w)^n up to w^N (q(0) = 0)."""
    out = [mp.mpc(0)] * (N + 1)
    pw = [mp.mpc(1)] + [mp.mpc(0)] * N
    for n in range(min(len(c), N + 1)):
        if n:
            new = [mp.mpc(0)] * (N + 1)
            for i in range(n - 1, N + 1):
                pi = pw[i]
                if pi == 0:
                    continue
                for j in range(1, N + 1 - i):
                    qj = qser[j]
                    if qj:
                        new[i + j] += pi * qj
            pw = new
        cn = c[n]
        if cn == 0:
            continue
        for i in range(n, N + 1):
            if pw[i] != 0:
                out[i] += cn * pw[i]
    return out


def w_of_q(kind: str, q, side: int = 0):
    """Conformal variable for q, with boundary values for q on a cut."""
    q = np.asarray(q, dtype=complex)
    if kind == "plain":
        return q
    if kind == "cut1":
        s = np.sqrt(1 - q)
        if side:
            on = (np.abs(q.imag) < 1e-14) & (q.real >= 1)
            s = np.where(on, -1j * side * np.sqrt(np.abs(q.real - 1)), s)
        return (1 - s) / (1 + s)
    if kind == "cut2":
        s = np.sqrt(1 - q * q)
        if side:
            on = (np.abs(q.imag) < 1e-14) & (np.abs(q.real) >= 1)
            r = np.sqrt(np.abs(q.real ** 2 - 1))
            s = np.where(on, -1j * side * np.sign(q.real) * r, s)
        return q / (1 + s)
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# Pade

def pade_mp(c: Sequence, L: int, M: int) -> Tuple[List, List, int, int]:
    """Pade [L/M] with degree reduction when the system is singular."""
    c = list(c)
    while M > 0:
        try:
            a, b = mp.pade(c[: L + M + 1], L, M)
            return a, b, L, M
        except (ZeroDivisionError, TypeError):
            # singular Toeplitz system (mpmath signals it either way)
            L, M = L - 1, M - 1
    return c[: L + 1], [mp.mpf(1)], L, 0


def robust_pade(c, m: int, n: int, tol: float = 1e-14):
    """SVD-based Pade in double precision (Gonnet, Guettel, Trefethen).

    Removes Froissart doublets by reducing the denominator degree to the
    numerical rank.  Returns numerator and denominator coefficients.
    """
    from scipy.linalg import toeplitz

    c = np.asarray(c, dtype=complex)
    c = np.concatenate([c, np.zeros(max(0, m + n + 1 - len(c)))])[: m + n + 1]
    ts = tol * np.linalg.norm(c)
    if np.linalg.norm(c[: m + 1]) <= ts:
        return np.zeros(1, complex), np.ones(1, complex)
    while True:
        if n == 0:
            return c[: m + 1].copy(), np.ones(1, complex)
        Z = toeplitz(c[: m + n + 1], np.concatenate([[c[0]], np.zeros(n)]))
        C = Z[m + 1: m + n + 1, :]
        rho = int(np.sum(np.linalg.svd(C, compute_uv=False) > ts))
        if rho == n:
            break
        m, n = m - (n - rho), rho
    _, _, Vh = np.linalg.svd(C)
    b = Vh.conj().T[:, n]
    D = np.diag(np.abs(b) + np.sqrt(np.finfo(float).eps))
    Q, _ = np.linalg.qr((C @ D).conj().T, mode="complete")
    b = D @ Q[:, n]
    b = b / np.linalg.norm(b)
    a = Z[: m + 1, :] @ b
    lam = int(np.nonzero(np.abs(b) > tol)[0][0])
    b, a = b[lam:], a[lam:]
    while len(a) > 1 and abs(a[-1]) <= ts:
        a = a[:-1]
    while len(b) > 1 and abs(b[-1]) <= tol:
        b = b[:-1]
    return a / b[0], b / b[0]


@dataclass
class Approximant:
    kind: str
    scale: float
    phi: float
    num: np.ndarray
    den: np.ndarray
    order: Tuple[int, int]

    def _w(self, p, side=0):
        q = np.asarray(p, dtype=complex) * np.exp(-1j * self.phi) / self.scale
        return w_of_q(self.kind, q, side)

    def __call__(self, p, side=0):
        w = self._w(p, side)
        return np.polyval(self.num[::-1], w) / np.polyval(self.den[::-1], w)

    def poles(self) -> np.ndarray:
        if len(self.den) <= 1:
            return np.zeros(0, complex)
        """Poles in the p plane on the principal sheet (|w| < 1 for mapped kinds).

        Negligible top coefficients are trimmed, and roots cancelled by a
        numerator zero (Froissart doublets) are dropped.
        """
        den = np.trim_zeros(np.where(np.abs(self.den) > 1e-14 * np.max(np.abs(self.den)), self.den, 0), "b")
        if len(den) <= 1:
            return np.zeros(0, complex)
        roots = np.roots(den[::-1])
        nscale = np.max(np.abs(self.num)) if len(self.num) else 0.0
        keep = [abs(np.polyval(self.num[::-1], r)) > 1e-8 * nscale * max(1, abs(r)) ** len(self.num)
                for r in roots]
        roots = roots[np.array(keep, dtype=bool)]
        if self.kind == "plain":
            return roots * self.scale * np.exp(1j * self.phi)
        roots = roots[np.abs(roots) < 1]
        q = 4 * roots / (1 + roots) ** 2 if self.kind == "cut1" else 2 * roots / (1 + roots ** 2)
        return q * self.scale * np.exp(1j * self.phi)


# ---------------------------------------------------------------------------
# Borel functions

@dataclass
class BorelFunction:
    """Germ ``p^{gamma-1} A(p)`` and its continuation.

    ``coeffs`` are the Taylor coefficients of A (orders 0..N; shape
    (N+1, n)); ``sing`` lists the candidate singular points.
    """

    k: MultiIndex
    exponent: complex
    coeffs: np.ndarray
    sing: List[complex]
    phi: float = 0.0
    kind: str = "plain"
    scale: float = 1.0
    approx: List[Optional[Approximant]] = field(default_factory=list)
    exact: bool = True

    @property
    def germ(self) -> GenSeries:
        return GenSeries(self.exponent, self.coeffs, P)

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    @property
    def N(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def radius(self) -> float:
        return min((abs(s) for s in self.sing), default=np.inf)

    @property
    def is_zero(self) -> bool:
        return not np.any(self._c != 0)

    def __post_init__(self):
        self._c = to_complex(self.coeffs)
        self._gamma = complex(self.exponent)

    # -- evaluation ---------------------------------------------------------
    def taylor_radius(self) -> float:
        return 0.5 * min(self.radius, 1e6)

    def A(self, p, side: int = 0) -> np.ndarray:
        """Analytic factor at points p (array), shape p.shape + (n,)."""
        p = np.asarray(p, dtype=complex)
        out = np.zeros(p.shape + (self.n,), dtype=complex)
        if self.is_zero:
            return out
        inner = np.abs(p) <= self.taylor_radius()
        if np.any(inner):
            pi = p[inner]
            out[inner] = np.stack([np.polyval(self._c[::-1, i], pi) for i in range(self.n)], axis=-1)
        if np.any(~inner):
            po = p[~inner]
            cols = []
            for i in range(self.n):
                ap = self.approx[i] if self.approx else None
                if ap is None:
                    cols.append(np.zeros_like(po) if not np.any(self._c[:, i]) else _raise_noapprox())
                else:
                    cols.append(ap(po, side))
            out[~inner] = np.stack(cols, axis=-1)
        return out

    def __call__(self, p, side: int = 0) -> np.ndarray:
        """Values of Y at p (principal branch of p^{gamma-1})."""
        p = np.asarray(p, dtype=complex)
        pref = p ** (self._gamma - 1) if self._gamma != 1 else np.ones_like(p)
        return pref[..., None] * self.A(p, side)

    def boundary(self, t, side: int) -> np.ndarray:
        """Lateral boundary values Y^{+/-}(t e^{i phi}) for real t > 0."""
        t = np.asarray(t, dtype=float)
        p = t * np.exp(1j * self.phi) + 0j
        return self(p, side)

    def deriv(self, q, order: int, side: int = 0) -> np.ndarray:
        """d^order/dq^order of Y at q (analytic at q).

        Inside the Taylor disk the derivative is taken termwise on the germ;
        elsewhere through a Cauchy integral on a circle avoiding the
        singular set and the cuts.
        """
        q = complex(q)
        if order == 0:
            return self(np.array([q]), side)[0]
        if abs(q) <= 0.8 * self.taylor_radius() and abs(q) > 0:
            g = self._gamma
            out = np.zeros(self.n, complex)
            for l in range(self.N + 1):
                e = g - 1 + l
                fac = 1.0 + 0j
                for r in range(order):
                    fac *= (e - r)
                out += self._c[l] * fac * q ** (e - order)
            return out
        dist = min([abs(q - s) for s in self.sing] + [abs(q)])
        dist = min(dist, _dist_to_cuts(self, q))
        r = 0.5 * dist
        K = 64
        th = 2 * np.pi * np.arange(K) / K
        z = q + r * np.exp(1j * th)
        vals = self(z, 0)
        coef = np.mean(vals * np.exp(-1j * order * th)[:, None], axis=0)
        return coef * math.factorial(order) / r ** order


def _raise_noapprox():
    raise ApproximantUnstable("no continuation available for this component")


def _dist_to_cuts(bf: BorelFunction, q: complex) -> float:
    if bf.kind == "plain":
        return np.inf
    u = q * np.exp(-1j * bf.phi) / bf.scale
    best = np.inf
    rays = [1.0] if bf.kind == "cut1" else [1.0, -1.0]
    for sgn in rays:
        x = u.real * sgn
        if x >= 1:
            d = abs(u.imag)
        else:
            d = abs(u - sgn)
        best = min(best, d * bf.scale)
    return best


def lattice_for(sys: model.PreparedSystem, k: MultiIndex, active, lmax: int = 6) -> List[complex]:
    """Candidate singular points of Y_k: l lambda_j and lambda_i - k'.lambda."""
    lam = sys.lam
    pts = set()
    for j in range(sys.n):
        for l in range(1, lmax + 1):
            pts.add(complex(l * lam[j]))
    if sum(k) > 0:
        kps = [kp for kp in [model.zero(sys.n)] + model.graded(active, sum(k)) if model.precedes(kp, k)]
        for kp in kps:
            for i in range(sys.n):
                p = complex(lam[i] - np.dot(kp, lam))
                if abs(p) > 1e-12:
                    pts.add(p)
                for l in range(1, lmax + 1):
                    p2 = p + l * lam[0]
                    if abs(p2) > 1e-12:
                        pts.add(complex(p2))
    return sorted(pts, key=lambda z: (abs(z), np.angle(z)))


def choose_map(sing: Sequence[complex], phi: float) -> Tuple[str, float]:
    """Pick the conformal map from the singular points on the line arg = phi."""
    e = np.exp(-1j * phi)
    on = [s * e for s in sing if abs((s * e).imag) < 1e-9 * max(1, abs(s))]
    pos = [z.real for z in on if z.real > 0]
    neg = [-z.real for z in on if z.real < 0]
    if not pos:
        return "plain", 1.0
    rp = min(pos)
    if neg and abs(min(neg) - rp) < 1e-9 * rp:
        return "cut2", rp
    return "cut1", rp


def build_function(k: MultiIndex, exponent, coeffs: np.ndarray, sing: List[complex],
                   phi: float = 0.0, kind: Optional[str] = None, order: Optional[Tuple[int, int]] = None,
                   dps: int = 40) -> BorelFunction:
    """Attach a continuation (per component) to a Borel germ."""
    with mp.workdps(dps):
        coeffs = to_mp(coeffs)
        N = coeffs.shape[0] - 1
        nz = [i for i in range(N + 1) if any(v != 0 for v in coeffs[i])]
        if nz and nz[-1] < N // 2:
            # terminating germ: a polynomial, hence entire
            poly = [None if all(v == 0 for v in coeffs[:, i]) else
                    Approximant("plain", 1.0, 0.0, np.array([complex(v) for v in coeffs[: nz[-1] + 1, i]]),
                                np.ones(1, complex), (nz[-1], 0)) for i in range(coeffs.shape[1])]
            return BorelFunction(k=k, exponent=exponent, coeffs=coeffs, sing=[], phi=phi, kind="plain",
                                 scale=1.0, approx=poly, exact=True)
        if kind is None:
            kind, scale = choose_map(sing, phi)
        else:
            scale = choose_map(sing, phi)[1] if kind != "plain" else 1.0
        N = coeffs.shape[0] - 1
        L, M = order if order is not None else (N // 2 - 1, N // 2)
        approx: List[Optional[Approximant]] = []
        for i in range(coeffs.shape[1]):
            c = list(coeffs[:, i])
            if all(v == 0 for v in c):
                approx.append(None)
                continue
            rot = mp.expj(phi) * scale
            cq = [c[nn] * rot ** nn for nn in range(N + 1)]
            if kind == "plain":
                a, b = robust_pade([complex(v) for v in cq], L, M)
                approx.append(Approximant(kind, scale, phi, a, b, (len(a) - 1, len(b) - 1)))
                continue
            cw = compose(cq, _q_series(kind, N), N)
            a, b, L2, M2 = pade_mp(cw, L, M)
            approx.append(Approximant(kind, scale, phi,
                                      np.array([complex(v) for v in a]),
                                      np.array([complex(v) for v in b]), (L2, M2)))
        return BorelFunction(k=k, exponent=exponent, coeffs=coeffs, sing=list(sing), phi=phi,
                             kind=kind, scale=scale, approx=approx, exact=True)


def to_borel(hier: Hierarchy, phi: float = 0.0, kinds: Optional[Dict[MultiIndex, str]] = None,
             order: Optional[Tuple[int, int]] = None, dps: Optional[int] = None
             ) -> Dict[MultiIndex, BorelFunction]:
    """Borel transform every y~_k and attach continuations along ``phi``.

    The working precision defaults to max(40, N) digits; the conformal
    composition and the Pade solve lose roughly one digit per order.
    """
    out: Dict[MultiIndex, BorelFunction] = {}
    sys = hier.sys
    dps = max(40, hier.N) if dps is None else dps
    with mp.workdps(dps):
        for k in [model.zero(sys.n)] + hier.indices:
            ser = hier.yk(k)
            if not hier.exact:
                ser = ser.as_mp()
            B = series.borel(ser)
            sing = lattice_for(sys, k, hier.active)
            kind = None if kinds is None else kinds.get(k)
            out[k] = build_function(k, B.exponent, B.coeffs, sing, phi=phi, kind=kind,
                                    order=order, dps=dps)
    return out


# ---------------------------------------------------------------------------
# continuation along paths

def continue_along(bf: BorelFunction, path: Sequence[complex], samples: int = 32,
                   exclusion: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Sample Y along a polyline; returns (points, values)."""
    path = [complex(z) for z in path]
    if abs(path[0]) >= bf.radius:
        raise ValueError("path must start inside the disk of convergence")
    gap = _min_gap(bf.sing)
    excl = EXCLUSION_FRACTION * gap if exclusion is None else exclusion
    pts = []
    for a, b in zip(path[:-1], path[1:]):
        t = np.linspace(0, 1, samples, endpoint=False)
        pts.append(a + (b - a) * t)
    pts.append(np.array([path[-1]]))
    pts = np.concatenate(pts)
    for s in bf.sing:
        d = np.min(np.abs(pts - s))
        if d < excl:
            raise PathTooCloseToSingularity(f"path passes within {d:.3g} of {s}")
    if bf.kind != "plain":
        for z in pts:
            if _dist_to_cuts(bf, z) < 1e-12:
                raise PathTooCloseToSingularity("path runs along a cut; use boundary values")
    if not bf.is_zero:
        for ap in bf.approx:
            if ap is None:
                continue
            for pole in ap.poles():
                near_lattice = min(abs(pole - s) for s in bf.sing) < CLUSTER_TOL * max(1, abs(pole))
                if not near_lattice and np.min(np.abs(pts - pole)) < excl:
                    raise ApproximantUnstable(f"spurious pole {pole:.6g} on the path")
    return pts, bf(pts)


def _min_gap(sing: Sequence[complex]) -> float:
    s = list(sing)
    if len(s) < 2:
        return abs(s[0]) if s else 1.0
    gaps = [abs(a - b) for i, a in enumerate(s) for b in s[:i]]
    gaps += [abs(a) for a in s]
    return min(gaps)


# ---------------------------------------------------------------------------
# singularity scan

@dataclass
class BorelGerm:
    location: complex
    exponent: complex
    log_flag: bool
    deriv_order: int
    singular_coeff: np.ndarray
    regular_part: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    fitted_exponent: Optional[float] = None
    anomaly: bool = False
    stokes: Optional[complex] = None

    def to_json(self) -> dict:
        def c(z):
            z = complex(z)
            return [z.real, z.imag]
        return {"location": c(self.location), "exponent": c(self.exponent),
                "log_flag": bool(self.log_flag), "deriv_order": int(self.deriv_order),
                "singular_coeff": [c(v) for v in np.atleast_1d(self.singular_coeff)],
                "fitted_exponent": None if self.fitted_exponent is None else float(self.fitted_exponent),
                "anomaly": bool(self.anomaly),
                "S_j": None if self.stokes is None else c(self.stokes)}


def germ_exponent(sys: model.PreparedSystem, k: MultiIndex, l: int, j: int) -> Tuple[complex, bool, int]:
    """Exponent k.beta' + l beta'_j - 1, log flag, derivative order l m_j.

    The log criteria are taken per case: for k = 0, log iff l beta_j is an
    integer; for k != 0, log iff k.beta + l beta_j is an integer.
    """
    d = model.derived(sys)
    bp, m, beta = d.beta_prime, d.m, sys.beta
    e = complex(np.dot(k, bp) + l * bp[j] - 1)
    if sum(k) == 0:
        v = l * beta[j]
    else:
        v = np.dot(k, beta) + l * beta[j]
    is_int = abs(v.imag) < 1e-12 and abs(v.real - round(v.real)) < 1e-12
    return e, bool(is_int), int(l * m[j])


def fit_exponent(bf: BorelFunction, p0: complex, comp: int, r0: Optional[float] = None,
                 levels: int = 6) -> float:
    """Log-log slope of |Y(p0 + z)| averaged over arcs, Richardson in r.

    The arcs avoid the cut leaving p0 outward (direction arg p0).
    """
    gap = _min_gap(bf.sing)
    r0 = 0.05 * gap if r0 is None else r0
    cut_dir = np.angle(p0) if abs(p0) > 0 else 0.0
    th = cut_dir + np.linspace(0.15, 2 * np.pi - 0.15, 48)
    rs = r0 * 0.5 ** np.arange(levels)
    logs = []
    for r in rs:
        z = p0 + r * np.exp(1j * th)
        v = np.abs(bf(z, 0)[:, comp])
        logs.append(np.mean(np.log(v)))
    logs = np.array(logs)
    slopes = np.diff(logs) / np.diff(np.log(rs))
    # slope(r) = a + c r + ...; Richardson with ratio 2
    rich = 2 * slopes[1:] - slopes[:-1]
    return float(rich[-1])


def singular_coeff(bf: BorelFunction, p0: complex, exponent: complex, mu: int, log_flag: bool,
                   comp: int, r0: Optional[float] = None, levels: int = 5) -> complex:
    """Leading coefficient A(0) of the local model at p0.

    Divides Y(p0 + z) by the leading term of d^mu[z^c (ln z)^{0|1} A(z)]
    on shrinking arcs (arg z measured from the outward ray) and
    extrapolates linearly in r.
    """
    c = complex(exponent)               # exponent before differentiation
    gap = _min_gap(bf.sing)
    r0 = 0.05 * gap if r0 is None else r0
    base = np.angle(p0) if abs(p0) > 0 else 0.0
    th = np.linspace(0.15, 2 * np.pi - 0.15, 48)
    if log_flag and abs(c) < 1e-12 and mu >= 1:
        lead = (-1) ** (mu - 1) * math.factorial(mu - 1)
        powr = -mu
    else:
        lead = complex(mp.gamma(c + 1) * mp.rgamma(c + 1 - mu))
        powr = c - mu
    ests = []
    rs = r0 * 0.5 ** np.arange(levels)
    for r in rs:
        z = r * np.exp(1j * (base + th))
        zp = r ** powr * np.exp(1j * powr * (base + th))
        ests.append(np.mean(bf(p0 + z, 0)[:, comp] / (lead * zp)))
    ests = np.array(ests)
    return complex(2 * ests[-1] - ests[-2])


def scan_singularities(bf: BorelFunction, sys: model.PreparedSystem, sector: Tuple[float, float] = (-np.pi, np.pi),
                       radius: float = 3.0, stable_tol: float = 1e-6, residue_tol: float = 1e-10,
                       orders: Optional[Tuple[int, int]] = None, comps: Optional[Sequence[int]] = None
                       ) -> Tuple[List[BorelGerm], List[complex], List[complex]]:
    """Pole-cluster scan of a plain Pade approximant of A.

    Returns germs matched to the lattice {l lambda_j}, the stable poles, and
    the anomalies (stable poles away from the lattice).
    """
    N = bf.N
    L, M = orders if orders is not None else (N // 2 - 1, N // 2)
    lam = sys.lam
    lattice = [(l, j, complex(l * lam[j])) for j in range(sys.n) for l in range(1, 12)]
    germs: List[BorelGerm] = []
    stable_all: List[complex] = []
    anomalies: List[complex] = []
    comps = range(bf.n) if comps is None else comps
    for i in comps:
        c = bf._c[:, i]
        if not np.any(c):
            continue
        a1, b1 = robust_pade(c, L, M)
        a2, b2 = robust_pade(c, L - 2, M - 2)
        p1 = np.roots(b1[::-1]) if len(b1) > 1 else np.zeros(0)
        p2 = np.roots(b2[::-1]) if len(b2) > 1 else np.zeros(0)
        for z in p1:
            if abs(z) > radius:
                continue
            ang = np.angle(z)
            if not (sector[0] - 1e-12 <= ang <= sector[1] + 1e-12):
                continue
            if len(p2) == 0 or np.min(np.abs(p2 - z)) > stable_tol * max(1, abs(z)) ** 1 * 1e3:
                continue
            res = _residue(a1, b1, z)
            if abs(res) < residue_tol and not _multiple_root(b1, z):
                continue
            stable_all.append(complex(z))
            match = min(lattice, key=lambda t: abs(t[2] - z))
            if abs(match[2] - z) <= CLUSTER_TOL * abs(lam[match[1]]):
                continue
            anomalies.append(complex(z))
        for (l, j, loc) in lattice:
            if abs(loc) > radius or not (sector[0] - 1e-12 <= np.angle(loc) <= sector[1] + 1e-12):
                continue
            near = [z for z in stable_all if abs(z - loc) <= CLUSTER_TOL * abs(lam[j])]
            if not near or any(g.location == loc for g in germs):
                continue
            e, logf, mu = germ_exponent(sys, model.zero(sys.n) if sum(bf.k) == 0 else bf.k, l, j)
            view = _plain_view(bf, i, a1, b1)
            slope = fit_exponent(view, loc, 0)
            A0 = singular_coeff(view, loc, complex(e), mu, logf, 0)
            germs.append(BorelGerm(location=loc, exponent=e, log_flag=logf, deriv_order=mu,
                                   singular_coeff=np.array([A0]), fitted_exponent=slope + mu))
    return germs, stable_all, anomalies


def _multiple_root(b, z, tol=1e-6):
    db = np.polyder(b[::-1])
    return abs(np.polyval(db, z)) < tol * max(1, np.max(np.abs(b)))


def _residue(a, b, z):
    db = np.polyder(b[::-1])
    d = np.polyval(db, z)
    if d == 0:
        return np.inf
    return np.polyval(a[::-1], z) / d


def _plain_view(bf: BorelFunction, comp: int, a, b) -> BorelFunction:
    ap = Approximant("plain", 1.0, 0.0, a, b, (len(a) - 1, len(b) - 1))
    c = bf.coeffs[:, comp:comp + 1]
    view = BorelFunction(k=bf.k, exponent=bf.exponent, coeffs=c, sing=bf.sing, phi=0.0,
                         kind="plain", scale=1.0, approx=[ap], exact=bf.exact)
    return view


# ---------------------------------------------------------------------------
# Stokes constants

def r_factor(beta_j: complex) -> complex:
    """r_j of the Stokes-constant formula (read with l = 1)."""
    b = complex(beta_j)
    if abs(b.imag) < 1e-12 and abs(b.real - round(b.real)) < 1e-12:
        return -2j * np.pi
    m = 1 - math.floor(b.real)
    return complex(1 - np.exp(2j * np.pi * (b + m - 1)))


def _darboux_basis(n: int, i: int, c, mu: int, logcase: bool, lam_j, exact=True):
    """[p^n] of the local-model term z^{c+i} (or z^i ln z) after mu derivatives.

    ``z = p - lam_j = e^{i pi} lam_j (1 - p/lam_j)``.
    """
    lam_j = mp.mpc(lam_j)
    pref = mp.expjpi(1) * lam_j  # z = pref * (1 - p/lam_j)
    inv_n = lam_j ** (-n)
    if not logcase:
        s = c + i - mu
        G = mp.gamma(c + i + 1) * mp.rgamma(c + i + 1 - mu)
        # z^s = exp(s log pref) (1 - p/lam)^s with the branch fixed by arg pref
        zs = mp.exp(s * (mp.log(lam_j) + 1j * mp.pi))
        return G * zs * mp.gamma(n - s) * mp.rgamma(-s) / mp.factorial(n) * inv_n
    # log case, c = 0: d^mu (z^i ln z)
    if i < mu:
        q = mu - i
        coef = mp.factorial(i) * (-1) ** (mu - i - 1) * mp.factorial(mu - i - 1)
        zq = mp.exp(-q * (mp.log(lam_j) + 1j * mp.pi))
        return coef * zq * mp.binomial(n + q - 1, q - 1) * inv_n
    q = i - mu
    coef = mp.factorial(i) / mp.factorial(i - mu)
    zq = mp.exp(q * (mp.log(lam_j) + 1j * mp.pi))
    if n <= q:
        return mp.mpc(0)
    # (1-u)^q ln(1-u), u = p/lam; ln z = ln(1-u) + const, the const part is polynomial
    return coef * zq * (-1) ** (q + 1) * mp.factorial(q) * mp.factorial(n - q - 1) / mp.factorial(n) * inv_n


def darboux_fit(coeffs: Sequence, sys: model.PreparedSystem, j: int, terms: int = 8,
                nmin: Optional[int] = None, dps: int = 40):
    """Least-squares fit of local-model coefficients A_0..A_{terms-1} at lambda_j.

    Uses Taylor coefficients b_n for n in [nmin, N].  Only singularities of
    minimal modulus show up in the large-order behaviour, so lambda_j must
    be the unique closest lattice point.
    """
    lam = sys.lam
    dist = [abs(l) for l in lam]
    if any(d < dist[j] - 1e-12 for d in dist) or sum(abs(d - dist[j]) < 1e-12 for d in dist) > 1:
        raise GermNotFound(f"lambda_{j + 1} is not the unique closest singularity; the fit cannot isolate it")
    d = model.derived(sys)
    with mp.workdps(dps):
        c = mp.mpc(complex(d.beta_prime[j])) - 1
        mu = int(d.m[j])
        bj = complex(sys.beta[j])
        logcase = abs(bj.imag) < 1e-12 and abs(bj.real - round(bj.real)) < 1e-12
        N = len(coeffs) - 1
        nmin = max(N // 2, terms + 1) if nmin is None else nmin
        ns = list(range(nmin, N + 1))
        rows = [[_darboux_basis(n, i, c, mu, logcase, complex(lam[j])) for i in range(terms)] for n in ns]
        A = mp.matrix(rows)
        b = mp.matrix([mp.mpc(coeffs[n]) for n in ns])
        # column scaling
        sc = []
        for i in range(terms):
            v = max(abs(A[r, i]) for r in range(A.rows))
            sc.append(v if v != 0 else mp.mpf(1))
        for r in range(A.rows):
            s_r = abs(b[r]) if b[r] != 0 else mp.mpf(1)
            for i in range(terms):
                A[r, i] = A[r, i] / sc[i] / s_r
            b[r] = b[r] / s_r
        AH = A.H
        x = mp.lu_solve(AH * A, AH * b)
        sol = [x[i] / sc[i] for i in range(terms)]
        resid = A * x - b
        rel = max(abs(resid[r]) for r in range(resid.rows))
        return sol, float(rel)


def stokes_constant(bf0: BorelFunction, sys: model.PreparedSystem, j: int = 0,
                    terms: int = 8, dps: int = 40, zero_tol: float = 1e-10) -> complex:
    """S_j = r_j Gamma(beta'_j) (A_{1,j})_j(0) from the germ of Y_0.

    Returns 0 when the fitted singular coefficient vanishes (Y_0 analytic
    at lambda_j).
    """
    c = bf0.coeffs[:, j]
    cc = to_complex(c)
    if not np.any(cc):
        return 0j
    sol, _ = darboux_fit(list(c), sys, j, terms=terms, dps=dps)
    A0 = complex(sol[0])
    scale = float(np.max(np.abs(cc)))
    d = model.derived(sys)
    if abs(A0) < zero_tol * max(scale, 1e-300):
        return 0j
    return r_factor(sys.beta[j]) * complex(mp.gamma(mp.mpc(complex(d.beta_prime[j])))) * A0


def jump_ratio(bf0: BorelFunction, bf1: BorelFunction, t, m: int, comp: int = 0) -> np.ndarray:
    """[Y_0^+(t) - Y_0^-(t)] / Y_{e1}^{(m)}(t - 1) for t in (1, 2).

    On (1, 2) this ratio is constant and equals S_1.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    jump = bf0.boundary(t, +1)[:, comp] - bf0.boundary(t, -1)[:, comp]
    den = np.array([bf1.deriv(ti - 1, m)[comp] for ti in t])
    return jump / den
