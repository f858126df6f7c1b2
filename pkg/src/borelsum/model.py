"""Prepared-form ODE systems.

A prepared system is

    y' = f0(x) - Lambda y - (1/x) B y + g(x, y),

with ``Lambda = diag(lambda)``, ``B = diag(beta)`` and

    g(x, y) = sum_{s, l} g_{s,l} x^{-s} y^l,   |l| >= 1.

The normalizations checked here are

* n1, n3: ``lambda_1 = 1`` and ``arg lambda_i`` strictly increasing,
* n2: eigenvalues nonzero and pairwise distinct,
* n4: ``Re beta_j < 0``,
* n5: ``M > 1 + max Re(-beta_j)``, ``f0 = O(x^{-M-1})`` and
  ``g = O(y^2, x^{-M-1} y)``.

Multi-indices are plain tuples of nonnegative integers of length ``n``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

import numpy as np

MultiIndex = Tuple[int, ...]

# tolerances from the module design notes
RELATION_TOL = 1e-10
ANGLE_TOL = 1e-8


class SpecError(ValueError):
    """Malformed problem-spec input."""


class Resonant(Exception):
    """Raised when an integer relation among the eigenvalues is found."""

    def __init__(self, witness: str):
        super().__init__(witness)
        self.witness = witness


# ---------------------------------------------------------------------------
# multi-indices

def unit(n: int, i: int) -> MultiIndex:
    return tuple(1 if r == i else 0 for r in range(n))


def zero(n: int) -> MultiIndex:
    return (0,) * n


def norm1(k: Sequence[int]) -> int:
    return int(sum(k))


def precedes(a: Sequence[int], b: Sequence[int]) -> bool:
    """Componentwise ``a <= b`` (the partial order used for predecessors)."""
    return all(x <= y for x, y in zip(a, b))


def graded(active: Sequence[bool], K: int, start: int = 1) -> List[MultiIndex]:
    """All multi-indices supported on ``active`` with ``start <= |k| <= K``.

    Order is graded, then reverse lexicographic inside a grade, so every
    componentwise predecessor of ``k`` appears before ``k``.
    """
    n = len(active)
    idx = [i for i in range(n) if active[i]]
    out: List[MultiIndex] = []
    for grade in range(start, K + 1):
        level = []
        for comb in itertools.combinations_with_replacement(idx, grade):
            k = [0] * n
            for i in comb:
                k[i] += 1
            level.append(tuple(k))
        out.extend(sorted(set(level), reverse=True))
    return out


def binom(l: Sequence[int], j: Sequence[int]) -> int:
    out = 1
    for a, b in zip(l, j):
        out *= math.comb(a, b)
    return out


def key(k: Sequence[int]) -> str:
    return ",".join(str(int(v)) for v in k)


def parse_key(s: str) -> MultiIndex:
    return tuple(int(v) for v in s.split(","))


# ---------------------------------------------------------------------------
# data types

@dataclass(frozen=True)
class PreparedSystem:
    """ODE data in prepared form.

    ``f0`` has shape ``(trunc_x + 1, n)``; row ``s`` is the coefficient of
    ``x^{-s}``.  ``g`` maps ``(s, l)`` to a complex n-vector.
    """

    n: int
    lam: np.ndarray
    beta: np.ndarray
    f0: np.ndarray
    g: Dict[Tuple[int, MultiIndex], np.ndarray]
    M: int
    trunc_x: int
    harness: bool = False
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=complex).reshape(self.n))
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=complex).reshape(self.n))
        f0 = np.zeros((self.trunc_x + 1, self.n), dtype=complex)
        src = np.asarray(self.f0, dtype=complex).reshape(-1, self.n)
        rows = min(len(src), self.trunc_x + 1)
        f0[:rows] = src[:rows]
        object.__setattr__(self, "f0", f0)
        g = {}
        for (s, l), v in self.g.items():
            l = tuple(int(a) for a in l)
            if len(l) != self.n or min(l) < 0 or sum(l) < 1:
                raise SpecError(f"bad multi-index l={l} in g")
            v = np.asarray(v, dtype=complex).reshape(self.n)
            if np.any(v != 0):
                g[(int(s), l)] = v
        object.__setattr__(self, "g", dict(sorted(g.items(), key=lambda t: (t[0][0], t[0][1]))))

    @property
    def degree(self) -> int:
        return max((sum(l) for (_, l) in self.g), default=0)

    @property
    def is_linear(self) -> bool:
        return all(sum(l) == 1 for (_, l) in self.g)

    @property
    def is_real(self) -> bool:
        vals = [self.lam, self.beta, self.f0.ravel()] + list(self.g.values())
        return all(np.all(np.asarray(v).imag == 0) for v in vals)

    def with_field(self, **kw) -> "PreparedSystem":
        return replace(self, **kw)

    def rhs(self, x, y):
        """Right-hand side f(x, y) of the ODE, for scalar complex x."""
        y = np.asarray(y, dtype=complex)
        xi = 1.0 / x
        powers = xi ** np.arange(self.trunc_x + 1)
        out = powers @ self.f0 - self.lam * y - self.beta * y * xi
        for (s, l), v in self.g.items():
            out = out + v * xi**s * np.prod(y ** np.asarray(l))
        return out


@dataclass(frozen=True)
class DerivedConstants:
    m: np.ndarray
    beta_prime: np.ndarray
    stokes_dirs: List[Tuple[int, MultiIndex, float]] = field(default_factory=list)


def derived(sys: PreparedSystem, k_max: int = 0) -> DerivedConstants:
    """``m_i = 1 - floor(Re beta_i)`` and ``beta'_i = beta_i + m_i``.

    The floor is taken of the real part, so ``Re beta' = 1 + frac(Re beta)`` lies in [1, 2).
    """
    m = np.array([1 - math.floor(b.real) for b in sys.beta], dtype=int)
    bp = sys.beta + m
    dirs = check_nonresonance(sys.lam, k_max).stokes_dirs if k_max > 0 else []
    return DerivedConstants(m=m, beta_prime=bp, stokes_dirs=dirs)


def active_set(lam: Sequence[complex], xi: float = 0.0) -> List[bool]:
    """Eigenvalues with ``Re(lambda_i e^{i xi}) > 0``.

    These exponentials decay along ``arg x = xi``; this is condition (c1)
    for the transseries indices.
    """
    return [bool((complex(l) * np.exp(1j * xi)).real > 1e-12) for l in lam]


# ---------------------------------------------------------------------------
# validation

def validate_prepared(sys: PreparedSystem) -> List[str]:
    """List the failed normalizations; empty when the system is prepared."""
    out: List[str] = []
    lam = sys.lam
    if abs(lam[0] - 1) > 1e-14:
        out.append("n3 violated: lambda_1 != 1")
    args = np.angle(lam)
    # arg taken in [0, 2 pi) so that lambda_1 = 1 comes first
    args = np.where(args < -1e-15, args + 2 * np.pi, args)
    for i in range(1, sys.n):
        if not args[i] > args[i - 1]:
            out.append(f"n3 violated: arg lambda not increasing at i={i + 1}")
    for i in range(sys.n):
        if lam[i] == 0:
            out.append(f"n2 violated: lambda_{i + 1} = 0")
        for j in range(i):
            if abs(lam[i] - lam[j]) < RELATION_TOL:
                out.append(f"n2 violated: lambda_{j + 1} = lambda_{i + 1}")
    for j, b in enumerate(sys.beta):
        if not b.real < 0:
            out.append(f"n4 violated at j={j + 1}")
    bound = 1 + max(-b.real for b in sys.beta)
    if not sys.M > bound:
        out.append(f"n5 violated: M={sys.M} must exceed {bound:g}")
    for s in range(min(sys.M, sys.trunc_x) + 1):
        if np.any(sys.f0[s] != 0):
            out.append(f"n5 violated at f0 order s={s}")
    for (s, l), _ in sys.g.items():
        if sum(l) == 1 and s <= sys.M:
            out.append(f"n5 violated at (s={s},l=e{l.index(1) + 1})")
    return out


def blocking_violations(sys: PreparedSystem) -> List[str]:
    """Violations that stop a run; harness systems are exempt from n4 and n5."""
    out = validate_prepared(sys)
    if sys.harness:
        out = [v for v in out if not v.startswith(("n4", "n5"))]
    return out


# ---------------------------------------------------------------------------
# nonresonance

@dataclass
class NonresonanceReport:
    resonant: bool
    witness: str
    stokes_dirs: List[Tuple[int, MultiIndex, float]]


def _relations(lam: np.ndarray, k_max: int) -> Iterator[Tuple[int, ...]]:
    n = len(lam)
    for coeffs in itertools.product(range(-k_max, k_max + 1), repeat=n):
        if 0 < sum(abs(c) for c in coeffs) <= k_max:
            # one representative per +- pair
            first = next(c for c in coeffs if c != 0)
            if first > 0:
                yield coeffs


def _fmt_relation(c: Sequence[int]) -> str:
    parts = []
    for i, a in enumerate(c):
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        term = f"lambda{i + 1}" if mag == 1 else f"{mag}*lambda{i + 1}"
        parts.append((sign, term))
    s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, term in parts[1:]:
        s += f" {sign} {term}"
    return s + " = 0"


def _critical_angles(lam: np.ndarray) -> List[float]:
    edges = []
    for l in lam:
        a = float(np.angle(l))
        edges += [a - np.pi / 2, a + np.pi / 2]
    edges = sorted(e % (2 * np.pi) for e in edges)
    pts = []
    for i, e in enumerate(edges):
        nxt = edges[(i + 1) % len(edges)] + (2 * np.pi if i + 1 == len(edges) else 0)
        pts.append(0.5 * (e + nxt) % (2 * np.pi))
    pts += [float(np.angle(l)) % (2 * np.pi) for l in lam]
    return sorted(set(round(p, 14) for p in pts))


def check_nonresonance(lam: Sequence[complex], k_max: int) -> NonresonanceReport:
    """Brute-force nonresonance test up to ``|k| <= k_max``.

    Checks Z-linear independence of the eigenvalues and distinctness of the
    directions of ``lambda_i - k.lambda`` inside every half-plane ``H_theta``
    (sampled at the finitely many combinatorially distinct angles).
    Raises :class:`Resonant` with a witness when either test fails.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    lam = np.asarray(lam, dtype=complex)
    n = len(lam)
    scale = max(1.0, float(np.max(np.abs(lam))))
    for c in _relations(lam, k_max):
        if abs(np.dot(c, lam)) < RELATION_TOL * scale:
            raise Resonant(_fmt_relation(c))
    found: Dict[Tuple[int, MultiIndex], float] = {}
    for theta in _critical_angles(lam):
        e = np.exp(-1j * theta)
        act = [i for i in range(n) if (lam[i] * e).real > 1e-12]
        if not act:
            continue
        mask = [i in act for i in range(n)]
        pts = []
        for k in [zero(n)] + graded(mask, k_max):
            kl = np.dot(k, lam)
            for i in act:
                p = lam[i] - kl
                if abs(p) < RELATION_TOL * scale:
                    continue
                if (p * e).real > 1e-12:
                    pts.append((i, k, p))
        for a in range(len(pts)):
            for b in range(a):
                pa, pb = pts[a][2], pts[b][2]
                d = abs(np.angle(pa / pb))
                if d < ANGLE_TOL:
                    ia, ka, _ = pts[a]
                    ib, kb, _ = pts[b]
                    raise Resonant(
                        f"lambda{ia + 1} - k{ka}.lambda and lambda{ib + 1} - k{kb}.lambda "
                        f"share a direction in H_theta, theta={theta:.6f}")
        for i, k, p in pts:
            found[(i + 1, k)] = float(np.angle(p))
    dirs = sorted(((i, k, a) for (i, k), a in found.items()), key=lambda t: (t[2], t[0], t[1]))
    return NonresonanceReport(False, "", dirs)


# ---------------------------------------------------------------------------
# the (n5) shift

def _xmul(a: np.ndarray, b: np.ndarray, N: int) -> np.ndarray:
    """Truncated product of x^{-1}-series with leading axis the order."""
    out = np.zeros((N + 1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]), dtype=complex)
    for i in range(min(N + 1, len(a))):
        if not np.any(a[i]):
            continue
        top = min(N + 1 - i, len(b))
        out[i:i + top] += a[i] * b[:top]
    return out


def _poly_in_y(sys: PreparedSystem, N: int):
    """g as a map l -> (N+1, n) coefficient array in x^{-1}."""
    out: Dict[MultiIndex, np.ndarray] = {}
    for (s, l), v in sys.g.items():
        if s > N:
            continue
        arr = out.setdefault(l, np.zeros((N + 1, sys.n), dtype=complex))
        arr[s] += v
    return out


def _formal_solution(sys: PreparedSystem, order: int) -> np.ndarray:
    """Coefficients a_1..a_order of the formal power-series solution.

    Works for raw systems (linear terms in g allowed), which is what the
    shift needs; transgen has the production version.
    """
    n, N = sys.n, order
    a = np.zeros((N + 1, n), dtype=complex)
    poly = _poly_in_y(sys, N)
    for l in range(1, N + 1):
        rhs = sys.f0[l].copy() if l <= sys.trunc_x else np.zeros(n, complex)
        rhs += (l - 1) * a[l - 1] - sys.beta * a[l - 1]
        rhs += _eval_poly(poly, a, N)[l]
        if np.any(sys.lam == 0):
            raise Resonant("resonance at order %d: lambda_j = 0" % l)
        a[l] = rhs / sys.lam
    return a


def _eval_poly(poly, y: np.ndarray, N: int) -> np.ndarray:
    n = y.shape[1]
    out = np.zeros((N + 1, n), dtype=complex)
    cache: Dict[MultiIndex, np.ndarray] = {}
    for l, coef in poly.items():
        mono = _monomial(y, l, N, cache)
        out += _xmul(coef, mono[:, None], N)
    return out


def _monomial(y: np.ndarray, l: MultiIndex, N: int, cache) -> np.ndarray:
    if l in cache:
        return cache[l]
    if sum(l) == 0:
        res = np.zeros(N + 1, dtype=complex)
        res[0] = 1
    else:
        r = next(i for i in range(len(l)) if l[i] > 0)
        prev = list(l)
        prev[r] -= 1
        res = _xmul(_monomial(y, tuple(prev), N, cache), y[:, r], N)
    cache[l] = res
    return res


def _poly_compose_shift(poly, h: np.ndarray, n: int, N: int):
    """Coefficients of g(x, z + h) as a polynomial in z.

    Returns map l -> (N+1, n) array; includes the l = 0 term g(x, h).
    """
    out: Dict[MultiIndex, np.ndarray] = {}
    cache: Dict[MultiIndex, np.ndarray] = {}
    for l, coef in poly.items():
        for j in itertools.product(*[range(li + 1) for li in l]):
            c = binom(l, j)
            rest = tuple(a - b for a, b in zip(l, j))
            hmono = _monomial(h, rest, N, cache)
            term = c * _xmul(coef, hmono[:, None], N)
            if np.any(term):
                out[j] = out.get(j, 0) + term
    return out


def shift_to_n5(sys_raw: PreparedSystem, M: int) -> PreparedSystem:
    """Bring a system satisfying n1-n4 to a system satisfying n5.

    Three steps: the shift ``y = y~ + h``, ``h = sum_{k<=M} a_k x^{-k}``
    taken from the truncated formal solution; absorption of the diagonal
    ``x^{-1}`` linear terms into ``beta``; and a near-identity gauge
    ``y~ = (I + sum_k V_k x^{-k}) z`` removing the remaining linear terms of
    order ``x^{-s}``, ``s <= M``.  Only polynomial g is supported, and all
    series are truncated at ``trunc_x``.
    """
    n, N = sys_raw.n, sys_raw.trunc_x
    h = _formal_solution(sys_raw, M)
    lam, beta = sys_raw.lam, sys_raw.beta
    # new forcing: f0 - h' - Lambda h - B h / x + g(x, h)
    poly = _poly_in_y(sys_raw, N)
    hfull = np.zeros((N + 1, n), dtype=complex)
    hfull[: M + 1] = h
    comp = _poly_compose_shift(poly, hfull, n, N)
    f0 = sys_raw.f0.copy()
    for k in range(1, M + 1):
        if k + 1 <= N:
            f0[k + 1] += k * hfull[k]          # -h'
        f0[k] -= lam * hfull[k]
        if k + 1 <= N:
            f0[k + 1] -= beta * hfull[k]
    f0 += comp.pop((0,) * n, np.zeros((N + 1, n), complex))
    # linear part L(x) z with L_s an n x n matrix
    L = np.zeros((N + 1, n, n), dtype=complex)
    for r in range(n):
        e = unit(n, r)
        if e in comp:
            L[:, :, r] += comp.pop(e)
    if np.any(L[0]):
        raise SpecError("shift produced an x^0 linear term; input violates n2")
    # absorb diag of L_1 into beta
    new_beta = beta - np.diag(L[1])
    L[1] = L[1] - np.diag(np.diag(L[1]))
    # gauge T = I + sum V_k x^{-k}; V_k off-diagonal from order k, diagonal from order k + 1
    V = np.zeros((M + 2, n, n), dtype=complex)
    V[0] = np.eye(n)
    Bm = np.diag(new_beta)
    def residual(k):
        r = Bm @ V[k - 1] - V[k - 1] @ Bm - (k - 1) * V[k - 1]
        for s in range(1, k + 1):
            r = r - L[s] @ V[k - s]
        return r

    for k in range(1, M + 2):
        if k >= 2:
            # the diagonal of the order-k equation fixes diag V_{k-1}
            d = np.diag(residual(k)) + (k - 1) * np.diag(V[k - 1])
            V[k - 1] = V[k - 1] - np.diag(np.diag(V[k - 1])) + np.diag(d / (k - 1))
        if k <= M:
            rhs = residual(k)
            for i in range(n):
                for j in range(n):
                    if i != j:
                        V[k, i, j] = rhs[i, j] / (lam[j] - lam[i])
    V = V[: M + 1]
    T = np.zeros((N + 1, n, n), dtype=complex)
    T[: M + 1] = V
    Tinv = _series_matinv(T, N)
    # z' = T^{-1}[(A T - T') z + f0 + g_nl(x, T z)],  A = -Lambda - B/x + L
    A = np.zeros((N + 1, n, n), dtype=complex)
    A[0] = -np.diag(lam)
    if N >= 1:
        A[1] = -Bm
    A += L
    Tp = np.zeros_like(T)
    for k in range(1, N):
        Tp[k + 1] = -k * T[k]
    lin = _matser_mul(Tinv, _matser_mul(A, T, N) - Tp, N)
    lin[0] += np.diag(lam)
    if N >= 1:
        lin[1] += Bm
    new_f0 = _matvec_series(Tinv, f0, N)
    g_new: Dict[Tuple[int, MultiIndex], np.ndarray] = {}
    for s in range(N + 1):
        for r in range(n):
            v = lin[s, :, r]
            if np.any(np.abs(v) > 1e-14):
                g_new[(s, unit(n, r))] = v
    # nonlinear part g_nl(x, T z): expand each monomial in z
    nl = {l: c for l, c in comp.items() if sum(l) >= 2}
    for l, coef in nl.items():
        # (T z)_r = sum_q T_{rq} z_q ; expand prod_r (T z)_r^{l_r}
        expanded = _expand_linear_monomial(T, l, N)
        for lz, ser in expanded.items():
            term = _xmul(coef, ser[:, None], N)  # (N+1, n) times scalar series
            term = _matvec_series(Tinv, term, N)
            for s in range(N + 1):
                if np.any(np.abs(term[s]) > 1e-300):
                    kk = (s, lz)
                    g_new[kk] = g_new.get(kk, 0) + term[s]
    g_new = {k: v for k, v in g_new.items() if np.any(np.abs(v) > 1e-14)}
    return replace(sys_raw, beta=new_beta, f0=new_f0, g=g_new, M=M)


def _matser_mul(a, b, N):
    out = np.zeros((N + 1,) + a.shape[1:2] + b.shape[2:], dtype=complex)
    for i in range(N + 1):
        if not np.any(a[i]):
            continue
        for j in range(N + 1 - i):
            out[i + j] += a[i] @ b[j]
    return out


def _matvec_series(a, v, N):
    out = np.zeros((N + 1, a.shape[1]), dtype=complex)
    for i in range(N + 1):
        if not np.any(a[i]):
            continue
        for j in range(N + 1 - i):
            out[i + j] += a[i] @ v[j]
    return out


def _series_matinv(T, N):
    """Inverse of a matrix series with T_0 = I."""
    n = T.shape[1]
    out = np.zeros_like(T)
    out[0] = np.eye(n)
    for k in range(1, N + 1):
        acc = np.zeros((n, n), dtype=complex)
        for s in range(1, k + 1):
            acc += T[s] @ out[k - s]
        out[k] = -acc
    return out


def _expand_linear_monomial(T, l: MultiIndex, N: int) -> Dict[MultiIndex, np.ndarray]:
    """prod_r (sum_q T_{rq}(x) z_q)^{l_r} as map z-multi-index -> x-series."""
    n = len(l)
    cur: Dict[MultiIndex, np.ndarray] = {zero(n): np.eye(1, N + 1, 0, dtype=complex)[0]}
    for r in range(n):
        for _ in range(l[r]):
            nxt: Dict[MultiIndex, np.ndarray] = {}
            for lz, ser in cur.items():
                for q in range(n):
                    t = T[:, r, q]
                    if not np.any(t):
                        continue
                    prod = _xmul(ser[:, None], t[:, None], N)[:, 0]
                    k2 = list(lz)
                    k2[q] += 1
                    k2 = tuple(k2)
                    nxt[k2] = nxt.get(k2, 0) + prod
            cur = nxt
    return cur


# ---------------------------------------------------------------------------
# spec files

def _num(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise SpecError(f"complex number must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)):
        return complex(v)
    raise SpecError(f"not a number: {v!r}")


def _vec(v, n: int, what: str) -> np.ndarray:
    if isinstance(v, (int, float)) or (isinstance(v, list) and len(v) == 2 and n != 2
                                       and all(isinstance(t, (int, float)) for t in v) and n == 1):
        v = [v]
    if not isinstance(v, list) or len(v) != n:
        raise SpecError(f"{what} must have length n={n}")
    return np.array([_num(t) for t in v], dtype=complex)


def system_from_dict(d: dict) -> PreparedSystem:
    """Build a system from the problem-spec tree (see README for the schema).

    ``f0`` is a list of ``[s, value-vector]`` pairs, or a dense list of
    vectors indexed by ``s``.
    """
    try:
        n = int(d["n"])
        lam = _vec(d["lambda"], n, "lambda")
        beta = _vec(d["beta"], n, "beta")
        M = int(d["M"])
        trunc_x = int(d.get("trunc_x", 40))
    except KeyError as e:
        raise SpecError(f"missing field {e.args[0]!r}") from None
    f0 = np.zeros((trunc_x + 1, n), dtype=complex)
    for entry in d.get("f0", []):
        if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], int)):
            raise SpecError("f0 entries must be [s, [v_1, ..., v_n]]")
        s, v = entry
        if s <= trunc_x:
            f0[s] += _vec(v, n, "f0 value")
    g = {}
    for entry in d.get("g", []):
        try:
            s = int(entry["s"])
            l = tuple(int(a) for a in entry["l"])
            v = _vec(entry["value"], n, "g value")
        except (KeyError, TypeError) as e:
            raise SpecError(f"bad g entry {entry!r}") from e
        g[(s, l)] = g.get((s, l), 0) + v
    return PreparedSystem(n=n, lam=lam, beta=beta, f0=f0, g=g, M=M, trunc_x=trunc_x,
                          harness=bool(d.get("harness", False)), name=str(d.get("name", "")))


def _cpl(z: complex):
    z = complex(z)
    return [z.real, z.imag]


def system_to_dict(sys: PreparedSystem) -> dict:
    f0 = [[s, [_cpl(v) for v in sys.f0[s]]] for s in range(sys.trunc_x + 1) if np.any(sys.f0[s])]
    g = [{"s": s, "l": list(l), "value": [_cpl(v) for v in val]} for (s, l), val in sys.g.items()]
    out = {"name": sys.name, "n": sys.n, "lambda": [_cpl(v) for v in sys.lam],
           "beta": [_cpl(v) for v in sys.beta], "M": sys.M, "trunc_x": sys.trunc_x,
           "f0": f0, "g": g}
    if sys.harness:
        out["harness"] = True
    return out


def load_spec(path: str) -> PreparedSystem:
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    return system_from_dict(d)


def scalar_system(beta: float, f0: Dict[int, complex], g: Dict[Tuple[int, int], complex] | None = None,
                  M: int = 3, trunc_x: int = 40, harness: bool = False, name: str = "") -> PreparedSystem:
    """Shorthand for the n = 1, lambda = 1 systems used throughout the tests."""
    f = np.zeros((trunc_x + 1, 1), dtype=complex)
    for s, v in f0.items():
        f[s, 0] = v
    gg = {(s, (l,)): np.array([v]) for (s, l), v in (g or {}).items()}
    return PreparedSystem(n=1, lam=[1.0], beta=[beta], f0=f, g=gg, M=M, trunc_x=trunc_x,
                          harness=harness, name=name)
