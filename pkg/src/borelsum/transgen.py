"""Transseries coefficient hierarchy.

With ``y = sum_k C^k e^{-k.lambda x} x^{k.m} y~_k`` and
``y~_k = x^{-k.beta'} u_k(x)``, the integer-power series ``u_k`` obey, at
order ``x^{-l}`` and component ``i``,

    -(l-1) a_{l-1} + (lambda_i - k.lambda) a_l + (beta_i - k.beta) a_{l-1}
        - [D u_k]_l = [x^{k.beta} t_k]_l,

where ``D_{ir} = (d_{e_r})_i`` and ``t_k`` collects the ``|j| >= 2`` terms.
For ``k = e_i`` the i-th component has zero leading coefficient and the
equation at order ``l+1`` fixes ``a_l`` instead; ``a_0`` is the free
normalization, set to 1 so that ``y~_{e_i} = x^{-beta'_i}(e_i + O(1/x))``.

Sign note: the linear coupling enters as ``-D u_k``.  This follows from
moving ``g``'s linear part to the left-hand side.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterator, List, Sequence, Tuple

import mpmath as mp
import numpy as np

from . import model
from .model import MultiIndex, PreparedSystem
from .series import GenSeries, X, cauchy, to_complex, to_mp, zeros

DEFAULT_DPS = 40


class MissingPredecessor(KeyError):
    pass


class ResonantDenominator(ZeroDivisionError):
    pass


def _num(v, exact):
    return mp.mpc(complex(v)) if exact else complex(v)


def _arr(a, exact):
    return to_mp(np.asarray(a, dtype=complex)) if exact else np.asarray(a, dtype=complex)


@dataclass
class Hierarchy:
    """Formal solution y~_0 and the y~_k for ``0 < |k| <= K`` to order N.

    ``a0`` holds y~_0 (row l is the x^{-l} coefficient, row 0 is zero);
    ``u[k]`` holds u_k; ``D[j]`` holds d_j; ``tau[k]`` holds x^{k.beta} t_k.
    """

    sys: PreparedSystem
    N: int
    K: int
    xi: float
    active: List[bool]
    exact: bool
    a0: np.ndarray
    D: Dict[MultiIndex, np.ndarray] = field(default_factory=dict)
    u: Dict[MultiIndex, np.ndarray] = field(default_factory=dict)
    tau: Dict[MultiIndex, np.ndarray] = field(default_factory=dict)
    y0_powers: Dict[MultiIndex, np.ndarray] = field(default_factory=dict)
    Dext: Dict[MultiIndex, np.ndarray] = field(default_factory=dict)

    @property
    def m(self) -> np.ndarray:
        return model.derived(self.sys).m

    @property
    def beta_prime(self) -> np.ndarray:
        return model.derived(self.sys).beta_prime

    def exponent(self, k) -> complex:
        """Leading exponent k.beta' of y~_k (scalar, possibly mp)."""
        bp = [_num(b, self.exact) for b in self.beta_prime]
        return sum((ki * b for ki, b in zip(k, bp)), _num(0, self.exact))

    @property
    def y0(self) -> GenSeries:
        return GenSeries(_num(0, self.exact), self.a0, X)

    def yk(self, k) -> GenSeries:
        k = tuple(k)
        if k == model.zero(self.sys.n):
            return self.y0
        return GenSeries(self.exponent(k), self.u[k], X)

    @property
    def indices(self) -> List[MultiIndex]:
        return list(self.u.keys())

    def dump(self) -> dict:
        return {
            "N": self.N, "K": self.K,
            "y0": self.y0.as_complex().to_json(),
            "yk": {model.key(k): self.yk(k).as_complex().to_json() for k in self.u},
        }


# ---------------------------------------------------------------------------
# y~_0

def _g_by_l(sys: PreparedSystem, N: int, exact: bool) -> Dict[MultiIndex, np.ndarray]:
    out: Dict[MultiIndex, np.ndarray] = {}
    for (s, l), v in sys.g.items():
        if s > N:
            continue
        arr = out.get(l)
        if arr is None:
            arr = zeros((N + 1, sys.n), exact)
            out[l] = arr
        arr[s] = arr[s] + _arr(v, exact)
    return out


def _chain(l: MultiIndex) -> Tuple[MultiIndex, int]:
    """Predecessor monomial and the component appended to it."""
    r = max(i for i in range(len(l)) if l[i] > 0)
    prev = list(l)
    prev[r] -= 1
    return tuple(prev), r


def _monomial_closure(ls) -> List[MultiIndex]:
    need = set()
    for l in ls:
        cur = tuple(l)
        while sum(cur) >= 1:
            need.add(cur)
            cur, _ = _chain(cur)
    return sorted(need, key=lambda t: (sum(t), t))


def gen_y0(sys: PreparedSystem, N: int, exact: bool = True, dps: int = DEFAULT_DPS,
           strict: bool = False) -> np.ndarray:
    """Coefficients a_0..a_N of the formal solution y~_0 (a_0 = 0).

    Order by order, ``Lambda a_l = f0_l + (l-1-B) a_{l-1} + [g(x, y~_0)]_l``.
    Monomials ``y~_0^l`` are advanced one coefficient per order, so the
    whole computation is O(N^2) per monomial.
    """
    if strict:
        bad = model.validate_prepared(sys)
        if bad:
            raise ValueError("; ".join(bad))
    with mp.workdps(dps):
        return _gen_y0(sys, N, exact)


def _gen_y0(sys, N, exact):
    n = sys.n
    a = zeros((N + 1, n), exact)
    lam = _arr(sys.lam, exact)
    beta = _arr(sys.beta, exact)
    gl = _g_by_l(sys, N, exact)
    for (s, l) in sys.g:
        if sum(l) == 1 and s == 0:
            raise ValueError("g has an x^0 linear term; it belongs in Lambda")
    monos = _monomial_closure(gl.keys())
    mono = {l: zeros((N + 1,), exact) for l in monos}
    for L in range(1, N + 1):
        # advance monomials to coefficient L - 1 (their order-L coefficient is
        # not needed for |l| >= 1 terms with s >= 1, and for s = 0 we need it
        # but it only involves a_1..a_{L-1} when |l| >= 2)
        for l in monos:
            prev, r = _chain(l)
            if sum(l) == 1:
                mono[l][L - 1] = a[L - 1, r]
                continue
            pm = mono[prev]
            acc = _num(0, exact)
            for i in range(1, L):
                acc = acc + pm[i] * a[L - i, r]
            mono[l][L] = acc
        rhs = (_arr(sys.f0[L], exact) if L <= sys.trunc_x else zeros((n,), exact)).copy()
        rhs = rhs + (L - 1) * a[L - 1] - beta * a[L - 1]
        for l, coef in gl.items():
            if sum(l) == 1:
                # coef_s * a_{L-s}, s >= 1
                r = l.index(1)
                for s in range(1, L + 1):
                    if np.any(to_complex(coef[s]) != 0) if exact else np.any(coef[s] != 0):
                        rhs = rhs + coef[s] * a[L - s, r]
            else:
                ml = mono[l]
                for s in range(0, L + 1):
                    c = coef[s]
                    if (np.any(to_complex(c) != 0) if exact else np.any(c != 0)):
                        rhs = rhs + c * ml[L - s]
        a[L] = rhs / lam
    return a


def y0_powers(a0: np.ndarray, ls, N: int) -> Dict[MultiIndex, np.ndarray]:
    """Full series y~_0^l for every l in ``ls`` (and chain predecessors)."""
    exact = a0.dtype == object
    n = a0.shape[1]
    out: Dict[MultiIndex, np.ndarray] = {}
    one = zeros((N + 1,), exact)
    one[0] = _num(1, exact)
    out[model.zero(n)] = one
    for l in _monomial_closure(ls):
        prev, r = _chain(l)
        out[l] = cauchy(out[prev], a0[:, r], N)
    return out


def gen_dj(sys: PreparedSystem, y0: np.ndarray, j: MultiIndex,
           powers: Dict[MultiIndex, np.ndarray] | None = None) -> np.ndarray:
    """d_j = sum_{l >= j} C(l, j) g_l(x) y~_0^{l - j}, shape (N+1, n)."""
    N = y0.shape[0] - 1
    exact = y0.dtype == object
    gl = _g_by_l(sys, N, exact)
    rests = [tuple(a - b for a, b in zip(l, j)) for l in gl if model.precedes(j, l)]
    if powers is None:
        powers = y0_powers(y0, rests, N)
    else:
        missing = [r for r in rests if r not in powers]
        if missing:
            powers.update(y0_powers(y0, missing, N))
    out = zeros((N + 1, sys.n), exact)
    for l, coef in gl.items():
        if not model.precedes(j, l):
            continue
        rest = tuple(a - b for a, b in zip(l, j))
        c = model.binom(l, j)
        out = out + c * cauchy(coef, powers[rest][:, None], N)
    return out


# ---------------------------------------------------------------------------
# t_k

def slot_components(j: MultiIndex) -> List[int]:
    """Factor slots of y^j: component r repeated j_r times."""
    return [r for r in range(len(j)) for _ in range(j[r])]


def nonzero_below(k: MultiIndex) -> List[MultiIndex]:
    rng = [range(v + 1) for v in k]
    return [t for t in itertools.product(*rng) if sum(t) > 0]


def tuples(k: MultiIndex, J: int) -> Iterator[Tuple[MultiIndex, ...]]:
    """Ordered J-tuples of nonzero multi-indices summing to k."""
    if J == 0:
        if sum(k) == 0:
            yield ()
        return
    if sum(k) < J:
        return
    for i in nonzero_below(k):
        rest = tuple(a - b for a, b in zip(k, i))
        if sum(rest) < J - 1:
            continue
        for tail in tuples(rest, J - 1):
            yield (i,) + tail


def tuple_bound(k: MultiIndex, j: MultiIndex, n1: int) -> int:
    K, J = sum(k), sum(j)
    return math.comb(K + J - 1, J - 1) ** n1


def gen_tk(hier: Hierarchy, k: MultiIndex, u: Dict[MultiIndex, np.ndarray] | None = None) -> np.ndarray:
    """x^{k.beta} t_k as an integer-power series, shape (N+1, n).

    ``u`` overrides the stored u_k (used by the homogeneity checks).
    """
    k = tuple(k)
    u = hier.u if u is None else u
    N = hier.N
    exact = hier.exact
    n = hier.sys.n
    out = zeros((N + 1, n), exact)
    if sum(k) <= 1:
        return out
    for kp in nonzero_below(k):
        if kp != k and kp not in u:
            raise MissingPredecessor(f"y~_{kp} has not been generated")
    for j, dj in hier.D.items():
        J = sum(j)
        if J < 2 or J > sum(k):
            continue
        slots = slot_components(j)
        memo: Dict[Tuple[int, MultiIndex], np.ndarray] = {}

        def F(pos: int, rem: MultiIndex):
            if pos == J:
                if sum(rem) == 0:
                    one = zeros((N + 1,), exact)
                    one[0] = _num(1, exact)
                    return one
                return None
            key_ = (pos, rem)
            if key_ in memo:
                return memo[key_]
            acc = None
            left = J - pos - 1
            for i in nonzero_below(rem):
                r2 = tuple(a - b for a, b in zip(rem, i))
                if sum(r2) < left:
                    continue
                if i not in u:
                    continue
                tail = F(pos + 1, r2)
                if tail is None:
                    continue
                term = cauchy(u[i][:, slots[pos]], tail, N)
                acc = term if acc is None else acc + term
            memo[key_] = acc
            return acc

        total = F(0, k)
        if total is not None:
            out = out + cauchy(dj, total[:, None], N)
    return out


# ---------------------------------------------------------------------------
# y~_k

def _dmatrix(hier: Hierarchy) -> np.ndarray:
    n = hier.sys.n
    D = hier.Dext or hier.D
    rows = max((len(d) for d in D.values()), default=hier.N + 1)
    Dm = zeros((rows, n, n), hier.exact)
    for r in range(n):
        e = model.unit(n, r)
        if e in D:
            Dm[: len(D[e]), :, r] = D[e]
    return Dm


def gen_yk(hier: Hierarchy, k: MultiIndex, N: int | None = None, seed=None) -> np.ndarray:
    """Solve the order-by-order recursion for u_k (see module docstring)."""
    k = tuple(k)
    N = hier.N if N is None else N
    sys = hier.sys
    n = sys.n
    exact = hier.exact
    lam = _arr(sys.lam, exact)
    beta = _arr(sys.beta, exact)
    kl = sum((ki * l for ki, l in zip(k, lam)), _num(0, exact))
    kb = sum((ki * b for ki, b in zip(k, beta)), _num(0, exact))
    tau = gen_tk(hier, k)
    hier.tau[k] = tau
    Dm = _dmatrix(hier)
    for s in (0, 1):
        if s <= N and (np.any(to_complex(Dm[s]) != 0)):
            raise ValueError("d_{e_r} must be O(x^-2); the system is not in prepared form")
    a = zeros((N + 1, n), exact)
    res_comp = [i for i in range(n) if abs(complex(lam[i] - kl)) < 1e-13]
    if sum(k) == 1:
        i0 = k.index(1)
        if res_comp != [i0]:
            raise ResonantDenominator(f"k={k}: unexpected resonances {res_comp}")
    elif res_comp:
        raise ResonantDenominator(f"k={k}: lambda_{res_comp[0] + 1} = k.lambda")

    def Da(l, comp):
        acc = _num(0, exact)
        for s in range(2, min(l, len(Dm) - 1) + 1):
            row = Dm[s, comp]
            acc = acc + np.dot(row, a[l - s])
        return acc

    for l in range(N + 1):
        for i in range(n):
            if i in res_comp:
                if l == 0:
                    a[0, i] = _num(1, exact) if seed is None else _num(seed, exact)
                else:
                    a[l, i] = -Da(l + 1, i) / l
                continue
            acc = tau[l, i] + Da(l, i)
            if l >= 1:
                acc = acc + (l - 1 - beta[i] + kb) * a[l - 1, i]
            a[l, i] = acc / (lam[i] - kl)
    return a


def generate(sys: PreparedSystem, N: int, K: int, xi: float = 0.0, exact: bool = True,
             dps: int = DEFAULT_DPS, strict: bool = False) -> Hierarchy:
    """Build y~_0, the d_j, and y~_k for all active k with |k| <= K."""
    with mp.workdps(dps):
        # y~_0 and d_j carry one extra order: the resonant component of
        # u_{e_i} at order N reads d at order N + 1
        a0 = gen_y0(sys, N + 1, exact=exact, dps=dps, strict=strict)
        active = model.active_set(sys.lam, xi)
        hier = Hierarchy(sys=sys, N=N, K=K, xi=xi, active=active, exact=exact, a0=a0)
        degree = sys.degree
        js = [j for j in itertools.product(range(degree + 1), repeat=sys.n) if 1 <= sum(j) <= degree]
        rests = set()
        for l in {l for (_, l) in sys.g}:
            for j in js:
                if model.precedes(j, l):
                    rests.add(tuple(a - b for a, b in zip(l, j)))
        powers = y0_powers(a0, rests, N + 1)
        D1 = {}
        for j in js:
            dj = gen_dj(sys, a0, j, powers)
            if np.any(to_complex(dj) != 0):
                D1[j] = dj
        # predecessors for the u_{e_i} recursion see D up to N + 1
        hier.D = D1
        for k in model.graded(active, K):
            hier.u[k] = gen_yk(hier, k, N)
        hier.a0 = a0[: N + 1]
        hier.D = {j: d[: N + 1] for j, d in D1.items()}
        hier.y0_powers = {l: p[: N + 1] for l, p in powers.items()}
        hier.Dext = D1
        return hier


# ---------------------------------------------------------------------------
# diagnostics

def residual_y0(hier: Hierarchy) -> np.ndarray:
    """Coefficients of y0' - f(x, y0) up to order N (should vanish)."""
    sys, N, exact = hier.sys, hier.N, hier.exact
    a = hier.a0
    out = zeros((N + 1, sys.n), exact)
    for l in range(1, N + 1):
        out[l] = -(l - 1) * a[l - 1]            # y0'
    f0 = _arr(sys.f0[: N + 1], exact)
    out[: len(f0)] = out[: len(f0)] - f0
    out = out + _arr(sys.lam, exact) * a
    out[1:] = out[1:] + _arr(sys.beta, exact) * a[:-1]
    pw = y0_powers(a, [l for (_, l) in sys.g], N)
    for l, coef in _g_by_l(sys, N, exact).items():
        out = out - cauchy(coef, pw[l][:, None], N)
    return out


def residual_yk(hier: Hierarchy, k: MultiIndex, tau: np.ndarray | None = None) -> np.ndarray:
    """Coefficients of the u_k equation's residual, orders 0..N-1."""
    k = tuple(k)
    sys, N, exact = hier.sys, hier.N, hier.exact
    u = hier.u[k]
    lam = _arr(sys.lam, exact)
    beta = _arr(sys.beta, exact)
    kl = sum((ki * l for ki, l in zip(k, lam)), _num(0, exact))
    kb = sum((ki * b for ki, b in zip(k, beta)), _num(0, exact))
    tau = hier.tau[k] if tau is None else tau
    Dm = _dmatrix(hier)
    out = zeros((N + 1, sys.n), exact)
    for l in range(N + 1):
        acc = (lam - kl) * u[l] - tau[l]
        if l >= 1:
            acc = acc + (-(l - 1) + beta - kb) * u[l - 1]
        for s in range(min(l, len(Dm) - 1) + 1):
            acc = acc - Dm[s] @ u[l - s]
        out[l] = acc
    return out[:N]
