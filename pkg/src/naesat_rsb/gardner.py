"""Stability matrices of the 1RSB fixed point and the Gardner threshold.

Pairs (w, s) of a warning and its perturbed copy are indexed in the order
ff, 00, 11, f0, f1, 0f, 1f, 01, 10. Only the leading 7x7 block carries the
closed forms; rows 01 and 10 vanish because changing one input moves a
clause output between a frozen value and f, never between 0 and 1.

The closed forms are written in terms of the sums

    S_i = GM^-i sum_{l = i mod 2} C(d-2, l) (w GM)^l (1-w)^(d-2-l) C(l, (l-i)/2) 2^-l

over the d-2 clauses that are neither the perturbed one nor the outgoing one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit, use_numba
from .errors import InvalidInput, NonConvergence, ResourceLimit
from .sp_core import (LOG_A, S_AP, S_GS, S_GS1, S_GS2, LOG_G, c_of_alpha, clause_update,
                      kernel_sums)

PAIRS = ("ff", "00", "11", "f0", "f1", "0f", "1f", "01", "10")
_SYM = {"0": 0, "1": 1, "f": 2}
# PAIR_INDEX[w, s] with w, s in {0, 1, 2=f}
PAIR_INDEX = np.zeros((3, 3), dtype=np.int64)
for _i, _p in enumerate(PAIRS):
    PAIR_INDEX[_SYM[_p[0]], _SYM[_p[1]]] = _i
FIRST = np.array([_SYM[p[0]] for p in PAIRS])
SECOND = np.array([_SYM[p[1]] for p in PAIRS])
# 0 <-> 1 relabelling as a permutation of pair indices
SWAP = np.array([PAIRS.index(p.translate(str.maketrans("01", "10"))) for p in PAIRS])
BRANCH_CAP = 16


@dataclass(frozen=True)
class SSums:
    """S-sums at (d, w, y), all multiplied by exp(-log_scale)."""
    d: float
    w: float
    y: float
    log_scale: float
    S0: float
    S1: float
    S2: float
    S_ge1: float

    @property
    def S_ge2(self):
        return self.S_ge1 - self.S1

    def unscaled(self, name):
        return getattr(self, name) * math.exp(self.log_scale)

    def zdot(self):
        """S0 + 2 (1 - (1 - e^-y) w/2)(S1 + S_ge2), scaled like the sums."""
        return self.S0 + 2.0 * (1.0 + 0.5 * self.w * math.expm1(-self.y)) * self.S_ge1


def s_sums(d, w, y):
    """S_0, S_1, S_2 and S_{>=1} = sum_{i>=1} S_i from the n = d-2 kernels.

    S_0 equals the tie sum Zf and S_{>=1} the strict-majority sum Z0 at n = d-2.
    """
    if d < 2:
        raise InvalidInput(f"s_sums needs d >= 2, got {d}")
    s = kernel_sums(d - 2, w, y)
    GM = math.exp(-0.5 * y)
    r = math.exp(s[LOG_G] - s[LOG_A]) if np.isfinite(s[LOG_A]) else 1.0
    return SSums(d, w, y, s[LOG_A], r * s[S_GS], r * s[S_GS1] / GM, r * s[S_GS2] / GM ** 2,
                 s[S_AP])


@dataclass(frozen=True)
class StabilityBundle:
    k: int
    d: float
    y: float
    x: float
    w: float
    rho: np.ndarray          # indexed by warning 0, 1, f
    psi: np.ndarray
    ss: SSums
    Zdot: float              # scaled like ss
    Bhat: np.ndarray         # 9x9 clause matrix
    B: np.ndarray            # 9x9, columns 01/10 left at zero
    lam: float
    xi: np.ndarray           # 9-vector
    log_Zdot: float = field(default=math.nan)

    @property
    def branch(self):
        return (self.d - 1) * (self.k - 1)

    @property
    def branch_lambda(self):
        return self.branch * self.lam

    @property
    def Bhat7(self):
        return self.Bhat[:7, :7]

    @property
    def B7(self):
        return self.B[:7, :7]

    @property
    def B4(self):
        return self.B[3:7, 3:7]

    @property
    def B_neq(self):
        idx = [i for i, p in enumerate(PAIRS) if p[0] != p[1]]
        return self.B[np.ix_(idx, idx)]


def warning_weights(x, w):
    rho = np.array([(1 - x) / 2, (1 - x) / 2, x])
    psi = np.array([w / 2, w / 2, 1 - w])
    return rho, psi


def clause_matrix(k, x, w):
    """Bhat[(w^, s^), (w., s.)] = rho_{w.} Nhat / psi_{w^} over all nine pairs."""
    rho, psi = warning_weights(x, w)
    r = ((1 - x) / 2) ** (k - 2)
    N = np.zeros((9, 9))
    ix = {p: i for i, p in enumerate(PAIRS)}
    N[ix["ff"], ix["ff"]] = 1.0
    for p in ("00", "11", "f0", "f1", "0f", "1f"):
        N[ix["ff"], ix[p]] = 1.0 - r
    for p in ("01", "10"):
        N[ix["ff"], ix[p]] = 1.0 - 2.0 * r
    for a, b in (("00", "11"), ("11", "00"), ("f0", "f1"), ("f1", "f0"), ("0f", "1f"),
                 ("1f", "0f"), ("f0", "01"), ("1f", "01"), ("f1", "10"), ("0f", "10")):
        N[ix[a], ix[b]] = r
    return rho[FIRST][None, :] * N / psi[FIRST][:, None]


def build_matrices(k, d, y, pt=None, x=None, x_out=None):
    """Closed-form clause and variable stability matrices, lambda and xi.

    Rows of B are normalized by Zdot * rho(x_out). At a fixed point x_out = x;
    passing ``x_out = var_update(w(x))`` gives the matrix the enumeration
    produces at an arbitrary x.
    """
    if x is None:
        x = float(pt.x)
    w = clause_update(x, k)
    rho, psi = warning_weights(x, w)
    rho_out = rho if x_out is None else warning_weights(x_out, w)[0]
    ss = s_sums(d, w, y)
    S0, S1, Sge1, Sge2 = ss.S0, ss.S1, ss.S_ge1, ss.S_ge2
    r = ((1 - x) / 2) ** (k - 2)
    ey = math.exp(-y)
    Zd = ss.zdot()
    ix = {p: i for i, p in enumerate(PAIRS)}
    N = np.zeros((9, 9))

    def put(row, col, val, sym=True):
        N[ix[row], ix[col]] = val
        if sym:
            sw = str.maketrans("01", "10")
            N[ix[row.translate(sw)], ix[col.translate(sw)]] = val

    put("ff", "ff", S0)
    for col in ("ff", "f1", "1f"):
        put("00", col, Sge1)
    put("ff", "f0", (1 - r) * S0)
    put("ff", "0f", (1 - r) * S0)
    put("00", "11", r * S0 + Sge1)
    put("00", "0f", (1 - r) * S1 + Sge2)
    put("ff", "00", (1 - r) * S0 + r * S1 * ey)
    put("00", "00", (1 - r) * Sge1 + r * Sge2 * ey)
    put("00", "f0", (1 - r) * Sge1 + r * Sge2 * ey)
    put("f0", "f1", r * S0)
    put("f0", "0f", r * S1)
    put("0f", "f0", r * S1 * ey)
    put("0f", "1f", r * S0)
    B = np.zeros((9, 9))
    B[:7, :7] = rho[FIRST][None, :7] * N[:7, :7] / (Zd * rho_out[FIRST][:7, None])
    lam = r * (S0 + S1 * math.exp(-0.5 * y)) / Zd
    g = math.exp(-0.5 * y)
    xi = np.array([-2 * rho[0] * g, -rho[2], -rho[2], rho[0], rho[0], rho[2] * g, rho[2] * g, 0, 0])
    return StabilityBundle(k, d, y, x, w, rho, psi, ss, Zd, clause_matrix(k, x, w), B, lam, xi,
                           math.log(Zd) + ss.log_scale)


def eigen_lambda(M):
    """Largest real eigenvalue of a small dense matrix."""
    ev = np.linalg.eigvals(np.asarray(M, dtype=float))
    return float(np.max(ev.real))


# ---------------------------------------------------------------- brute force

@njit(cache=True)
def _brute_loop(k, d, y, q):
    km1 = k - 1
    nb = (d - 1) * km1
    num = np.zeros((9, 9))
    den = np.zeros(3)
    pair = np.array([[1, 7, 5], [8, 2, 6], [3, 4, 0]])
    rest = np.zeros(nb - 1, dtype=np.int64)
    total = 3 ** (nb - 1)
    for it in range(total):
        t = it
        prob = 1.0
        for j in range(nb - 1):
            rest[j] = t % 3
            t //= 3
            prob *= q[rest[j]]
        # clauses 3..d are fixed by rest; clause 2 = (input 1, rest[0:k-2])
        n0 = 0
        n1 = 0
        for a in range(1, d - 1):
            base = km1 - 1 + (a - 1) * km1
            all0 = True
            all1 = True
            for j in range(km1):
                v = rest[base + j]
                if v != 0:
                    all0 = False
                if v != 1:
                    all1 = False
            if all1:
                n0 += 1
            elif all0:
                n1 += 1
        wp = np.zeros(3, dtype=np.int64)
        ph = np.zeros(3)
        for t1 in range(3):
            all0 = t1 == 0
            all1 = t1 == 1
            for j in range(km1 - 1):
                v = rest[j]
                if v != 0:
                    all0 = False
                if v != 1:
                    all1 = False
            m0 = n0 + (1 if all1 else 0)
            m1 = n1 + (1 if all0 else 0)
            if m0 > m1:
                wp[t1] = 0
            elif m1 > m0:
                wp[t1] = 1
            else:
                wp[t1] = 2
            ph[t1] = math.exp(-y * min(m0, m1))
        for a in range(3):
            den[wp[a]] += ph[a] * q[a] * prob
            for b in range(3):
                num[pair[wp[a], wp[b]], pair[a, b]] += ph[b] * q[a] * prob
    return num, den


def _brute_numpy(k, d, y, q, chunk=1 << 15):
    km1 = k - 1
    nb = (d - 1) * km1
    num = np.zeros((9, 9))
    den = np.zeros(3)
    total = 3 ** (nb - 1)
    pw = 3 ** np.arange(nb - 1)
    for start in range(0, total, chunk):
        it = np.arange(start, min(total, start + chunk))
        rest = (it[:, None] // pw) % 3
        prob = q[rest].prod(axis=1)
        n0 = np.zeros(it.size, dtype=np.int64)
        n1 = np.zeros(it.size, dtype=np.int64)
        for a in range(1, d - 1):
            base = km1 - 1 + (a - 1) * km1
            blk = rest[:, base:base + km1]
            n0 += (blk == 1).all(axis=1)
            n1 += (blk == 0).all(axis=1)
        head = rest[:, :km1 - 1]
        wps, phs = [], []
        for t1 in range(3):
            all1 = (t1 == 1) & (head == 1).all(axis=1)
            all0 = (t1 == 0) & (head == 0).all(axis=1)
            m0, m1 = n0 + all1, n1 + all0
            wps.append(np.where(m0 > m1, 0, np.where(m1 > m0, 1, 2)))
            phs.append(np.exp(-y * np.minimum(m0, m1)))
        for a in range(3):
            np.add.at(den, wps[a], phs[a] * q[a] * prob)
            for b in range(3):
                rows = PAIR_INDEX[wps[a], wps[b]]
                np.add.at(num[:, PAIR_INDEX[a, b]], rows, phs[b] * q[a] * prob)
    return num, den


def brute_force_B(k, d, y, pt=None, x=None):
    """9x9 stability matrix by enumerating all warnings on the branch of size (d-1)(k-1)."""
    if x is None:
        x = float(pt.x)
    if int(d) != d or d < 2 or k < 2:
        raise InvalidInput("brute force needs integer d >= 2 and k >= 2")
    nb = (d - 1) * (k - 1)
    if nb > BRANCH_CAP:
        raise ResourceLimit(f"branch size {nb} exceeds the enumeration cap {BRANCH_CAP}")
    q = np.array([(1 - x) / 2, (1 - x) / 2, x])
    if use_numba():
        num, den = _brute_loop(int(k), int(d), float(y), q)
    else:
        num, den = _brute_numpy(int(k), int(d), float(y), q)
    return num / den[FIRST][:, None]


# ---------------------------------------------------------------- scan

@dataclass
class ScanRow:
    alpha: float
    c: float
    y_star: float
    x: float
    w: float
    lam: float
    branch_lambda: float


def gardner_point(k, alpha, **kw):
    """y*, the fixed point and the Gardner eigenvalue at density alpha (d = k alpha may be fractional)."""
    from .onersb import solve_ystar
    r = solve_ystar(k, d=k * alpha, min_dual=False, **kw)
    b = build_matrices(k, k * alpha, r.y_star, r.value.sp)
    return ScanRow(alpha, c_of_alpha(alpha, k), r.y_star, r.value.x, r.value.w, b.lam,
                   b.branch_lambda), r, b


def alpha_grid(k, lo=None, hi=None, n=64):
    from .sp_core import LN2
    lo = 2 ** (k - 1) * LN2 - 2 if lo is None else lo
    hi = 4.0 ** k / k if hi is None else hi
    return np.geomspace(lo, hi, n)


def bisect_crossing(fun, a, b, fa=None, rtol=1e-6, max_iter=100):
    """Bisection for a sign change of ``fun`` on [a, b] to relative width ``rtol``."""
    fa = fun(a) if fa is None else fa
    for _ in range(max_iter):
        if (b - a) <= rtol * b:
            break
        m = math.sqrt(a * b) if a > 0 else 0.5 * (a + b)
        fm = fun(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


@dataclass
class ScanResult:
    k: int
    rows: list
    crossings: list
    alpha_ga: float


def _try_point(k, alpha, **kw):
    try:
        return gardner_point(k, alpha, **kw)[0]
    except NonConvergence:
        # no root of Sigma on the bracket (typically below satisfiability)
        nan = math.nan
        return ScanRow(alpha, c_of_alpha(alpha, k), nan, nan, nan, nan, nan)


def gardner_scan(k, alphas=None, rtol=1e-6, **kw):
    """Scan Đ·lambda(y*(alpha)) over ``alphas`` and refine every crossing of 1.

    Grid points without a root y* get NaN rows and are skipped when looking
    for sign changes. alpha_ga is the largest crossing (None when there is
    none on the grid).
    """
    alphas = alpha_grid(k) if alphas is None else np.asarray(alphas, dtype=float)
    rows = [_try_point(k, a, **kw) for a in alphas]
    g = np.array([r.branch_lambda - 1.0 for r in rows])
    crossings = []
    for i in range(len(rows) - 1):
        if np.isfinite(g[i]) and np.isfinite(g[i + 1]) and (g[i] > 0) != (g[i + 1] > 0):
            fun = lambda a: gardner_point(k, a, **kw)[0].branch_lambda - 1.0
            crossings.append(bisect_crossing(fun, alphas[i], alphas[i + 1], g[i], rtol))
    return ScanResult(k, rows, crossings, max(crossings) if crossings else None)
