"""Binomial kernels and the univariate survey-propagation recursion.

With x = q(f) the free mass of a variable-to-clause survey and w = 1 - q(f)
the frozen mass of a clause-to-variable survey, one round of SP reads

    w = clause_update(x) = 2 (1 - x)^(k-1) / 2^(k-1)
    x = var_update(w) = Zf / (2 Z0 + Zf)

where Z0 and Zf are sums over the number l of frozen incoming warnings of
binomial weights times majority/tie probabilities:

    A_l = C(n, l) (w AM)^l (1 - w)^(n - l),   AM = (1 + e^-y) / 2
    G_l = C(n, l) (w GM)^l (1 - w)^(n - l),   GM = e^(-y/2)
    P_l = Pr[Bin(l, p) < l/2],  Q_l = Pr[Bin(l, p) = l/2],  p = 1/(1 + e^y)
    S_l = Pr[Bin(l, 1/2) = l/2]
    Z0 = sum_l A_l P_l,  Zf = sum_l A_l Q_l = sum_l G_l S_l.

Everything is computed in log-safe form. The binomial weights are carried as
normalized pmfs over a window of mean +- 12 sd (plus a fixed margin) together
with the log of their total mass, so d up to ~1e9 is fine. The degree n may
be non-integer; the window then stays below floor(n) and the ratio recurrence
continues C(n, l) analytically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit, use_numba
from .errors import InvalidInput, NonConvergence

WINDOW_SD = 12.0
WINDOW_PAD = 40.0
LN2 = math.log(2.0)

# layout of the vector returned by kernel_sums
LOG_A, LOG_G, S_AP, S_APL, S_AT, S_GS, S_GSL, S_GS1, S_GS2 = range(9)


def energy_params(y):
    """(p, AM, GM) at Parisi parameter y."""
    return 1.0 / (1.0 + math.exp(y)), 0.5 * (1.0 + math.exp(-y)), math.exp(-0.5 * y)


@dataclass(frozen=True)
class EnergyParams:
    y: float
    c: float = float("nan")

    @property
    def p(self):
        return 1.0 / (1.0 + math.exp(self.y))

    @property
    def AM(self):
        return 0.5 * (1.0 + math.exp(-self.y))

    @property
    def GM(self):
        return math.exp(-0.5 * self.y)

    @property
    def gamma(self):
        return gamma_of_y(self.y, self.c)

    @property
    def Gamma(self):
        return Gamma_of_y(self.y, self.c)


def gamma_of_y(y, c):
    return 2.0 * c * (-math.expm1(-0.5 * y)) ** 2


def Gamma_of_y(y, c):
    return c * (1.0 - (1.0 + y) * math.exp(-y))


def y_of_gamma(gamma, c):
    """Inverse of gamma_of_y; inf when gamma >= 2c."""
    r = math.sqrt(gamma / (2.0 * c))
    return math.inf if r >= 1.0 else -2.0 * math.log1p(-r)


def c_of_alpha(alpha, k):
    return alpha / (2 ** (k - 1) * LN2)


def alpha_of_c(c, k):
    return c * 2 ** (k - 1) * LN2


# ---------------------------------------------------------------- windows

def binom_window(n, prob):
    """Index window [lo, hi] holding all but a negligible tail of Bin(n, prob)."""
    top = int(math.floor(n + 1e-9))
    if prob <= 0.0 or top == 0:
        return 0, 0
    if prob >= 1.0:
        return top, top
    mu = n * prob
    sd = math.sqrt(n * prob * (1.0 - prob))
    lo = max(0, int(math.floor(mu - WINDOW_SD * sd - WINDOW_PAD)))
    hi = min(top, int(math.ceil(mu + WINDOW_SD * sd + WINDOW_PAD)))
    return lo, hi


def _probs(n, w, y):
    p, AM, GM = energy_params(y)
    da = w * (1.0 - AM)
    dg = w * (1.0 - GM)
    pa = w * AM / (1.0 - da) if w < 1.0 or da < 1.0 else 1.0
    pg = w * GM / (1.0 - dg) if w < 1.0 or dg < 1.0 else 1.0
    log_a = n * math.log1p(-da) if da < 1.0 else -math.inf
    log_g = n * math.log1p(-dg) if dg < 1.0 else -math.inf
    return p, pa, pg, log_a, log_g


# ---------------------------------------------------------------- numpy path

def _pmf_numpy(n, prob, lo, hi):
    ell = np.arange(lo, hi + 1, dtype=np.float64)
    if hi == lo:
        return ell, np.ones(1)
    lr = math.log(prob) - math.log1p(-prob)
    steps = np.log((n - ell[1:] + 1.0) / ell[1:]) + lr
    la = np.concatenate(([0.0], np.cumsum(steps)))
    a = np.exp(la - la.max())
    return ell, a / a.sum()


def pqs_arrays(lmax, y):
    """P_l, Q_l, S_l and T_l = E[X; X < l/2] for l = 0..lmax, X ~ Bin(l, p).

    Q and S follow the log-space ratio recurrence
    Q_{2m+2}/Q_{2m} = 4 p (1-p) (2m+1)/(2m+2), and P is accumulated with
    P_{2m+1} = P_{2m} + (1-p) Q_{2m},  P_{2m} = P_{2m-1} - Q_{2m}/2.
    """
    p = 1.0 / (1.0 + math.exp(y))
    q = 1.0 - p
    m = np.arange(lmax // 2)
    half = np.log1p(-1.0 / (2.0 * m + 2.0))
    logS_even = np.concatenate(([0.0], np.cumsum(half)))
    logQ_even = logS_even + math.log(4.0 * p * q) * np.arange(lmax // 2 + 1)
    Q = np.zeros(lmax + 1)
    S = np.zeros(lmax + 1)
    Q[0::2] = np.exp(logQ_even)
    S[0::2] = np.exp(logS_even)
    inc = np.zeros(lmax + 1)
    inc[1::2] = q * Q[0:lmax:2]
    inc[2::2] = -0.5 * Q[2::2]
    P = np.cumsum(inc)
    ell = np.arange(lmax + 1, dtype=np.float64)
    T = np.zeros(lmax + 1)
    T[1:] = ell[1:] * p * P[:-1] - 0.5 * ell[1:] * Q[1:]
    return P, Q, S, T


def _kernel_sums_numpy(n, w, y):
    p, pa, pg, log_a, log_g = _probs(n, w, y)
    alo, ahi = binom_window(n, pa)
    glo, ghi = binom_window(n, pg)
    P, Q, S, T = pqs_arrays(max(ahi, ghi), y)
    ea, a = _pmf_numpy(n, pa, alo, ahi)
    eg, g = _pmf_numpy(n, pg, glo, ghi)
    Pa, Ta = P[alo:ahi + 1], T[alo:ahi + 1]
    Sg = S[glo:ghi + 1]
    odd = eg % 2 == 1
    S1 = np.where(odd, _shift_prev(S, glo, ghi) * eg / (eg + 1.0), 0.0)
    S2 = Sg * (eg / 2.0) / (eg / 2.0 + 1.0)
    out = np.empty(9)
    out[LOG_A], out[LOG_G] = log_a, log_g
    out[S_AP] = (a * Pa).sum()
    out[S_APL] = (a * Pa * ea).sum()
    out[S_AT] = (a * Ta).sum()
    out[S_GS] = (g * Sg).sum()
    out[S_GSL] = (g * Sg * eg).sum()
    out[S_GS1] = (g * S1).sum()
    out[S_GS2] = (g * S2).sum()
    return out


def _shift_prev(S, lo, hi):
    """S[l-1] for l in lo..hi (0 at l = 0)."""
    prev = np.zeros(hi - lo + 1)
    start = max(lo, 1)
    prev[start - lo:] = S[start - 1:hi]
    return prev


# ---------------------------------------------------------------- numba path

@njit(cache=True, nogil=True)
def _pmf_loop(n, prob, lo, hi):
    m = hi - lo + 1
    la = np.zeros(m)
    if m > 1:
        lr = math.log(prob) - math.log1p(-prob)
        for i in range(1, m):
            ell = lo + i
            la[i] = la[i - 1] + math.log((n - ell + 1.0) / ell) + lr
    mx = la.max()
    tot = 0.0
    for i in range(m):
        la[i] = math.exp(la[i] - mx)
        tot += la[i]
    for i in range(m):
        la[i] /= tot
    return la


@njit(cache=True, nogil=True)
def _kernel_sums_loop(n, p, alo, ahi, glo, ghi, pa, pg, log_a, log_g):
    q = 1.0 - p
    a = _pmf_loop(n, pa, alo, ahi)
    g = _pmf_loop(n, pg, glo, ghi)
    out = np.zeros(9)
    out[0] = log_a
    out[1] = log_g
    lmax = max(ahi, ghi)
    l4pq = math.log(4.0 * p * q)
    logS = 0.0   # log S_l at the last even l
    Qprev = 1.0  # Q at the last even l
    Sprev = 1.0
    P = 0.0
    for ell in range(lmax + 1):
        if ell % 2 == 0:
            if ell > 0:
                logS += math.log1p(-1.0 / ell)
            Sl = math.exp(logS)
            Ql = math.exp(logS + 0.5 * ell * l4pq)
            Pprev = P
            if ell > 0:
                P = P - 0.5 * Ql
            T = ell * p * Pprev - 0.5 * ell * Ql
            S1 = 0.0
            S2 = Sl * (0.5 * ell) / (0.5 * ell + 1.0)
        else:
            Sl = 0.0
            Pprev = P
            P = P + q * Qprev
            T = ell * p * Pprev
            S1 = Sprev * ell / (ell + 1.0)
            S2 = 0.0
            Ql = 0.0
        if alo <= ell <= ahi:
            wa = a[ell - alo]
            out[2] += wa * P
            out[3] += wa * P * ell
            out[4] += wa * T
        if glo <= ell <= ghi:
            wg = g[ell - glo]
            out[5] += wg * Sl
            out[6] += wg * Sl * ell
            out[7] += wg * S1
            out[8] += wg * S2
        if ell % 2 == 0:
            Qprev = Ql
            Sprev = Sl
    return out


def kernel_sums(n, w, y, backend=None):
    """Normalized kernel sums at degree n (log-safe).

    Returns a length-9 vector: log total masses of the A and G binomials,
    then sum a*P, sum a*P*l, sum a*T, sum g*S, sum g*S*l, sum g*S1, sum g*S2
    where a, g are the normalized pmfs over their windows, T_l = E[X; X<l/2],
    S1_l = Pr[Bin(l,1/2) = (l-1)/2] and S2_l = Pr[Bin(l,1/2) = l/2 - 1].
    """
    if n < 0:
        raise InvalidInput(f"n must be >= 0, got {n}")
    if not (0.0 <= w <= 1.0) or y < 0:
        raise InvalidInput(f"need 0 <= w <= 1 and y >= 0, got w={w}, y={y}")
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    if backend == "numpy":
        return _kernel_sums_numpy(float(n), float(w), float(y))
    p, pa, pg, log_a, log_g = _probs(float(n), float(w), float(y))
    alo, ahi = binom_window(n, pa)
    glo, ghi = binom_window(n, pg)
    return _kernel_sums_loop(float(n), p, alo, ahi, glo, ghi, pa, pg, log_a, log_g)


@dataclass(frozen=True)
class KernelTable:
    """Kernel arrays over l = lo..hi for one (n, w, y)."""
    n: float
    w: float
    y: float
    ell: np.ndarray
    logA: np.ndarray
    logG: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    log_Z0: float
    log_Zf: float
    window: tuple
    A: np.ndarray = field(repr=False, default=None)
    G: np.ndarray = field(repr=False, default=None)

    @property
    def Z0(self):
        return math.exp(self.log_Z0)

    @property
    def Zf(self):
        return math.exp(self.log_Zf)

    @property
    def Z(self):
        return 2.0 * self.Z0 + self.Zf


def _log_binom_weights(n, base, w, ell):
    """log[C(n,l) (w base)^l (1-w)^(n-l)] by the ratio recurrence from l = ell[0]."""
    from scipy.special import gammaln, xlog1py, xlogy
    l0 = ell[0]
    start = (gammaln(n + 1.0) - gammaln(l0 + 1.0) - gammaln(n - l0 + 1.0)
             + xlogy(l0, w * base) + xlog1py(n - l0, -w))
    if ell.size == 1:
        return np.array([start])
    with np.errstate(divide="ignore"):
        steps = (np.log((n - ell[1:] + 1.0) / ell[1:]) + math.log(w * base) - math.log1p(-w))
    return start + np.concatenate(([0.0], np.cumsum(steps)))


def kernel_table(n, w, y, full=False):
    """Kernel arrays and the sums Z0, Zf, Z at degree n.

    With ``full=True`` the window is all of 0..n; otherwise it is the union of
    the A and G truncation windows. Omitted binomial mass is below e^-70.
    """
    if n < 0:
        raise InvalidInput(f"n must be >= 0, got {n}")
    p, pa, pg, log_a, log_g = _probs(float(n), float(w), float(y))
    if full:
        lo, hi = 0, int(math.floor(n + 1e-9))
    else:
        alo, ahi = binom_window(n, pa)
        glo, ghi = binom_window(n, pg)
        lo, hi = min(alo, glo), max(ahi, ghi)
    P, Q, S, _ = pqs_arrays(hi, y)
    ell = np.arange(lo, hi + 1, dtype=np.float64)
    _, AM, GM = energy_params(y)
    if 0.0 < w < 1.0:
        logA = _log_binom_weights(float(n), AM, w, ell)
        logG = _log_binom_weights(float(n), GM, w, ell)
    else:
        logA = np.full(ell.size, -np.inf)
        logG = np.full(ell.size, -np.inf)
        j = 0 if w == 0.0 else ell.size - 1
        logA[j] = 0.0 if w == 0.0 else n * math.log(AM)
        logG[j] = 0.0 if w == 0.0 else n * math.log(GM)
    Ps, Qs, Ss = P[lo:], Q[lo:], S[lo:]
    with np.errstate(divide="ignore"):
        log_Z0 = _logsumexp(logA + np.log(Ps))
        log_Zf = _logsumexp(logG + np.log(Ss))
    return KernelTable(float(n), float(w), float(y), ell, logA, logG, Ps, Qs, Ss,
                       log_Z0, log_Zf, (lo, hi), np.exp(logA), np.exp(logG))


def _logsumexp(v):
    m = np.max(v)
    if not np.isfinite(m):
        return -math.inf
    return float(m + np.log(np.exp(v - m).sum()))


# ---------------------------------------------------------------- SP maps

def clause_update(x, k):
    """w = 2 (1 - x)^(k-1) / 2^(k-1)."""
    return 2.0 * (1.0 - x) ** (k - 1) / 2.0 ** (k - 1)


def _xtilde_from_sums(s):
    r = math.exp(s[LOG_G] - s[LOG_A]) if np.isfinite(s[LOG_A]) else 1.0
    zf = r * s[S_GS]
    return zf / (2.0 * s[S_AP] + zf)


def var_update(w, y, d, backend=None):
    """x~ = Zf / (2 Z0 + Zf) with n = d - 1 incoming clauses."""
    if d < 1:
        raise InvalidInput(f"d must be >= 1, got {d}")
    return _xtilde_from_sums(kernel_sums(d - 1, w, y, backend))


def log_zdot(w, y, n):
    """log(2 Z0 + Zf) at degree n."""
    s = kernel_sums(n, w, y)
    r = math.exp(s[LOG_G] - s[LOG_A])
    return s[LOG_A] + math.log(2.0 * s[S_AP] + r * s[S_GS])


def sp_map(x, k, d, y):
    return var_update(clause_update(x, k), y, d)


@dataclass(frozen=True)
class SpPoint:
    k: int
    d: float
    y: float
    x: float
    w: float
    residual: float
    iterations: int
    method: str = "damped"

    @property
    def alpha(self):
        return self.d / self.k

    @property
    def c(self):
        return c_of_alpha(self.alpha, self.k)

    @property
    def in_mbullet(self):
        return self.x <= 1.0 / self.k ** 2

    @property
    def gamma_ratio(self):
        """x divided by the scale 2^(-k gamma/2) / max(c k e^(-y/2), 1)^(1/2)."""
        g = gamma_of_y(self.y, self.c)
        scale = 2.0 ** (-self.k * g / 2.0) / math.sqrt(max(self.c * self.k * math.exp(-self.y / 2), 1.0))
        return self.x / scale


def degree_from_alpha(k, alpha, fractional=False):
    d = k * alpha
    di = round(d)
    if abs(d - di) <= 1e-9 * max(1.0, abs(d)):
        return int(di)
    if fractional:
        return float(d)
    raise InvalidInput(f"alpha = {alpha} gives non-integer degree d = k*alpha = {d}")


def sp_solve(k, alpha=None, y=0.0, *, d=None, x0=None, damping=0.7, tol=1e-13,
             max_iter=100_000, fractional=False):
    """Fixed point x = var_update(clause_update(x)).

    Damped iteration from ``x0`` (default 1/(2k^2)); if that stalls, bisection
    on map(x) - x over [0, 1/k^2], widened to [0, 1] when needed.
    """
    if d is None:
        d = degree_from_alpha(k, alpha, fractional)
    if y < 0:
        raise InvalidInput("y must be >= 0")
    if not 0.0 < damping <= 1.0:
        raise InvalidInput("damping must lie in (0, 1]")
    x = 1.0 / (2 * k * k) if x0 is None else float(x0)
    traj = []
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        fx = sp_map(x, k, d, y)
        res = abs(fx - x)
        if len(traj) < 200:
            traj.append(x)
        if res < tol:
            return SpPoint(k, d, y, fx, clause_update(fx, k), abs(sp_map(fx, k, d, y) - fx), it)
        if not math.isfinite(fx):
            break
        x = (1.0 - damping) * x + damping * fx
        if it >= 200 and res > 1e-3:
            break
    # bisection fallback
    for lo, hi in ((0.0, 1.0 / k ** 2), (0.0, 1.0)):
        glo = sp_map(lo, k, d, y) - lo
        ghi = sp_map(hi, k, d, y) - hi
        if glo * ghi > 0:
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = sp_map(mid, k, d, y) - mid
            if gm == 0 or hi - lo < tol * 1e-3:
                break
            if gm * glo > 0:
                lo, glo = mid, gm
            else:
                hi = mid
        xs = 0.5 * (lo + hi)
        r = abs(sp_map(xs, k, d, y) - xs)
        if r < max(tol, 1e-15):
            return SpPoint(k, d, y, xs, clause_update(xs, k), r, it, "bisection")
    raise NonConvergence(f"SP iteration did not converge (k={k}, d={d}, y={y}, last residual {res:.3g})",
                         traj)


def sp_derivative(k, d, y, pt=None, x=None):
    """Derivative of x -> var_update(clause_update(x)) at the point.

    Uses dx~/dw = -x~(1-x~) E[L_AM - L_GM] / (w(1-w)) with L_AM ~ A_l P_l and
    L_GM ~ G_l S_l, times dw/dx = -(k-1) w / (1-x).
    """
    if x is None:
        x = pt.x
    w = clause_update(x, k)
    if w <= 0.0 or x >= 1.0:
        return 0.0
    s = kernel_sums(d - 1, w, y)
    xt = _xtilde_from_sums(s)
    e_am = s[S_APL] / s[S_AP] if s[S_AP] > 0 else 0.0
    e_gm = s[S_GSL] / s[S_GS]
    dxt_dw = -xt * (1.0 - xt) * (e_am - e_gm) / (w * (1.0 - w))
    dw_dx = -(k - 1) * w / (1.0 - x)
    return dxt_dw * dw_dx


def mean_frozen_counts(k, d, y, pt):
    """(E L_AM, E L_GM) at the point, the diagnostics behind the derivative."""
    s = kernel_sums(d - 1, pt.w, y)
    return s[S_APL] / s[S_AP], s[S_GSL] / s[S_GS]
