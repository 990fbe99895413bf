"""1RSB free energy F(y), energy e(y), complexity Sigma(y) and the root y*.

At a survey-propagation fixed point (x, w) with alpha = d/k,

    F(x, w, y) = log dfz(w) + alpha log hfz(x) - alpha k log efz(x, w)
    hfz = 1 - 2 (1-x)^k (1 - e^-y) / 2^k
    efz = 1 - (1-x) w (1 - e^-y) / 2

dfz(w) is the normalizer of the d-clause variable marginal (kernels at
n = d). Sigma = F + y e vanishes at y*, and e_1rsb = e(y*) = -min_y F(y)/y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import InvalidInput, NonConvergence
from .sp_core import (LOG_A, LOG_G, S_AP, S_APL, S_AT, S_GS, S_GSL, Gamma_of_y, c_of_alpha,
                      clause_update, degree_from_alpha, energy_params, gamma_of_y, kernel_sums,
                      sp_solve, y_of_gamma)

Y_CAP = 20.0


def log_hfz(x, y, k):
    return math.log1p(-2.0 * (1.0 - x) ** k * (-math.expm1(-y)) / 2.0 ** k)


def log_efz(x, w, y):
    return math.log1p(-(1.0 - x) * w * (-math.expm1(-y)) / 2.0)


def log_dfz(w, y, d):
    """log of sum_l A_l (2 P_l + Q_l) at degree d."""
    s = kernel_sums(d, w, y)
    r = math.exp(s[LOG_G] - s[LOG_A])
    tot = 2.0 * s[S_AP] + r * s[S_GS]
    if not tot > 0:
        raise InvalidInput(f"degenerate variable normalizer at w={w}, y={y}")
    return s[LOG_A] + math.log(tot)


def free_energy(k, d, y, x, w):
    """F(x, w, y); equals zero at y = 0."""
    if not (0 <= x <= 1 and 0 <= w <= 1 and y >= 0):
        raise InvalidInput(f"need x, w in [0, 1] and y >= 0 (x={x}, w={w}, y={y})")
    alpha = d / k
    lh = log_hfz(x, y, k)
    le = log_efz(x, w, y)
    if not (math.isfinite(lh) and math.isfinite(le)):
        raise InvalidInput("non-positive clause or edge normalizer")
    return log_dfz(w, y, d) + alpha * lh - alpha * k * le


def edge_energy(x, w, y):
    """Energy carried by one edge (equivalently one clause) at the fixed point."""
    _, AM, _ = energy_params(y)
    return w * (AM - 0.5) / (1.0 / (1.0 - x) - w * (1.0 - AM)) if x < 1.0 else 0.0


def var_energy(w, y, d):
    """Mean of min(l0, l1) under the d-clause variable marginal."""
    s = kernel_sums(d, w, y)
    r = math.exp(s[LOG_G] - s[LOG_A])
    return (2.0 * s[S_AT] + 0.5 * r * s[S_GSL]) / (2.0 * s[S_AP] + r * s[S_GS])


def energy(k, d, y, x, w):
    """e = e_var(w) - alpha (k - 1) e_edge(x, w)."""
    return var_energy(w, y, d) - (d / k) * (k - 1) * edge_energy(x, w, y)


@dataclass(frozen=True)
class OneRsbValue:
    k: int
    d: float
    y: float
    x: float
    w: float
    F: float
    e: float
    hfz: float
    efz: float
    log_dfz: float
    ell_am: float
    ell_gm: float
    sp: object = field(repr=False, default=None)

    @property
    def Sigma(self):
        return self.F + self.y * self.e


def evaluate(k, d, y, pt=None, **sp_kw):
    """Solve SP at y (unless ``pt`` is given) and evaluate the 1RSB quantities."""
    if pt is None:
        pt = sp_solve(k, d=d, y=y, **sp_kw)
    x, w = float(pt.x), float(pt.w)
    s = kernel_sums(d - 1, w, y)
    ell_am = s[S_APL] / s[S_AP] if s[S_AP] > 0 else 0.0
    ell_gm = s[S_GSL] / s[S_GS]
    return OneRsbValue(k, d, y, x, w, free_energy(k, d, y, x, w), energy(k, d, y, x, w),
                       math.exp(log_hfz(x, y, k)), math.exp(log_efz(x, w, y)),
                       log_dfz(w, y, d), ell_am, ell_gm, pt)


class _Tracker:
    """Evaluates F(y) and Sigma(y), warm-starting SP from the last solution."""

    def __init__(self, k, d, **sp_kw):
        self.k, self.d, self.sp_kw = k, d, sp_kw
        self.x = None
        self.trace = []

    def value(self, y):
        pt = sp_solve(self.k, d=self.d, y=y, x0=self.x, **self.sp_kw)
        self.x = pt.x
        v = evaluate(self.k, self.d, y, pt)
        self.trace.append((y, v.Sigma))
        return v

    def F(self, y):
        return self.value(y).F

    def Sigma(self, y):
        return self.value(y).Sigma


def F_of_y(k, d, y, **sp_kw):
    return evaluate(k, d, y, **sp_kw).F


def y_bracket(c, gamma_bracket=(0.25, 4.0)):
    """y interval on which gamma(y) runs over ``gamma_bracket``, capped at y = 20."""
    lo = y_of_gamma(gamma_bracket[0], c)
    hi = min(y_of_gamma(gamma_bracket[1], c), Y_CAP)
    if not lo < hi:
        raise InvalidInput(f"empty y bracket for c = {c}")
    return lo, hi


@dataclass
class RootResult:
    k: int
    d: float
    y_star: float
    Gamma_at_root: float
    gamma_at_root: float
    e_onersb: float
    Sigma_at_root: float
    bracket: tuple
    min_F_over_y: float
    value: OneRsbValue = field(repr=False)
    trace: list = field(repr=False, default_factory=list)

    @property
    def alpha(self):
        return self.d / self.k

    @property
    def c(self):
        return c_of_alpha(self.alpha, self.k)


def solve_ystar(k, alpha=None, *, d=None, gamma_bracket=(0.25, 4.0), fractional=False,
                min_dual=True, **sp_kw):
    """Root of Sigma(y) = F(y) + y e(y) on the gamma bracket.

    Brent's method on the bracket followed by one Newton step with
    Sigma'(y) = -y F''(y) from a central second difference.
    """
    if d is None:
        d = degree_from_alpha(k, alpha, fractional)
    c = c_of_alpha(d / k, k)
    lo, hi = y_bracket(c, gamma_bracket)
    tr = _Tracker(k, d, **sp_kw)
    s_lo, s_hi = tr.Sigma(lo), tr.Sigma(hi)
    if not (s_lo > 0 > s_hi):
        raise NonConvergence(
            f"Sigma has no sign change on the bracket [{lo:.6g}, {hi:.6g}]: "
            f"Sigma = {s_lo:.6g}, {s_hi:.6g}", tr.trace)
    tr.x = None
    y = brentq(tr.Sigma, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    v = tr.value(y)
    h = 1e-4 * max(y, 1e-3)
    f2 = (tr.F(y + h) - 2.0 * v.F + tr.F(y - h)) / h ** 2
    if f2 > 0 and y > 0:
        y_new = y + v.Sigma / (y * f2)
        if lo < y_new < hi:
            v_new = tr.value(y_new)
            if abs(v_new.Sigma) < abs(v.Sigma):
                y, v = y_new, v_new
    v = tr.value(y)
    mfy = math.nan
    if min_dual:
        span = 0.25 * (hi - lo)
        a, b = max(lo, y - span), min(hi, y + span)
        res = minimize_scalar(lambda t: tr.F(t) / t, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-10})
        mfy = float(min(res.fun, v.F / y))
    return RootResult(k, d, y, Gamma_of_y(y, c), gamma_of_y(y, c), v.e, v.Sigma, (lo, hi),
                      mfy, v, tr.trace)


def _central_diff(f, t, h):
    # five-point stencil: w is only ~2^-k, so a plain two-point difference
    # at h = 1e-6 is dominated by the h^2 term for k >= 12
    return (8.0 * (f(t + h) - f(t - h)) - (f(t + 2 * h) - f(t - 2 * h))) / (12.0 * h)


def stationarity_check(k, d, y, pt, h=1e-6):
    """Central-difference partials (dF/dx, dF/dw) at (pt.x, pt.w) and F itself."""
    x, w = float(pt.x), float(pt.w)
    fx = _central_diff(lambda t: free_energy(k, d, y, t, w), x, h)
    fw = _central_diff(lambda t: free_energy(k, d, y, x, t), w, h)
    return fx, fw, free_energy(k, d, y, x, w)


def free_energy_partials(k, d, y, x, w):
    """Closed-form (dF/dx, dF/dw); both vanish exactly when w = w(x) and x = x~(w)."""
    from .sp_core import var_update
    alpha = d / k
    one_m_am = -0.5 * math.expm1(-y)
    wx = clause_update(x, k)
    fx = alpha * k * one_m_am * (wx / (1.0 - (1.0 - x) * wx * one_m_am)
                                 - w / (1.0 - (1.0 - x) * w * one_m_am))
    xt = var_update(w, y, d)
    fw = d * one_m_am * ((1.0 - x) / (1.0 - (1.0 - x) * w * one_m_am)
                         - (1.0 - xt) / (1.0 - (1.0 - xt) * w * one_m_am))
    return fx, fw


def convexity_check(k, alpha=None, y_grid=(), *, d=None, h=None, fractional=False, **sp_kw):
    """F''(y) by second central differences, re-solving SP at every y.

    Returns (F'', F'' e^y / c) as arrays over ``y_grid``.
    """
    if d is None:
        d = degree_from_alpha(k, alpha, fractional)
    c = c_of_alpha(d / k, k)
    tr = _Tracker(k, d, **sp_kw)
    out = []
    for y in y_grid:
        hh = h if h is not None else 1e-3 * max(y, 1e-2)
        out.append((tr.F(y + hh) - 2.0 * tr.F(y) + tr.F(y - hh)) / hh ** 2)
    f2 = np.array(out)
    return f2, f2 * np.exp(np.asarray(y_grid)) / c


def e_onersb(k, alpha=None, **kw):
    return solve_ystar(k, alpha, **kw).e_onersb
