"""First-moment (annealed) lower bound on the ground-state energy, and its
comparison with the 1RSB free energy.

With p in [0, 1] parametrizing the energy density e = alpha (1-p) / 2^(k-1),

    eta(p)   = (1-p)(2^(k-1) - 1) / (2^(k-1) - (1-p))
    1/c(p)   = (2^(k-1) - (1-p)) log[(2^(k-1) - (1-p)) / (2^(k-1) - 1)] + (1-p) log(1-p)
    alpha_ubd(p) = c(p) 2^(k-1) log 2

and f_eta(alpha, e) = log 2 - e log eta + alpha log(1 - 2/2^k + 2 eta/2^k) is the
exponential rate of the eta-weighted first moment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import xlogy

from .errors import InvalidInput
from .sp_core import LN2, alpha_of_c, c_of_alpha, sp_solve


def eta(p, k):
    K = 2.0 ** (k - 1)
    return (1.0 - p) * (K - 1.0) / (K - (1.0 - p))


def c_of_p(p, k):
    K = 2.0 ** (k - 1)
    if not 0.0 < p <= 1.0:
        raise InvalidInput(f"p must lie in (0, 1], got {p}")
    s = K - (1.0 - p)
    return 1.0 / (s * math.log1p(p / (K - 1.0)) + float(xlogy(1.0 - p, 1.0 - p)))


def alpha_ubd(p, k):
    return c_of_p(p, k) * 2.0 ** (k - 1) * LN2


def alpha_floor(k):
    """alpha_ubd(1) = 2^(k-1) log 2 / (-2^(k-1) log(1 - 2^(1-k)))."""
    return alpha_ubd(1.0, k)


def p_ubd(alpha, k, tol=1e-14):
    """Solve alpha_ubd(p) = alpha for p by bisection on [1e-12, 1] (c(p) is decreasing)."""
    if alpha < alpha_floor(k) * (1 - 1e-15):
        raise InvalidInput(f"alpha = {alpha} lies below the first-moment floor {alpha_floor(k):.17g}")
    lo, hi = 1e-12, 1.0
    if alpha_ubd(lo, k) < alpha:
        raise InvalidInput(f"alpha = {alpha} beyond the p bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if alpha_ubd(mid, k) > alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * hi:
            break
    return 0.5 * (lo + hi)


def e_lbd(alpha, k, clamp=False):
    """alpha (1 - p_ubd(alpha)) / 2^(k-1).

    Below the floor alpha_ubd(1) the first moment gives no constraint; with
    ``clamp=True`` the bound is then 0 instead of an error.
    """
    if clamp and alpha < alpha_floor(k):
        return 0.0
    return alpha * (1.0 - p_ubd(alpha, k)) / 2.0 ** (k - 1)


def f_eta(alpha, e, k, eta_):
    if not 0.0 < eta_ <= 1.0:
        raise InvalidInput("eta must lie in (0, 1]")
    return LN2 - e * math.log(eta_) + alpha * math.log1p(-2.0 / 2.0 ** k + 2.0 * eta_ / 2.0 ** k)


def F_rs(y, alpha, k):
    """Replica-symmetric free energy log 2 + alpha log(1 - 2(1 - e^-y)/2^k)."""
    return LN2 + alpha * math.log1p(2.0 * math.expm1(-y) / 2.0 ** k)


def correction_x(p, k):
    """x(p) = [exp(-k log2 * 2 c(p)(1 - eta^(1/2))^2) / max(c(p) k eta^(1/2), 1)]^(1/2)."""
    c = c_of_p(p, k)
    se = math.sqrt(eta(p, k))
    return math.sqrt(math.exp(-k * LN2 * 2.0 * c * (1.0 - se) ** 2) / max(c * k * se, 1.0))


def gamma_p(p, k):
    """2 c(p) (1 - eta(p)^(1/2))^2, the gamma value at y = -log eta(p)."""
    return 2.0 * c_of_p(p, k) * (1.0 - math.sqrt(eta(p, k))) ** 2


@dataclass(frozen=True)
class BoundComparison:
    k: int
    alpha: float
    p_ubd: float
    eta: float
    e_lbd: float
    y_eta: float
    F: float
    gap: float
    x_p: float
    x_y: float

    @property
    def gap_over_x(self):
        return self.gap / self.x_y


def compare(k, alpha, d=None, **sp_kw):
    """First-moment rate minus the 1RSB bound at y_eta = -log eta(p_ubd).

    gap = f_eta(alpha, e_lbd) - [F(y_eta) + y_eta e_lbd]; the first term is
    zero by the definition of p_ubd.
    """
    from .onersb import evaluate
    p = p_ubd(alpha, k)
    et = eta(p, k)
    el = alpha * (1.0 - p) / 2.0 ** (k - 1)
    y = -math.log(et)
    if d is None:
        d = k * alpha
    pt = sp_solve(k, d=d, y=y, **sp_kw)
    v = evaluate(k, d, y, pt)
    gap = f_eta(alpha, el, k, et) - (v.F + y * el)
    return BoundComparison(k, alpha, p, et, el, y, v.F, gap, correction_x(p, k), v.x)


def gap(k, alpha, **kw):
    return compare(k, alpha, **kw).gap


__all__ = ["eta", "c_of_p", "alpha_ubd", "alpha_floor", "p_ubd", "e_lbd", "f_eta", "F_rs",
           "correction_x", "gamma_p", "compare", "gap", "BoundComparison", "c_of_alpha",
           "alpha_of_c"]
