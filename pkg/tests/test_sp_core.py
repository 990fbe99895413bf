import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import comb, gammaln
from scipy.stats import binom

import naesat_rsb.sp_core as sp
from naesat_rsb.errors import InvalidInput, NonConvergence
from naesat_rsb.sp_core import (Gamma_of_y, alpha_of_c, c_of_alpha, clause_update, gamma_of_y,
                                kernel_sums, kernel_table, pqs_arrays, sp_derivative, sp_solve,
                                var_update, y_of_gamma)

# k = 10, c = 2: d = round(10 alpha(c)), y at gamma = 1; damped iteration from 1/(2k^2)
GOLDEN_K10 = dict(d=7098, y=1.3862700062218676, x=0.0017989839142139312)


def xtilde_double_sum(w, y, d):
    """x~ from the raw sum over l frozen inputs and j of them pointing the minority way."""
    n = d - 1
    z0 = zf = 0.0
    for l in range(n + 1):
        wl = comb(n, l) * w ** l * (1 - w) ** (n - l) * 0.5 ** l
        for j in range(l + 1):
            t = wl * comb(l, j) * math.exp(-y * j)
            if 2 * j < l:
                z0 += t
            elif 2 * j == l:
                zf += t
    return zf / (2 * z0 + zf)


def test_pqs_small_values():
    P, Q, S, _ = pqs_arrays(6, 0.0)
    assert P[0] == 0 and Q[0] == 1 and S[0] == 1
    assert S[4] == pytest.approx(0.375, abs=1e-15)
    assert P[2] == pytest.approx(0.25, abs=1e-15) and Q[2] == pytest.approx(0.5, abs=1e-15)
    assert P[1] == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("y", [0.0, 0.3, 2.0, 9.0])
def test_pqs_against_binomial(y):
    P, Q, S, T = pqs_arrays(300, y)
    p = 1 / (1 + math.exp(y))
    ell = np.arange(301)
    np.testing.assert_allclose(P, binom.cdf(np.ceil(ell / 2) - 1, ell, p), rtol=1e-11, atol=1e-300)
    even = ell[::2]
    np.testing.assert_allclose(Q[::2], binom.pmf(even // 2, even, p), rtol=1e-11)
    np.testing.assert_allclose(S[::2], binom.pmf(even // 2, even, 0.5), rtol=1e-11)
    assert (Q[1::2] == 0).all()
    # T_l = E[X; X < l/2]
    l = 21
    j = np.arange(l + 1)
    assert T[l] == pytest.approx(float((j * binom.pmf(j, l, p))[2 * j < l].sum()), rel=1e-11)


@pytest.mark.parametrize("w,y", [(0.05, 0.2), (0.3, 1.0), (0.8, 4.0)])
def test_aq_equals_gs(w, y):
    t = kernel_table(150, w, y, full=True)
    np.testing.assert_allclose(t.A * t.Q, t.G * t.S, rtol=1e-12, atol=1e-300)


def test_clause_update_examples():
    assert clause_update(0.1, 4) == pytest.approx(0.18225, abs=1e-15)
    assert clause_update(1.0, 5) == 0.0
    assert clause_update(0.0, 2) == 1.0


@given(st.floats(0.0, 1.0), st.floats(0.0, 12.0))
def test_var_update_closed_forms(w, y):
    # one incoming clause: x~ = 1 - w
    assert var_update(w, y, 2) == pytest.approx(1 - w, rel=1e-12, abs=1e-15)
    assert var_update(0.0, y, 7) == 1.0
    assert var_update(w, y, 1) == 1.0


@pytest.mark.parametrize("w,y,d", [(0.05, 0.3, 50), (0.2, 1.5, 31), (0.6, 0.1, 12)])
def test_var_update_double_sum(w, y, d):
    assert var_update(w, y, d) == pytest.approx(xtilde_double_sum(w, y, d), rel=1e-11)


def _full_log_sums(n, w, y):
    l = np.arange(n + 1)
    lb = gammaln(n + 1) - gammaln(l + 1) - gammaln(n - l + 1) + l * math.log(w) + (n - l) * math.log1p(-w)
    p = 1 / (1 + math.exp(y))
    P = binom.cdf(np.ceil(l / 2) - 1, l, p)
    S = np.where(l % 2 == 0, binom.pmf(l // 2, l, 0.5), 0.0)
    AM, GM = 0.5 * (1 + math.exp(-y)), math.exp(-y / 2)
    with np.errstate(divide="ignore"):
        la = lb + l * math.log(AM) + np.log(P)
        lg = lb + l * math.log(GM) + np.log(S)
    m = max(la.max(), lg.max())
    return np.exp(la - m).sum(), np.exp(lg - m).sum()


@pytest.mark.parametrize("d", [200, 900, 2000])
@pytest.mark.parametrize("w", [0.002, 0.03])
def test_truncated_sums_match_full(d, w):
    z0, zf = _full_log_sums(d - 1, w, 1.0)
    assert var_update(w, 1.0, d) == pytest.approx(zf / (2 * z0 + zf), rel=1e-10)


def test_large_degree_is_finite():
    x = var_update(1e-6, 1.0, 10 ** 9)
    assert 0.0 <= x <= 1.0 and math.isfinite(x)


def test_fractional_degree_interpolates():
    xs = [var_update(0.01, 1.0, d) for d in (10, 10.25, 10.5, 11)]
    assert all(a > b for a, b in zip(xs, xs[1:]))


@pytest.mark.parametrize("n,w,y", [(0, 0.3, 1.0), (5, 0.4, 0.5), (999, 0.01, 2.0), (7098, 0.0036, 1.4),
                                   (30.5, 0.2, 0.7)])
def test_backends_agree(n, w, y):
    a = kernel_sums(n, w, y, "numba")
    b = kernel_sums(n, w, y, "numpy")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


def test_golden_fixed_point_k10():
    pt = sp_solve(10, d=GOLDEN_K10["d"], y=GOLDEN_K10["y"])
    assert pt.x == pytest.approx(GOLDEN_K10["x"], rel=1e-10)
    assert pt.residual < 1e-13 and pt.in_mbullet
    assert pt.w == pytest.approx(clause_update(pt.x, 10), rel=1e-15)


def test_derivative_matches_finite_difference():
    k, d, y, x = 10, GOLDEN_K10["d"], GOLDEN_K10["y"], GOLDEN_K10["x"]
    h = 1e-7
    fd = (sp.sp_map(x + h, k, d, y) - sp.sp_map(x - h, k, d, y)) / (2 * h)
    der = sp_derivative(k, d, y, x=x)
    assert der == pytest.approx(fd, rel=1e-4)
    assert abs(der) < 1


def test_solve_validation():
    with pytest.raises(InvalidInput):
        sp_solve(3, alpha=1.1)
    with pytest.raises(InvalidInput):
        sp_solve(3, d=4, y=-1.0)
    with pytest.raises(InvalidInput):
        sp_solve(3, d=4, damping=0.0)
    with pytest.raises(InvalidInput):
        var_update(0.1, 1.0, 0)


def test_nonconvergence_reports_trajectory(monkeypatch):
    monkeypatch.setattr(sp, "sp_map", lambda x, k, d, y: x + 0.1)
    with pytest.raises(NonConvergence) as ei:
        sp_solve(3, d=4, y=1.0, max_iter=50)
    assert len(ei.value.trajectory) == 50


@given(st.floats(0.0, 20.0), st.floats(0.1, 100.0))
def test_gamma_band(y, c):
    g, G = gamma_of_y(y, c), Gamma_of_y(y, c)
    assert g / 2 - 1e-12 * c <= G <= g + 1e-12 * c


@given(st.floats(1e-3, 0.999), st.floats(0.1, 100.0))
def test_y_of_gamma_inverts(r, c):
    g = 2 * c * r * r
    assert gamma_of_y(y_of_gamma(g, c), c) == pytest.approx(g, rel=1e-9)


def test_y_of_gamma_saturates():
    assert y_of_gamma(4.0, 2.0) == math.inf


@given(st.floats(0.01, 1e3), st.integers(2, 20))
def test_alpha_c_roundtrip(c, k):
    assert c_of_alpha(alpha_of_c(c, k), k) == pytest.approx(c, rel=1e-14)
