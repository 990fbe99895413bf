import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from naesat_rsb.errors import InvalidInput, ResourceLimit
from naesat_rsb.gardner import FIRST, SECOND, build_matrices
from naesat_rsb.onersb import free_energy, solve_ystar
from naesat_rsb.sp_core import clause_update, sp_solve
from naesat_rsb.tworsb import (FiniteQ, PerturbationSpec, TrioMeasure, aux_matrices, big_g, big_w,
                               delta_phi_expansion, leading_coefficient, perturb,
                               perturbation_from_xi, perturbed_q, phi_2rsb, q_ii, split_xi)

K, D, Y = 3, 8, 2.0


@pytest.fixture(scope="module")
def fixed_point():
    pt = sp_solve(K, d=D, y=Y, tol=1e-15)
    x = float(pt.x)
    return x, build_matrices(K, D, Y, x=x), aux_matrices(K, D, Y, x=x)


def rho_of(x):
    return [(1 - x) / 2, (1 - x) / 2, x]


def mixed_q():
    return FiniteQ((0.5, 0.3, 0.2), (TrioMeasure(0.6, 0.3, 0.1), TrioMeasure(0.2, 0.2, 0.6),
                                     TrioMeasure(0.0, 0.9, 0.1)))


def test_trio_validation():
    with pytest.raises(InvalidInput):
        TrioMeasure(0.5, 0.6, 0.1)
    with pytest.raises(InvalidInput):
        FiniteQ((0.5, 0.4), (TrioMeasure.unit(0), TrioMeasure.unit(1)))
    with pytest.raises(InvalidInput):
        big_g(2.0, 1.0, q_ii(rho_of(0.2)), 3)


@pytest.mark.parametrize("k,d,Q", [(3, 3, "mixed"), (3, 4, "two"), (4, 2, "mixed")])
def test_grouped_matches_enumeration(k, d, Q):
    if Q == "mixed":
        Q = mixed_q()
    else:
        Q = FiniteQ((0.7, 0.3), (TrioMeasure(0.4, 0.4, 0.2), TrioMeasure(0.1, 0.5, 0.4)))
    a = big_w(0.7, 1.3, Q, k, d, method="grouped")
    b = big_w(0.7, 1.3, Q, k, d, method="enumerate")
    assert a == pytest.approx(b, rel=1e-12)


def test_enumeration_caps():
    with pytest.raises(ResourceLimit):
        big_w(1.0, 1.0, q_ii(rho_of(0.2)), 3, 6, method="enumerate")
    with pytest.raises(InvalidInput):
        big_w(1.0, 1.0, q_ii(rho_of(0.2)), 3, 3, method="other")


def test_point_mass_equal_y_is_plain_sum():
    rho = np.array([0.3, 0.5, 0.2])
    Q = FiniteQ.point(rho)
    # clause: 1 - (1 - e^-y) (prod rho(0) + prod rho(1)) with k = 3
    y = 0.9
    assert big_g(y, y, Q, 3) == pytest.approx(1 - (1 - math.exp(-y)) * (0.3 ** 3 + 0.5 ** 3), rel=1e-14)


@given(st.floats(0.05, 0.9), st.floats(0.1, 4.0))
@settings(max_examples=25)
def test_q_ii_identity_k3_d4(x, y):
    lhs = phi_2rsb(y, y, q_ii(rho_of(x)), 3, 4)
    assert lhs == pytest.approx(free_energy(3, 4, y, x, clause_update(x, 3)) / y, rel=1e-10)


def test_q_ii_identity_at_fixed_point(fixed_point):
    x = fixed_point[0]
    lhs = phi_2rsb(Y, Y, q_ii(rho_of(x)), K, D)
    assert lhs == pytest.approx(free_energy(K, D, Y, x, clause_update(x, K)) / Y, rel=1e-10)


@pytest.mark.parametrize("y1", [0.2, 0.7, 1.5])
def test_case_one_depends_only_on_y2(y1):
    Q = FiniteQ.point((0.35, 0.25, 0.4))
    assert phi_2rsb(y1, 1.5, Q, 3, 4) == pytest.approx(phi_2rsb(1.5, 1.5, Q, 3, 4), rel=1e-12)


@pytest.mark.parametrize("y2", [0.8, 1.5, 4.0])
def test_case_two_depends_only_on_y1(y2):
    Q = q_ii(rho_of(0.3))
    assert phi_2rsb(0.8, y2, Q, 3, 4) == pytest.approx(phi_2rsb(0.8, 0.8, Q, 3, 4), rel=1e-12)


def test_aux_identities(fixed_point):
    x, b, A = fixed_point
    w = clause_update(x, K)
    g = math.exp(-Y / 2)
    u = b.Bhat @ b.xi
    assert np.max(np.abs(A.Pi @ b.xi)) < 1e-12
    assert np.max(np.abs(A.P @ A.Gamma @ A.P)) < 1e-12
    assert np.max(np.abs(A.P @ (A.Pi - A.Xi))) < 1e-12
    assert np.max(np.abs((A.Pi - A.Xi) @ A.P)) < 1e-12
    assert u @ (A.Gamma @ b.xi) == pytest.approx((1 - g) * g * (1 - x) * x * x * w, rel=1e-12)
    assert u @ (A.Xi @ b.xi) == pytest.approx((1 - g) * (1 - g * g) * (1 - x) * x * x * w, rel=1e-12)


@given(st.floats(0.01, 0.9), st.floats(0.1, 4.0))
@settings(max_examples=20)
def test_aux_times_bhat_symmetric(x, y):
    b = build_matrices(4, 9, y, x=x)
    A = aux_matrices(4, 9, y, x=x)
    for M in (A.Pi, A.Xi, A.Gamma):
        T = M.T @ b.Bhat
        assert np.max(np.abs(T - T.T)) < 1e-12


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_diagonal_vectors(vals):
    x = 0.1
    b = build_matrices(K, D, Y, x=x)
    A = aux_matrices(K, D, Y, x=x)
    delta = np.zeros(9)
    delta[:3] = vals
    np.testing.assert_allclose(A.Pi @ delta, A.Xi @ delta, atol=1e-14)
    assert abs((b.Bhat @ delta) @ (A.Gamma @ delta)) < 1e-14


def test_xi_split_constraints(fixed_point):
    x, b, _ = fixed_point
    rho = np.array(rho_of(x))
    varpi, sigma = split_xi(Y, rho)
    np.testing.assert_allclose(varpi + sigma, b.xi, atol=1e-15)
    assert abs(rho @ varpi[[1, 2, 0]]) < 1e-15
    for w in range(3):
        assert abs(sigma[FIRST == w].sum()) < 1e-15
    spec = perturbation_from_xi(K, D, Y, 0.05, x=x)
    lin_delta, lin_eps = spec.constraint_residuals()
    assert abs(lin_delta) < 1e-15 and np.max(np.abs(lin_eps)) < 1e-15
    assert spec.y2 == pytest.approx(Y / 0.95, rel=1e-15)
    assert np.max(np.abs(spec.Upsilon)) <= np.max(np.abs(spec.epsilon)) ** 2


def test_perturbation_spec_zeta_range():
    for z in (0.0, 0.25):
        with pytest.raises(InvalidInput):
            PerturbationSpec(z, 1.0, np.array(rho_of(0.2)), np.zeros(3), np.zeros(9))


def test_perturbed_q_off_simplex():
    spec = PerturbationSpec(0.1, 1.0, np.array(rho_of(0.2)), np.zeros(3),
                            np.where(FIRST == SECOND, -2.0, 0.0))
    with pytest.raises(InvalidInput):
        perturbed_q(spec)


def test_zero_tau_gives_zero(fixed_point):
    x = fixed_point[0]
    spec = PerturbationSpec(0.05, Y, np.array(rho_of(x)), np.zeros(3), np.zeros(9))
    assert delta_phi_expansion(K, D, Y, spec=spec, x=x) == 0.0


def test_expansion_residual_scales_as_zeta6(fixed_point):
    pt = sp_solve(K, d=D, y=Y, tol=1e-15)
    zetas = np.array([0.02, 0.03, 0.045, 0.07, 0.1])
    res = np.array([abs(perturb(K, D, Y, z, pt=pt).residual) for z in zetas])
    slope = np.polyfit(np.log(zetas), np.log(res), 1)[0]
    assert 5.5 <= slope <= 6.5


def test_leading_coefficient_matches_expansion(fixed_point):
    # along tau = zeta^2 xi the zeta^5 term dominates the expansion for small zeta
    x = fixed_point[0]
    c5 = leading_coefficient(K, D, Y, x=x)
    z = 1e-3
    spec = perturbation_from_xi(K, D, Y, z, x=x)
    assert delta_phi_expansion(K, D, Y, spec=spec, x=x) / z ** 5 == pytest.approx(c5, rel=1e-2)


def test_leading_sign_opposes_branch_excess(fixed_point):
    _, b, _ = fixed_point
    c5 = leading_coefficient(K, D, Y, x=fixed_point[0])
    assert np.sign(c5) == -np.sign(b.branch_lambda - 1)


def test_two_rsb_values_above_minus_e1rsb():
    r = solve_ystar(K, d=D)
    for y in np.linspace(0.5 * r.y_star, 2 * r.y_star, 7):
        x = sp_solve(K, d=D, y=y).x
        assert phi_2rsb(y, y, q_ii(rho_of(x)), K, D) >= -r.e_onersb - 1e-12
    assert phi_2rsb(0.8, 1.3, mixed_q(), K, D) >= -r.e_onersb
