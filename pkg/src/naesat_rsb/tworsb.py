"""Zero-temperature 2RSB functional on finitely supported Q, the auxiliary
matrices of the perturbation expansion, and the instability test.

A trio measure rho is a probability vector on the warnings (0, 1, f). Q is a
finite mixture of trio measures. With D = d(k-1),

    G(y1, y2, Q) = E_Q[ {sum_w exp(-y2 phi_clause(w)) prod_j rho_j(w_j)}^(y1/y2) ]
    W(y1, y2, Q) = E_Q[ {sum_w exp(-y2 phi(w)) prod_i rho_i(w_i)}^(y1/y2) ]
    Phi = log(W)/y1 - alpha (k-1) log(G)/y1

where phi(w_1:D) = min(#0, #1) over the d clause outputs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InvalidInput, NonConvergence, ResourceLimit
from .gardner import FIRST, PAIRS, SECOND, build_matrices, bisect_crossing
from .sp_core import clause_update, sp_solve

ENUM_CAP = 10
SUPPORT_CAP = 4
SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class TrioMeasure:
    p0: float
    p1: float
    pf: float

    def __post_init__(self):
        v = self.as_array()
        if (v < -SIMPLEX_TOL).any() or abs(v.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidInput(f"not a probability vector on (0, 1, f): {tuple(v)}")

    def as_array(self):
        return np.array([self.p0, self.p1, self.pf], dtype=float)

    @classmethod
    def unit(cls, w):
        v = np.zeros(3)
        v[w] = 1.0
        return cls(*v)


@dataclass(frozen=True)
class FiniteQ:
    masses: tuple
    atoms: tuple

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if len(m) != len(self.atoms) or len(m) == 0:
            raise InvalidInput("masses and atoms must have the same nonzero length")
        if (m < -SIMPLEX_TOL).any() or abs(m.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidInput(f"masses must form a probability vector, got {tuple(m)}")

    @property
    def support(self):
        return len(self.masses)

    def arrays(self):
        return np.asarray(self.masses, dtype=float), np.array([a.as_array() for a in self.atoms])

    @classmethod
    def point(cls, rho):
        return cls((1.0,), (rho if isinstance(rho, TrioMeasure) else TrioMeasure(*rho),))


def q_ii(rho):
    """Mixture over w of unit masses at 1_w with weights rho(w)."""
    rho = np.asarray(rho, dtype=float)
    return FiniteQ(tuple(rho), tuple(TrioMeasure.unit(i) for i in range(3)))


# ---------------------------------------------------------------- multisets

def _multisets(s, n):
    """All multisets of size n from range(s) with their multinomial log-coefficients."""
    out = []
    lg_n = gammaln(n + 1)
    for combo in itertools.combinations_with_replacement(range(s), n):
        cnt = np.bincount(combo, minlength=s)
        out.append((cnt, lg_n - gammaln(cnt + 1).sum()))
    return out


def _check_y(y1, y2):
    if not 0 < y1 <= y2:
        raise InvalidInput(f"need 0 < y1 <= y2, got y1={y1}, y2={y2}")


def big_g(y1, y2, Q, k):
    """Clause functional; the inner sum is 1 - (1 - e^-y2)(prod rho(0) + prod rho(1))."""
    _check_y(y1, y2)
    m, R = Q.arrays()
    nu = y1 / y2
    a = -math.expm1(-y2)
    logm = np.log(np.where(m > 0, m, 1.0))
    tot = 0.0
    for cnt, lc in _multisets(len(m), k):
        if (cnt[m == 0] > 0).any():
            continue
        inner = 1.0 - a * (np.prod(R[:, 0] ** cnt) + np.prod(R[:, 1] ** cnt))
        tot += math.exp(lc + (cnt * logm).sum()) * inner ** nu
    return tot


def _var_inner(p, y2):
    """sum over clause outputs of exp(-y2 min(n0, n1)) prod_a p_a(w_a) by a count recursion."""
    d = len(p)
    # c[n0, n1] = probability of n0 zeros and n1 ones so far
    c = np.zeros((d + 1, d + 1))
    c[0, 0] = 1.0
    for pa in p:
        nxt = c * pa[2]
        nxt[1:, :] += c[:-1, :] * pa[0]
        nxt[:, 1:] += c[:, :-1] * pa[1]
        c = nxt
    n = np.arange(d + 1)
    return float((c * np.exp(-y2 * np.minimum.outer(n, n))).sum())


def _clause_types(m, R, k):
    """Distinct clause-output laws over multisets of k-1 inputs, with probabilities."""
    types = {}
    logm = np.log(np.where(m > 0, m, 1.0))
    for cnt, lc in _multisets(len(m), k - 1):
        if (cnt[m == 0] > 0).any():
            continue
        p0 = np.prod(R[:, 1] ** cnt)      # all inputs 1 -> output 0
        p1 = np.prod(R[:, 0] ** cnt)
        key = (p0, p1)
        types[key] = types.get(key, 0.0) + math.exp(lc + (cnt * logm).sum())
    laws = np.array([[p0, p1, 1.0 - p0 - p1] for p0, p1 in types])
    return laws, np.array(list(types.values()))


def _big_w_grouped(y1, y2, Q, k, d):
    m, R = Q.arrays()
    nu = y1 / y2
    laws, probs = _clause_types(m, R, k)
    logp = np.log(probs)
    tot = 0.0
    for cnt, lc in _multisets(len(probs), d):
        p = np.repeat(laws, cnt, axis=0)
        tot += math.exp(lc + (cnt * logp).sum()) * _var_inner(p, y2) ** nu
    return tot


def _phi_table(k, d):
    """phi over {0,1,f}^D (axis order: clause-major, k-1 inputs per clause)."""
    km1 = k - 1
    grids = np.indices((3,) * (d * km1))
    n0 = np.zeros(grids.shape[1:], dtype=np.int64)
    n1 = np.zeros_like(n0)
    for a in range(d):
        blk = grids[a * km1:(a + 1) * km1]
        n0 += (blk == 1).all(axis=0)
        n1 += (blk == 0).all(axis=0)
    return np.minimum(n0, n1)


def _big_w_enumerate(y1, y2, Q, k, d, chunk=256):
    m, R = Q.arrays()
    D = d * (k - 1)
    s = len(m)
    nu = y1 / y2
    kern = np.exp(-y2 * _phi_table(k, d)).reshape(-1)
    tot = 0.0
    combos = np.array(list(itertools.product(range(s), repeat=D)), dtype=np.int64)
    for start in range(0, len(combos), chunk):
        cb = combos[start:start + chunk]
        X = np.broadcast_to(kern, (len(cb), kern.size))
        # contract the leading axis against rho of input i, one input at a time
        for i in range(D):
            X = np.einsum("cj,cjr->cr", R[cb[:, i]], X.reshape(len(cb), 3, -1))
        inner = X[:, 0]
        tot += float((m[cb].prod(axis=1) * inner ** nu).sum())
    return tot


def big_w(y1, y2, Q, k, d, method="grouped"):
    """Variable functional.

    ``method="enumerate"`` sums the nested integral literally over
    support^D x {0,1,f}^D (D <= 10, support <= 4). ``"grouped"`` uses that the
    integrand only depends on the multiset of clause-output laws.
    """
    _check_y(y1, y2)
    if method == "enumerate":
        D = d * (k - 1)
        if D > ENUM_CAP or Q.support > SUPPORT_CAP:
            raise ResourceLimit(f"enumeration needs D <= {ENUM_CAP} and support <= {SUPPORT_CAP}"
                                f" (D={D}, support={Q.support})")
        return _big_w_enumerate(y1, y2, Q, k, d)
    if method == "grouped":
        return _big_w_grouped(y1, y2, Q, k, d)
    raise InvalidInput(f"unknown method {method!r}")


def phi_2rsb(y1, y2, Q, k, d, method="grouped"):
    alpha = d / k
    return (math.log(big_w(y1, y2, Q, k, d, method)) / y1
            - alpha * (k - 1) * math.log(big_g(y1, y2, Q, k)) / y1)


# ---------------------------------------------------------------- auxiliary matrices

def _phibar(a, b):
    return ((a != 2) & (b != 2) & (a != b)).astype(float)


@dataclass(frozen=True)
class AuxMatrices:
    Pi: np.ndarray
    Xi: np.ndarray
    Gamma: np.ndarray
    Theta: np.ndarray
    P: np.ndarray


def aux_matrices(k, d, y, pt=None, x=None):
    """Pi, Xi, Gamma, Theta and the projector P onto the diagonal pairs ff, 00, 11."""
    if x is None:
        x = float(pt.x)
    w = clause_update(x, k)
    rho = np.array([(1 - x) / 2, (1 - x) / 2, x])
    psi = np.array([w / 2, w / 2, 1 - w])
    hw, hs = FIRST[:, None], SECOND[:, None]     # rows: (w^, s^)
    dw, ds = FIRST[None, :], SECOND[None, :]     # columns: (w., s.)
    base = psi[hw] * rho[dw]
    Pi = base * np.exp(-y * _phibar(ds, hs))
    Xi = base * np.exp(y * _phibar(dw, hw) - y * _phibar(dw, hs) - y * _phibar(ds, hw))
    Gamma = Pi * (_phibar(ds, hs) - _phibar(dw, hw))
    Theta = np.zeros((9, 9))
    for i, (v, r) in enumerate(zip(FIRST, SECOND)):
        for j, (ww, s) in enumerate(zip(FIRST, SECOND)):
            if v == ww:
                Theta[i, j] = sum(psi[h] * rho[ww] * math.exp(y * _phibar(ww, h) - y * _phibar(r, h)
                                                              - y * _phibar(s, h)) for h in range(3))
    P = np.diag([1.0 if a == b else 0.0 for a, b in zip(FIRST, SECOND)])
    return AuxMatrices(Pi, Xi, Gamma, Theta, P)


# ---------------------------------------------------------------- perturbation

@dataclass
class PerturbationSpec:
    zeta: float
    y: float
    rho: np.ndarray
    delta: np.ndarray       # three entries, indexed by warning
    epsilon: np.ndarray     # nine entries, indexed by pair
    Upsilon: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if not 0 < self.zeta <= 0.2:
            raise InvalidInput(f"zeta must lie in (0, 0.2], got {self.zeta}")
        self.delta = np.asarray(self.delta, dtype=float)
        self.epsilon = np.asarray(self.epsilon, dtype=float)
        if self.Upsilon is None:
            # point-mass Q_w: Upsilon_{wr,ws} = eps_wr eps_ws
            U = np.zeros((9, 9))
            for i in range(9):
                for j in range(9):
                    if FIRST[i] == FIRST[j]:
                        U[i, j] = self.epsilon[i] * self.epsilon[j]
            self.Upsilon = U

    @property
    def nu(self):
        return 1.0 - self.zeta

    @property
    def y1(self):
        return self.y

    @property
    def y2(self):
        return self.y / self.nu

    @property
    def delta9(self):
        return np.where(FIRST == SECOND, self.delta[FIRST], 0.0)

    @property
    def pi(self):
        diag = FIRST == SECOND
        return np.where(diag, self.delta[FIRST] * self.epsilon, 0.0)

    @property
    def tau(self):
        return self.delta9 + self.nu * (self.epsilon + self.pi)

    def constraint_residuals(self):
        lin_delta = float(self.rho @ self.delta)
        lin_eps = np.array([self.epsilon[FIRST == w].sum() for w in range(3)])
        return lin_delta, lin_eps


def split_xi(y, rho):
    """xi = varpi + sigma: varpi lives on the diagonal pairs, sigma has zero row sums per w."""
    g = math.exp(-0.5 * y)
    r0, rf = rho[0], rho[2]
    varpi = (1 - g) * np.array([2 * r0, -rf, -rf, 0, 0, 0, 0, 0, 0])
    sigma = np.array([-2 * r0, -rf * g, -rf * g, r0, r0, rf * g, rf * g, 0, 0])
    return varpi, sigma


def perturbation_from_xi(k, d, y, zeta, pt=None, x=None):
    """delta = zeta^2 varpi (diagonal entries), epsilon = zeta^2 sigma / nu."""
    if x is None:
        x = float(pt.x)
    rho = np.array([(1 - x) / 2, (1 - x) / 2, x])
    varpi, sigma = split_xi(y, rho)
    nu = 1.0 - zeta
    delta = zeta ** 2 * varpi[[1, 2, 0]]      # pairs 00, 11, ff -> warnings 0, 1, f
    return PerturbationSpec(zeta, y, rho, delta, zeta ** 2 * sigma / nu)


def perturbed_q(spec):
    """Q = sum_w rho_w (1 + delta_w) * unit mass at 1_w + eps_w."""
    masses, atoms = [], []
    for w in range(3):
        v = np.zeros(3)
        v[w] = 1.0
        for j in np.flatnonzero(FIRST == w):
            v[SECOND[j]] += spec.epsilon[j]
        if (v < -SIMPLEX_TOL).any():
            raise InvalidInput(f"zeta = {spec.zeta} pushes Q_{w} off the simplex; use a smaller zeta")
        masses.append(spec.rho[w] * (1.0 + spec.delta[w]))
        atoms.append(TrioMeasure(*np.clip(v, 0.0, None) / np.clip(v, 0.0, None).sum()))
    return FiniteQ(tuple(masses), tuple(atoms))


def delta_phi_expansion(k, d, y, pt=None, spec=None, x=None):
    """Quadratic-form approximation of Phi(y, y/nu, Q) - Phi(y, y, Q_II).

    The bracketed forms carry the factor 1/(y G_II) (and 1/(y G_II^2) for the
    squared term) with G_II = 1 - 2 rho_0^k (1 - e^-y).
    """
    if x is None:
        x = float(pt.x)
    b = build_matrices(k, d, y, x=x)
    A = aux_matrices(k, d, y, x=x)
    zeta, nu, tau = spec.zeta, spec.nu, spec.tau
    br = (d - 1) * (k - 1)
    G2 = 1.0 - 2.0 * ((1 - x) / 2) ** k * (-math.expm1(-y))
    M = (A.Pi - y * zeta * A.Gamma) / nu - zeta * A.Xi
    quad = (b.Bhat @ tau) @ (M @ ((br * b.B - np.eye(9)) @ tau))
    lin = np.ones(9) @ (A.P @ ((A.Pi - y * zeta * A.Gamma / nu) @ tau))
    return (d * (k - 1) / 2 * quad / G2 - d * (k - 1) * (d * k - d - k) / 2 * lin ** 2 / G2 ** 2) / y


def leading_coefficient(k, d, y, pt=None, x=None):
    """zeta^5 coefficient of the expansion along tau = zeta^2 xi.

    Equals -(d(k-1)/2)/(y G_II) * [y (Bhat xi, Gamma (Đ B - I) xi) + (Bhat xi, Xi (Đ B - I) xi)].
    """
    if x is None:
        x = float(pt.x)
    b = build_matrices(k, d, y, x=x)
    A = aux_matrices(k, d, y, x=x)
    br = (d - 1) * (k - 1)
    G2 = 1.0 - 2.0 * ((1 - x) / 2) ** k * (-math.expm1(-y))
    xi = b.xi
    v = (br * b.B - np.eye(9)) @ xi
    u = b.Bhat @ xi
    return -(d * (k - 1) / 2) / (y * G2) * (y * (u @ (A.Gamma @ v)) + u @ (A.Xi @ v))


@dataclass
class PerturbResult:
    k: int
    d: float
    y: float
    zeta: float
    phi_base: float
    phi_perturbed: float
    expansion: float
    branch_lambda: float

    @property
    def delta_phi(self):
        return self.phi_perturbed - self.phi_base

    @property
    def residual(self):
        return self.delta_phi - self.expansion


def perturb(k, d, y, zeta, pt=None, **sp_kw):
    """Direct 2RSB value at the perturbed Q against the expansion."""
    if pt is None:
        pt = sp_solve(k, d=d, y=y, **sp_kw)
    x = float(pt.x)
    spec = perturbation_from_xi(k, d, y, zeta, x=x)
    base = phi_2rsb(y, y, q_ii(spec.rho), k, d)
    pert = phi_2rsb(spec.y1, spec.y2, perturbed_q(spec), k, d)
    exp_ = delta_phi_expansion(k, d, y, spec=spec, x=x)
    return PerturbResult(k, d, y, zeta, base, pert, exp_, build_matrices(k, d, y, x=x).branch_lambda)


# ---------------------------------------------------------------- instability

@dataclass
class InstabilityPoint:
    k: int
    alpha: float
    y_star: float
    branch_lambda: float
    coefficient: float

    @property
    def delta_phi_sign(self):
        return int(np.sign(self.coefficient))


def instability_point(k, alpha, **kw):
    from .gardner import gardner_point
    row, r, b = gardner_point(k, alpha, **kw)
    coef = leading_coefficient(k, k * alpha, r.y_star, x=r.value.x)
    return InstabilityPoint(k, alpha, r.y_star, row.branch_lambda, coef)


def instability_test(k, alpha, **kw):
    """(Đ lambda, sign of the leading Delta Phi term) at the root y*(alpha)."""
    p = instability_point(k, alpha, **kw)
    return p.branch_lambda, p.delta_phi_sign


@dataclass
class InstabilityScan:
    k: int
    alpha_lambda: float       # Đ lambda = 1 crossing
    alpha_sign: float         # leading Delta Phi coefficient changes sign

    @property
    def rel_diff(self):
        return abs(self.alpha_sign - self.alpha_lambda) / self.alpha_lambda


def instability_scan(k, alphas=None, rtol=1e-6, **kw):
    """Locate the Đ lambda = 1 crossing and, independently, the sign flip of Delta Phi.

    Both are bisected on the last grid interval where the respective function
    changes sign.
    """
    from .gardner import alpha_grid
    alphas = alpha_grid(k) if alphas is None else np.asarray(alphas, dtype=float)
    g_lam, g_coef = [], []
    for a in alphas:
        try:
            p = instability_point(k, a, **kw)
            g_lam.append(p.branch_lambda - 1.0)
            g_coef.append(p.coefficient)
        except NonConvergence:
            g_lam.append(math.nan)
            g_coef.append(math.nan)

    def last_crossing(g, fun):
        g = np.asarray(g)
        hit = None
        for i in range(len(g) - 1):
            if np.isfinite(g[i]) and np.isfinite(g[i + 1]) and (g[i] > 0) != (g[i + 1] > 0):
                hit = i
        if hit is None:
            return None
        return bisect_crossing(fun, alphas[hit], alphas[hit + 1], g[hit], rtol)

    a_lam = last_crossing(g_lam, lambda a: instability_point(k, a, **kw).branch_lambda - 1.0)
    a_sig = last_crossing(g_coef, lambda a: instability_point(k, a, **kw).coefficient)
    return InstabilityScan(k, a_lam, a_sig)
