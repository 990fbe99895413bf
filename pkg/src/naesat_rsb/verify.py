"""Exact-identity and oracle checks across all modules.

Each check returns a list of (inputs, observed error) failures. ``run``
collects them into a report; the CLI ``verify`` exits nonzero on any failure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

# test hook: names of quantities to corrupt before checking
FAULTS = set()
_CHECKS = []


@dataclass
class Failure:
    module: str
    identity: str
    inputs: str
    error: float

    def __str__(self):
        return f"FAIL [{self.module}] {self.identity} at {self.inputs}: error {self.error:.3g}"


def check(module, identity):
    def deco(fn):
        _CHECKS.append((module, identity, fn))
        return fn
    return deco


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


W_GRID = (0.01, 0.1, 0.3, 0.6, 0.9)
Y_GRID = (0.1, 0.5, 1.0, 3.0, 8.0)


@check("sp_core", "A_l Q_l = G_l S_l")
def _aq_gs():
    from .sp_core import kernel_table
    out = []
    for w in W_GRID:
        for y in Y_GRID:
            t = kernel_table(200, w, y, full=True)
            S = t.S * (1.0 + 1e-6) if "S_ell" in FAULTS else t.S
            lhs, rhs = t.A * t.Q, t.G * S
            m = (lhs > 1e-290) | (rhs > 1e-290)
            if m.any():
                err = float(np.max(np.abs(lhs[m] - rhs[m]) / np.maximum(lhs[m], rhs[m])))
                if err > 1e-12:
                    out.append((f"w={w}, y={y}", err))
    return out


@check("sp_core", "P recurrences")
def _p_rec():
    from .sp_core import pqs_arrays
    out = []
    for y in Y_GRID:
        P, Q, S, _ = pqs_arrays(200, y)
        p = 1.0 / (1.0 + math.exp(y))
        ell = np.arange(201)
        # oracle: P_l = Pr[Bin(l, p) < l/2]
        Po = binom.cdf(np.ceil(ell / 2) - 1, ell, p)
        err = float(np.max(np.abs(P - Po) / np.maximum(Po, 1e-300)))
        odd = ell[1::2]
        e1 = np.max(np.abs(Po[odd] - Po[odd - 1] - (1 - p) * Q[odd - 1]))
        ev = ell[2::2]
        e2 = np.max(np.abs(Po[ev] - Po[ev - 1] + 0.5 * Q[ev]))
        err = max(err, float(e1), float(e2))
        if err > 1e-12:
            out.append((f"y={y}", err))
    return out


@check("onersb", "hfz = efz at w = w(x)")
def _hfz_efz():
    from .onersb import log_efz, log_hfz
    from .sp_core import clause_update
    out = []
    for k in (3, 6, 10):
        for x in np.linspace(0.0, 0.95, 8):
            for y in Y_GRID:
                a, b = log_hfz(x, y, k), log_efz(x, clause_update(x, k), y)
                err = abs(a - b) / max(abs(a), 1e-300)
                if err > 1e-12:
                    out.append((f"k={k}, x={x}, y={y}", err))
    return out


@check("onersb", "dfz(w)/Zdot(w) = 1 - w(1 - x~(w))(1 - AM)")
def _ratio():
    from .onersb import log_dfz
    from .sp_core import energy_params, log_zdot, var_update
    out = []
    for d in (3, 10, 50, 200):
        for w, y in zip((0.02, 0.2, 0.5, 0.8, 0.95), (0.3, 1.0, 2.0, 5.0, 12.0)):
            _, AM, _ = energy_params(y)
            lhs = math.exp(log_dfz(w, y, d) - log_zdot(w, y, d - 1))
            rhs = 1.0 - w * (1.0 - var_update(w, y, d)) * (1.0 - AM)
            if _rel(lhs, rhs) > 1e-12:
                out.append((f"d={d}, w={w}, y={y}", _rel(lhs, rhs)))
    return out


@check("sp_core", "gamma/2 <= Gamma <= gamma")
def _gamma_band():
    from .sp_core import Gamma_of_y, gamma_of_y
    out = []
    for c in (0.5, 1.5, 10.0):
        for y in np.linspace(0.0, 20.0, 81):
            g, G = gamma_of_y(y, c), Gamma_of_y(y, c)
            if not (g / 2 - 1e-15 <= G <= g + 1e-15):
                out.append((f"c={c}, y={y}", G - g))
    return out


@check("onersb", "F(x, w, 0) = 0")
def _f_zero():
    from .onersb import free_energy
    out = []
    for x in np.linspace(0.0, 0.9, 10):
        for w in np.linspace(0.0, 0.9, 10):
            F = free_energy(8, 50, 0.0, x, w)
            if abs(F) > 1e-12:
                out.append((f"x={x}, w={w}", abs(F)))
    return out


@check("onersb", "stationarity of F at the fixed point")
def _stationary():
    from .onersb import free_energy_partials
    from .sp_core import sp_solve
    out = []
    for k, d, y in ((8, 700, 1.0), (10, 3000, 0.8)):
        pt = sp_solve(k, d=d, y=y)
        fx, fw = free_energy_partials(k, d, y, pt.x, pt.w)
        if max(abs(fx), abs(fw)) > 1e-10:
            out.append((f"k={k}, d={d}, y={y}", max(abs(fx), abs(fw))))
    return out


@check("wp_tree", "tree formula = brute-force minimum")
def _trees():
    from .instance import make_rng
    from .wp_tree import random_tree, tree_energy_bruteforce, tree_energy_formula
    rng = make_rng(7)
    out = []
    for i in range(30):
        t = random_tree(rng, max_nodes=16)
        a, b = tree_energy_formula(t), tree_energy_bruteforce(t)
        if a != b:
            out.append((f"tree {i}", abs(a - b)))
    return out


@check("instance", "Gray-code ground state = direct minimum")
def _gray():
    from .instance import ModelParams, exact_ground_state, generate, hamiltonian
    out = []
    p = ModelParams(3, 3, 9)
    for seed in range(3):
        inst = generate(p, seed)
        xs = (np.arange(2 ** 9)[:, None] >> np.arange(9)) & 1
        H = np.array([hamiltonian(inst, x) for x in xs])
        E, cnt = exact_ground_state(inst)
        if E != H.min() or cnt != int((H == H.min()).sum()):
            out.append((f"seed={seed}", abs(E - H.min())))
    return out


@check("firstmoment", "e_lbd <= e_1rsb")
def _ordering():
    from .firstmoment import e_lbd
    from .onersb import solve_ystar
    from .sp_core import alpha_of_c
    out = []
    for c in (1.5, 5.0):
        a = alpha_of_c(c, 10)
        el, e1 = e_lbd(a, 10), solve_ystar(10, d=10 * a, min_dual=False).e_onersb
        if el > e1:
            out.append((f"k=10, c={c}", el - e1))
    return out


@check("gardner", "closed-form B = enumeration")
def _brute():
    from .gardner import brute_force_B, build_matrices
    from .sp_core import clause_update, var_update
    out = []
    for d, y, x in ((4, 0.7, 0.3), (5, 1.3, 0.2)):
        xo = var_update(clause_update(x, 3), y, d)
        B = build_matrices(3, d, y, x=x, x_out=xo).B[:7, :7]
        F = brute_force_B(3, d, y, x=x)[:7, :7]
        m = F != 0
        err = float(np.max(np.abs(F - B)[m] / np.abs(F)[m]))
        if err > 1e-10 or ((B != 0) != m).any():
            out.append((f"k=3, d={d}, y={y}, x={x}", err))
    return out


@check("gardner", "eigenpair and Zdot identities")
def _eigen():
    from .gardner import build_matrices, eigen_lambda
    from .sp_core import log_zdot, sp_solve
    out = []
    for k, d, y in ((3, 8, 2.0), (8, 700, 1.0)):
        pt = sp_solve(k, d=d, y=y, tol=1e-15)
        b = build_matrices(k, d, y, pt)
        res = float(np.max(np.abs(b.B @ b.xi - b.lam * b.xi)) / np.max(np.abs(b.xi)))
        errs = [res, _rel(b.lam, eigen_lambda(b.B4)), _rel(b.lam, eigen_lambda(b.B_neq)),
                _rel(b.log_Zdot, log_zdot(pt.w, y, d - 1))]
        if max(errs) > 1e-10:
            out.append((f"k={k}, d={d}, y={y}", max(errs)))
    return out


@check("tworsb", "Phi(y, y, Q_II) = F(y)/y")
def _q_ii():
    from .onersb import free_energy
    from .sp_core import clause_update
    from .tworsb import phi_2rsb, q_ii
    out = []
    for k, d, y, x in ((3, 4, 0.8, 0.3), (3, 8, 2.0, 0.1), (4, 3, 1.5, 0.25)):
        rho = [(1 - x) / 2, (1 - x) / 2, x]
        err = _rel(phi_2rsb(y, y, q_ii(rho), k, d), free_energy(k, d, y, x, clause_update(x, k)) / y)
        if err > 1e-10:
            out.append((f"k={k}, d={d}, y={y}, x={x}", err))
    return out


@check("tworsb", "auxiliary-matrix identities")
def _aux():
    from .gardner import build_matrices
    from .sp_core import clause_update, sp_solve
    from .tworsb import aux_matrices
    out = []
    k, d, y = 3, 8, 2.0
    pt = sp_solve(k, d=d, y=y, tol=1e-15)
    x, w = float(pt.x), clause_update(float(pt.x), k)
    A, b = aux_matrices(k, d, y, x=x), build_matrices(k, d, y, x=x)
    g = math.exp(-y / 2)
    u = b.Bhat @ b.xi
    sym = [np.max(np.abs(M.T @ b.Bhat - b.Bhat.T @ M)) for M in (A.Pi, A.Xi, A.Gamma)]
    errs = sym + [np.max(np.abs(A.Pi @ b.xi)), np.max(np.abs(A.P @ A.Gamma @ A.P)),
            np.max(np.abs(A.P @ (A.Pi - A.Xi))), np.max(np.abs((A.Pi - A.Xi) @ A.P)),
            _rel(u @ (A.Gamma @ b.xi), (1 - g) * g * (1 - x) * x * x * w),
            _rel(u @ (A.Xi @ b.xi), (1 - g) * (1 - g * g) * (1 - x) * x * x * w)]
    if max(errs) > 1e-12:
        out.append((f"k={k}, d={d}, y={y}", float(max(errs))))
    return out


def registry():
    return list(_CHECKS)


def run(filter=None, faults=()):
    """Run all checks (or those of one module); returns the list of failures."""
    FAULTS.clear()
    FAULTS.update(faults)
    failures, ran = [], []
    try:
        for module, identity, fn in _CHECKS:
            if filter and module != filter:
                continue
            ran.append((module, identity))
            for inputs, err in fn():
                failures.append(Failure(module, identity, inputs, err))
    finally:
        FAULTS.clear()
    return ran, failures
