"""Random d-regular k-NAE-SAT instances and exact ground states.

Instances come from the configuration model: variable half-edges, in fixed
order, are matched to a uniformly shuffled list of clause half-edges, and each
edge carries an independent uniform literal bit. Clause ``a`` is violated by an
assignment ``x`` when the bits ``L_e ^ x[v(e)]`` over its k edges are all
equal.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._accel import njit, use_numba
from .errors import InvalidInput, ResourceLimit

DEFAULT_CAP = 28
LN2 = math.log(2.0)


@dataclass(frozen=True)
class ModelParams:
    k: int
    d: int
    N: int
    M: int = field(init=False)
    alpha_exact: Fraction = field(init=False)

    def __post_init__(self):
        k, d, N = self.k, self.d, self.N
        for name, val, lo in (("k", k, 2), ("d", d, 1), ("N", N, 1)):
            if int(val) != val or val < lo:
                raise InvalidInput(f"{name} must be an integer >= {lo}, got {val}")
        if (N * d) % k:
            raise InvalidInput(f"N*d = {N * d} is not divisible by k = {k}; M would be fractional")
        object.__setattr__(self, "M", N * d // k)
        object.__setattr__(self, "alpha_exact", Fraction(d, k))

    @property
    def alpha(self):
        return self.d / self.k

    @property
    def c(self):
        return self.alpha / (2 ** (self.k - 1) * LN2)

    @property
    def D(self):
        return self.d * (self.k - 1)

    @property
    def branch(self):
        return (self.d - 1) * (self.k - 1)


class Instance:
    """Labelled bipartite multigraph. Arrays are read-only after construction."""

    def __init__(self, params, edge_var, edge_clause, edge_lit):
        self.params = params
        k, d, N, M = params.k, params.d, params.N, params.M
        self.edge_var = np.asarray(edge_var, dtype=np.int64)
        self.edge_clause = np.asarray(edge_clause, dtype=np.int64)
        self.edge_lit = np.asarray(edge_lit, dtype=np.int8)
        E = N * d
        if not (self.edge_var.shape == self.edge_clause.shape == self.edge_lit.shape == (E,)):
            raise InvalidInput(f"expected {E} edges")
        if E and (self.edge_var.min() < 0 or self.edge_var.max() >= N
                  or self.edge_clause.min() < 0 or self.edge_clause.max() >= M):
            raise InvalidInput("edge endpoint out of range")
        if not np.isin(self.edge_lit, (0, 1)).all():
            raise InvalidInput("literals must be 0 or 1")
        vcount = np.bincount(self.edge_var, minlength=N)
        ccount = np.bincount(self.edge_clause, minlength=M)
        if (vcount != d).any() or (ccount != k).any():
            raise InvalidInput("instance is not (d, k)-biregular")
        # stable sort keeps generation order inside each adjacency list
        self.var_adj = np.argsort(self.edge_var, kind="stable").reshape(N, d)
        self.clause_adj = np.argsort(self.edge_clause, kind="stable").reshape(M, k)
        for arr in (self.edge_var, self.edge_clause, self.edge_lit, self.var_adj, self.clause_adj):
            arr.flags.writeable = False

    @property
    def n_edges(self):
        return self.edge_var.size

    def has_repeated_variable(self):
        """True if some clause touches one variable through two or more edges."""
        vs = np.sort(self.edge_var[self.clause_adj], axis=1)
        return bool((np.diff(vs, axis=1) == 0).any())

    def to_json(self):
        p = self.params
        edges = [[int(v), int(a), int(l)] for v, a, l in
                 zip(self.edge_var, self.edge_clause, self.edge_lit)]
        return {"k": p.k, "d": p.d, "n": p.N, "m": p.M, "edges": edges}

    @classmethod
    def from_json(cls, obj):
        try:
            params = ModelParams(int(obj["k"]), int(obj["d"]), int(obj["n"]))
            if "m" in obj and int(obj["m"]) != params.M:
                raise InvalidInput(f"m = {obj['m']} inconsistent with n*d/k = {params.M}")
            e = np.asarray(obj["edges"], dtype=np.int64).reshape(-1, 3)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInput):
                raise
            raise InvalidInput(f"malformed instance JSON: {exc}") from exc
        return cls(params, e[:, 0], e[:, 1], e[:, 2])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def make_rng(seed):
    """Philox (counter based) generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed) % 2**64)))


def trial_seed(seed, trial):
    """Child seed for Monte Carlo trial ``trial``: SeedSequence(seed, spawn_key=(trial,))."""
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=(int(trial),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate(params, seed):
    """Sample an instance from the configuration model.

    Variable half-edge ``i`` belongs to variable ``i // d``; a shuffled
    clause half-edge ``perm[i]`` belongs to clause ``perm[i] // k``.
    """
    if (params.N * params.d) != params.M * params.k:
        raise InvalidInput("N*d != M*k")
    rng = make_rng(seed)
    E = params.N * params.d
    perm = rng.permutation(E)
    lit = rng.integers(0, 2, size=E)
    return Instance(params, np.arange(E) // params.d, perm // params.k, lit)


def hamiltonian(inst, x):
    """Number of violated clauses under assignment ``x``."""
    x = np.asarray(x)
    if x.shape != (inst.params.N,):
        raise InvalidInput(f"assignment length {x.size} != N = {inst.params.N}")
    vals = inst.edge_lit ^ x[inst.edge_var].astype(np.int8)
    s = vals[inst.clause_adj].sum(axis=1)
    return int(((s == 0) | (s == inst.params.k)).sum())


@njit(cache=True, nogil=True)
def _gray_min_numba(var_adj, edge_clause, edge_lit, n_clause, k):
    N, d = var_adj.shape
    cnt = np.zeros(n_clause, dtype=np.int64)
    for e in range(edge_clause.size):
        cnt[edge_clause[e]] += edge_lit[e]
    H = 0
    for a in range(n_clause):
        if cnt[a] == 0 or cnt[a] == k:
            H += 1
    x = np.zeros(N, dtype=np.int64)
    best = H
    nbest = 1
    # the last variable stays 0; complements cover the other half
    for i in range(1, 1 << (N - 1)):
        v = 0
        while not (i >> v) & 1:
            v += 1
        for j in range(d):
            e = var_adj[v, j]
            a = edge_clause[e]
            c = cnt[a]
            if c == 0 or c == k:
                H -= 1
            if edge_lit[e] ^ x[v]:
                c -= 1
            else:
                c += 1
            cnt[a] = c
            if c == 0 or c == k:
                H += 1
        x[v] ^= 1
        if H < best:
            best = H
            nbest = 1
        elif H == best:
            nbest += 1
    return best, 2 * nbest


def _gray_min_numpy(var_adj, edge_clause, edge_lit, n_clause, k, chunk=1 << 16):
    N = var_adj.shape[0]
    E = edge_clause.size
    edge_var = np.empty(E, dtype=np.int64)
    for v in range(N):
        edge_var[var_adj[v]] = v
    clause_adj = np.argsort(edge_clause, kind="stable").reshape(n_clause, k)
    cv = edge_var[clause_adj]
    cl = edge_lit[clause_adj].astype(np.int64)
    best, nbest = None, 0
    total = 1 << (N - 1)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        bits = (idx[:, None] >> np.arange(N)) & 1
        s = (bits[:, cv] ^ cl).sum(axis=2)
        H = ((s == 0) | (s == k)).sum(axis=1)
        m = H.min()
        if best is None or m < best:
            best, nbest = int(m), int((H == m).sum())
        elif m == best:
            nbest += int((H == m).sum())
    return best, 2 * nbest


def exact_ground_state(inst, cap=DEFAULT_CAP):
    """Exhaustive minimum of the Hamiltonian and the number of minimizers.

    Walks a Gray code over assignments with the last variable fixed to 0
    and doubles the minimizer count using the global-flip symmetry.
    """
    N = inst.params.N
    if N > cap:
        raise ResourceLimit(f"N = {N} exceeds the enumeration cap {cap}")
    args = (np.ascontiguousarray(inst.var_adj), np.ascontiguousarray(inst.edge_clause),
            np.ascontiguousarray(inst.edge_lit, dtype=np.int64), inst.params.M, inst.params.k)
    if use_numba():
        E, cnt = _gray_min_numba(*args)
    else:
        E, cnt = _gray_min_numpy(*args)
    return int(E), int(cnt)


@dataclass(frozen=True)
class EminSummary:
    k: int
    d: int
    n: int
    trials: int
    mean: float
    std: float
    min: float
    max: float
    values: tuple = ()

    @property
    def stderr(self):
        return self.std / math.sqrt(self.trials)


def sample_emin_stats(params, trials, seed, cap=DEFAULT_CAP, threads=1):
    """Exact e_min = E_min/N over ``trials`` independent instances.

    Trial ``t`` uses ``generate(params, trial_seed(seed, t))`` so results do
    not depend on ``threads``. ``std`` is the sample standard deviation.
    """
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    if params.N > cap:
        raise ResourceLimit(f"N = {params.N} exceeds the enumeration cap {cap}")

    def one(t):
        return exact_ground_state(generate(params, trial_seed(seed, t)), cap)[0] / params.N

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = np.array(list(pool.map(one, range(trials))))
    else:
        vals = np.array([one(t) for t in range(trials)])
    std = float(vals.std(ddof=1)) if trials > 1 else 0.0
    return EminSummary(params.k, params.d, params.N, trials, float(vals.mean()), std,
                       float(vals.min()), float(vals.max()), tuple(float(v) for v in vals))
