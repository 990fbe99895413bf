"""Warning propagation, local penalties, and energies of warning configurations.

Warnings take values 0, 1 and F (free), encoded as the integers 0, 1, 2.
XOR with a literal leaves F unchanged.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ResourceLimit

F = 2
_NAMES = {0: "0", 1: "1", F: "f"}
TREE_CAP = 1 << 22


def xor(lit, w):
    return F if w == F else lit ^ w


def wp_var(inputs):
    """Majority of the non-free clause warnings; F on a tie (including no input)."""
    n0 = n1 = 0
    for w in inputs:
        if w == 0:
            n0 += 1
        elif w == 1:
            n1 += 1
    if n0 > n1:
        return 0
    if n1 > n0:
        return 1
    return F


def wp_clause(inputs, out_literal=0):
    """Clause-to-variable warning.

    ``inputs`` holds (literal, variable warning) pairs for the other edges
    of the clause. If every literal value ``L_g ^ w_g`` equals ``L_e ^ 1`` the
    variable is pushed to 0 (so that its literal value differs), if every one
    equals ``L_e`` it is pushed to 1, and otherwise it is free.
    """
    vals = {xor(l, w) for l, w in inputs}
    if len(vals) != 1 or F in vals:
        return F
    (v,) = vals
    return 0 if v == out_literal ^ 1 else 1


def phi_var(inputs):
    """min(#0, #1) over incoming clause warnings."""
    inputs = list(inputs)
    return min(inputs.count(0), inputs.count(1))


def phi_clause(values):
    """1 if the literal-adjusted warnings are all equal and frozen, else 0."""
    vals = set(values)
    return int(len(vals) == 1 and F not in vals)


def phi_edge(wdot, what):
    return int(wdot != F and what != F and wdot != what)


def format_warning(w):
    return _NAMES[int(w)]


# ---------------------------------------------------------------- configs on instances

def frozen_spins(inst, what):
    """The spin warning of every variable: majority over all d incoming clause warnings."""
    return np.array([wp_var(what[inst.var_adj[v]]) for v in range(inst.params.N)], dtype=np.int8)


class WarningConfig:
    """Per-edge warning pairs on an instance, checked for validity on construction."""

    def __init__(self, inst, wdot, what):
        self.inst = inst
        self.wdot = np.asarray(wdot, dtype=np.int8).copy()
        self.what = np.asarray(what, dtype=np.int8).copy()
        E = inst.n_edges
        if self.wdot.shape != (E,) or self.what.shape != (E,):
            raise InvalidInput(f"warning arrays must have length {E}")
        if not (np.isin(self.wdot, (0, 1, F)).all() and np.isin(self.what, (0, 1, F)).all()):
            raise InvalidInput("warnings must be 0, 1 or f")
        bad = first_violation(inst, self.wdot, self.what)
        if bad is not None:
            e, which = bad
            raise InvalidInput(f"invalid warning configuration: {which} relation fails at edge {e}")
        self.wdot.flags.writeable = False
        self.what.flags.writeable = False


def wp_sweep(inst, wdot, what):
    """One parallel application of both relations; returns updated (wdot, what)."""
    lit = inst.edge_lit
    new_wdot = np.empty_like(wdot)
    new_what = np.empty_like(what)
    for v in range(inst.params.N):
        es = inst.var_adj[v]
        for e in es:
            new_wdot[e] = wp_var(what[g] for g in es if g != e)
    for a in range(inst.params.M):
        es = inst.clause_adj[a]
        for e in es:
            new_what[e] = wp_clause([(lit[g], wdot[g]) for g in es if g != e], lit[e])
    return new_wdot, new_what


def first_violation(inst, wdot, what):
    new_wdot, new_what = wp_sweep(inst, wdot, what)
    for e in range(inst.n_edges):
        if new_wdot[e] != wdot[e]:
            return e, "variable"
        if new_what[e] != what[e]:
            return e, "clause"
    return None


def bethe_energy(inst, wc):
    """Sum of variable and clause penalties minus edge penalties over the whole graph."""
    if not isinstance(wc, WarningConfig):
        wc = WarningConfig(inst, *wc)
    lit = inst.edge_lit
    tot = sum(phi_var(wc.what[inst.var_adj[v]]) for v in range(inst.params.N))
    tot += sum(phi_clause(xor(lit[e], wc.wdot[e]) for e in inst.clause_adj[a])
               for a in range(inst.params.M))
    tot -= sum(phi_edge(wc.wdot[e], wc.what[e]) for e in range(inst.n_edges))
    return int(tot)


def is_near_frozen(inst, wc):
    """At most N/k^2 free spins."""
    y = frozen_spins(inst, wc.what)
    return int((y == F).sum()) <= inst.params.N / inst.params.k ** 2


# ---------------------------------------------------------------- boundary trees

@dataclass
class BoundaryTree:
    """Bipartite tree with variable leaves carrying frozen incoming warnings.

    ``edges`` rows are (variable, clause, literal); ``boundary`` maps each
    leaf edge index to its frozen variable-to-clause warning.
    """
    n_var: int
    n_clause: int
    edges: np.ndarray
    boundary: dict

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 3)
        self.boundary = {int(e): int(w) for e, w in self.boundary.items()}
        nv, nc, E = self.n_var, self.n_clause, len(self.edges)
        if nc < 1 or E != nv + nc - 1:
            raise InvalidInput("not a tree: need |E| = |V| + |F| - 1 and at least one clause")
        v, a, l = self.edges.T
        if v.min() < 0 or v.max() >= nv or a.min() < 0 or a.max() >= nc or not np.isin(l, (0, 1)).all():
            raise InvalidInput("edge endpoint or literal out of range")
        self.var_edges = [list(np.flatnonzero(v == i)) for i in range(nv)]
        self.clause_edges = [list(np.flatnonzero(a == j)) for j in range(nc)]
        if any(len(es) == 0 for es in self.var_edges + self.clause_edges):
            raise InvalidInput("isolated vertex")
        if any(len(es) < 2 for es in self.clause_edges):
            raise InvalidInput("leaves must be variables (clause of degree 1)")
        # connectivity (with the edge count this makes it a tree)
        seen_v, seen_c, stack = {0}, set(), [("v", 0)]
        while stack:
            kind, i = stack.pop()
            for e in (self.var_edges[i] if kind == "v" else self.clause_edges[i]):
                if kind == "v" and a[e] not in seen_c:
                    seen_c.add(int(a[e]))
                    stack.append(("c", int(a[e])))
                elif kind == "c" and v[e] not in seen_v:
                    seen_v.add(int(v[e]))
                    stack.append(("v", int(v[e])))
        if len(seen_v) != nv or len(seen_c) != nc:
            raise InvalidInput("not connected")
        self.leaf_edges = sorted(es[0] for es in self.var_edges if len(es) == 1)
        if set(self.boundary) != set(self.leaf_edges):
            raise InvalidInput("boundary warnings must be given on exactly the leaf edges")
        if any(w not in (0, 1) for w in self.boundary.values()):
            raise InvalidInput("boundary warnings must be frozen (0 or 1)")

    @property
    def internal_vars(self):
        return [i for i, es in enumerate(self.var_edges) if len(es) > 1]

    def to_json(self):
        return {
            "k": max(len(es) for es in self.clause_edges),
            "d": max(len(es) for es in self.var_edges),
            "n": self.n_var, "m": self.n_clause,
            "edges": self.edges.tolist(),
            "boundary": [[e, str(w)] for e, w in sorted(self.boundary.items())],
        }

    @classmethod
    def from_json(cls, obj):
        try:
            bd = {int(e): int(w) for e, w in obj["boundary"]}
            return cls(int(obj["n"]), int(obj["m"]), obj["edges"], bd)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInput):
                raise
            raise InvalidInput(f"malformed tree JSON: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def tree_wp(tree):
    """The unique valid warning pair on every edge of a boundary tree."""
    v_of, a_of, lit = tree.edges.T
    E = len(tree.edges)
    wdot = [None] * E
    what = [None] * E

    def get_wdot(e):
        if wdot[e] is None:
            if e in tree.boundary:
                wdot[e] = tree.boundary[e]
            else:
                wdot[e] = wp_var(get_what(g) for g in tree.var_edges[v_of[e]] if g != e)
        return wdot[e]

    def get_what(e):
        if what[e] is None:
            others = [(lit[g], get_wdot(g)) for g in tree.clause_edges[a_of[e]] if g != e]
            what[e] = wp_clause(others, lit[e])
        return what[e]

    for e in range(E):
        get_wdot(e)
        get_what(e)
    return np.array(wdot, dtype=np.int8), np.array(what, dtype=np.int8)


def tree_energy_formula(tree):
    wdot, what = tree_wp(tree)
    lit = tree.edges[:, 2]
    tot = sum(phi_var(what[tree.var_edges[v]]) for v in tree.internal_vars)
    tot += sum(phi_clause(xor(lit[e], wdot[e]) for e in es) for es in tree.clause_edges)
    tot -= sum(phi_edge(wdot[e], what[e]) for e in range(len(lit)) if e not in tree.boundary)
    return int(tot)


def tree_energy_bruteforce(tree, cap=TREE_CAP):
    """Minimum violated-clause count with leaf variables pinned to their warnings."""
    internal = tree.internal_vars
    if 2 ** len(internal) > cap:
        raise ResourceLimit(f"2^{len(internal)} internal assignments exceed cap {cap}")
    v_of, a_of, lit = tree.edges.T
    x = np.zeros(tree.n_var, dtype=np.int64)
    for e, w in tree.boundary.items():
        x[v_of[e]] = w
    cadj = [np.array(es) for es in tree.clause_edges]
    best = None
    for bits in itertools.product((0, 1), repeat=len(internal)):
        x[internal] = bits
        vals = lit ^ x[v_of]
        H = 0
        for es in cadj:
            s = vals[es].sum()
            H += int(s == 0 or s == len(es))
        best = H if best is None else min(best, H)
    return best


def tree_energy(tree, method="formula"):
    if method == "formula":
        return tree_energy_formula(tree)
    if method == "bruteforce":
        return tree_energy_bruteforce(tree)
    raise InvalidInput(f"unknown method {method!r}")


def random_tree(rng, max_nodes=20, max_var_children=3, max_clause_children=3):
    """Random boundary tree with at most ``max_nodes`` vertices, rooted at variable 0."""
    edges = []
    n_var, n_clause = 1, 0
    queue = [("v", 0, True)]
    while queue:
        kind, i, is_root = queue.pop(0)
        # every queued clause still needs one child variable
        pending = sum(1 for q in queue if q[0] == "c")
        budget = max_nodes - n_var - n_clause - pending - (kind == "c")
        if kind == "v":
            if budget < 2:
                continue
            lo = 1 if is_root else 0
            nch = int(rng.integers(lo, max_var_children + 1))
            nch = min(nch, budget // 2)
            for _ in range(nch):
                edges.append((i, n_clause, int(rng.integers(0, 2))))
                queue.append(("c", n_clause, False))
                n_clause += 1
        else:
            nch = 1 + min(int(rng.integers(0, max_clause_children)), budget)
            for _ in range(nch):
                edges.append((n_var, i, int(rng.integers(0, 2))))
                queue.append(("v", n_var, False))
                n_var += 1
    edges = np.array(edges, dtype=np.int64)
    deg = np.bincount(edges[:, 0], minlength=n_var)
    boundary = {int(np.flatnonzero(edges[:, 0] == v)[0]): int(rng.integers(0, 2))
                for v in range(n_var) if deg[v] == 1}
    return BoundaryTree(n_var, n_clause, edges, boundary)
