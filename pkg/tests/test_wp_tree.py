import numpy as np
import pytest
from hypothesis import given, strategies as st

from naesat_rsb.errors import InvalidInput
from naesat_rsb.instance import Instance, ModelParams, generate, make_rng
from naesat_rsb.wp_tree import (F, BoundaryTree, WarningConfig, bethe_energy, frozen_spins,
                                is_near_frozen, phi_clause, phi_edge, phi_var, random_tree,
                                tree_energy, tree_energy_bruteforce, tree_energy_formula,
                                tree_wp, wp_clause, wp_sweep, wp_var, xor)

warn = st.sampled_from([0, 1, F])


def test_wp_clause_cases():
    assert wp_clause([(0, 1), (0, 1)], 0) == 0
    assert wp_clause([(0, 0), (0, 0)], 0) == 1
    assert wp_clause([(0, 0), (0, F)], 0) == F
    assert wp_clause([(0, 0), (0, 1)], 0) == F
    assert wp_clause([], 0) == F


def test_wp_var_cases():
    assert wp_var([0, 0, 1]) == 0
    assert wp_var([0, 1, F]) == F
    assert wp_var([]) == F


def test_penalties():
    assert phi_var([0, 1, 1, F]) == 1
    assert phi_edge(F, 0) == 0
    assert phi_edge(0, 1) == 1 and phi_edge(1, 1) == 0
    assert phi_clause([1, 1, 1]) == 1 and phi_clause([1, F, 1]) == 0


@given(st.lists(warn, max_size=8), st.randoms())
def test_wp_var_permutation_invariant(ws, rnd):
    perm = list(ws)
    rnd.shuffle(perm)
    assert wp_var(ws) == wp_var(perm)


@given(st.lists(st.tuples(st.integers(0, 1), warn), max_size=6), st.integers(0, 1), st.randoms())
def test_wp_clause_permutation_and_flip(inputs, lit, rnd):
    perm = list(inputs)
    rnd.shuffle(perm)
    assert wp_clause(inputs, lit) == wp_clause(perm, lit)
    out = wp_clause(inputs, lit)
    # flipping every literal (output included) leaves the warning unchanged
    assert wp_clause([(1 - l, w) for l, w in inputs], 1 - lit) == out
    # flipping every incoming warning flips a frozen output
    flipped = wp_clause([(l, w if w == F else 1 - w) for l, w in inputs], lit)
    assert flipped == (out if out == F else 1 - out)


@given(warn, warn)
def test_phi_edge_vanishes_on_free(a, b):
    if F in (a, b):
        assert phi_edge(a, b) == 0
    assert phi_edge(a, b) == int(xor(a, b) == 1)


def one_clause_tree(bvals, lits=(0, 0, 0)):
    edges = [(i, 0, l) for i, l in enumerate(lits)]
    return BoundaryTree(3, 1, edges, dict(enumerate(bvals)))


def test_single_clause_trees():
    t = one_clause_tree((1, 1, 1))
    assert tree_energy(t) == tree_energy(t, "bruteforce") == 1
    t = one_clause_tree((0, 1, 1))
    assert tree_energy(t) == tree_energy(t, "bruteforce") == 0


def test_path_tree_all_zero():
    # leaf - c0 - v1 - c1 - leaf, all literals 0, both boundary warnings 0
    edges = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (2, 1, 0)]
    t = BoundaryTree(3, 2, edges, {0: 0, 3: 0})
    wdot, what = tree_wp(t)
    # each clause pushes v1 away from its frozen neighbour, and v1 forwards that
    assert list(what[[1, 2]]) == [1, 1]
    assert list(wdot[[1, 2]]) == [1, 1]
    assert tree_energy_formula(t) == tree_energy_bruteforce(t) == 0


def test_tree_validation():
    with pytest.raises(InvalidInput):
        one_clause_tree((0, 1, F))
    with pytest.raises(InvalidInput):
        BoundaryTree(2, 1, [(0, 0, 0), (1, 0, 0)], {0: 0})
    with pytest.raises(InvalidInput):
        BoundaryTree(2, 2, [(0, 0, 0), (1, 1, 0)], {0: 0, 1: 0})


def test_tree_json_roundtrip(tmp_path):
    t = random_tree(make_rng(3), max_nodes=15)
    f = tmp_path / "t.json"
    t.save(f)
    back = BoundaryTree.load(f)
    assert back.boundary == t.boundary and (back.edges == t.edges).all()


@given(st.integers(0, 2**63))
def test_tree_formula_matches_bruteforce(seed):
    t = random_tree(make_rng(seed), max_nodes=20)
    assert t.n_var + t.n_clause <= 20
    assert tree_energy_formula(t) == tree_energy_bruteforce(t)


@given(st.integers(0, 2**63))
def test_tree_energy_flip_symmetry(seed):
    t = random_tree(make_rng(seed), max_nodes=14)
    e = t.edges.copy()
    e[:, 2] ^= 1
    flipped = BoundaryTree(t.n_var, t.n_clause, e, {k: 1 - v for k, v in t.boundary.items()})
    assert tree_energy_formula(flipped) == tree_energy_formula(t)


def test_all_free_config_has_zero_energy():
    inst = generate(ModelParams(3, 2, 6), 4)
    E = inst.n_edges
    wc = WarningConfig(inst, np.full(E, F), np.full(E, F))
    assert bethe_energy(inst, wc) == 0
    assert (frozen_spins(inst, wc.what) == F).all()
    assert not is_near_frozen(inst, wc)


def test_invalid_config_names_edge():
    inst = generate(ModelParams(3, 2, 6), 4)
    E = inst.n_edges
    wdot = np.full(E, F)
    wdot[0] = 0
    with pytest.raises(InvalidInput, match="edge 0"):
        WarningConfig(inst, wdot, np.full(E, F))


def test_bethe_energy_hand_instance():
    # two clauses sharing variable 0; the other four variables are leaves
    edges = [(0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 1, 0), (3, 1, 0), (4, 1, 0)]
    t = BoundaryTree(5, 2, edges, {1: 0, 2: 0, 4: 0, 5: 0})
    assert tree_energy_formula(t) == tree_energy_bruteforce(t) == 0
    # the clauses now push variable 0 in opposite directions
    t = BoundaryTree(5, 2, edges, {1: 0, 2: 0, 4: 1, 5: 1})
    assert tree_energy_formula(t) == tree_energy_bruteforce(t) == 1


def _wp_fixed_point(inst, rng, sweeps=60):
    x = rng.integers(0, 2, inst.params.N)
    wdot = x[inst.edge_var].astype(np.int8)
    what = np.full(inst.n_edges, F, dtype=np.int8)
    for _ in range(sweeps):
        nd, nh = wp_sweep(inst, wdot, what)
        if (nd == wdot).all() and (nh == what).all():
            return wdot, what
        wdot, what = nd, nh
    return None


def _flip(a):
    return np.where(a == F, F, 1 - a)


def _check_flip(inst, wdot, what):
    wc = WarningConfig(inst, wdot, what)
    wf = WarningConfig(inst, _flip(wc.wdot), _flip(wc.what))
    assert bethe_energy(inst, wf) == bethe_energy(inst, wc)
    assert (_flip(frozen_spins(inst, wc.what)) == frozen_spins(inst, wf.what)).all()
    return wc


def test_frozen_two_clause_instance():
    # two copies of the clause (x0, x1): NAE forces x0 != x1
    inst = Instance(ModelParams(2, 2, 2), [0, 1, 0, 1], [0, 0, 1, 1], [0, 0, 0, 0])
    w = np.array([0, 1, 0, 1])
    wc = _check_flip(inst, w, w)
    assert list(frozen_spins(inst, wc.what)) == [0, 1]
    assert bethe_energy(inst, wc) == 0 and is_near_frozen(inst, wc)
    with pytest.raises(InvalidInput, match="clause relation fails at edge 0"):
        WarningConfig(inst, np.array([0, 0, 0, 1]), w)


def test_wp_fixed_points_flip_symmetry():
    rng = make_rng(5)
    found = 0
    for _ in range(40):
        inst = generate(ModelParams(3, 4, 9), int(rng.integers(2**32)))
        fp = _wp_fixed_point(inst, rng)
        if fp is not None:
            _check_flip(inst, *fp)
            found += 1
    assert found > 0
