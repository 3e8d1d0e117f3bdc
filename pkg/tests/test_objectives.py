import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcembed import (
    DISTANCE,
    SIMILARITY,
    Dendrogram,
    TreeAssembler,
    ckmm_upper_bound,
    dendrogram_purity,
    eval_ckmm,
    eval_ckmm_plus,
    eval_dasgupta,
    eval_mw,
    eval_mw_plus,
    evaluate_tree,
    mw_upper_bound,
    normalize,
    random_binary_tree,
    random_tree_expectation,
    star_tree,
)
from hcembed import oracle
from hcembed.errors import MeasureMismatchError, MissingLabelsError, NonBinaryTreeError

from conftest import brute_lca_node, matrix_maps, random_weight_matrix

# n=3 reference instance (0-indexed): w01=3, w02=1, w12=2 and the tree ((0,1),2)
W3 = np.array([[0, 3, 1], [3, 0, 2], [1, 2, 0]], float)
D3 = np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0]], float)


def tree3():
    asm = TreeAssembler(3)
    return asm.build(asm.join(asm.join(0, 1), 2))


def test_mw_hand_value():
    assert eval_mw(tree3(), matrix_maps(W3, SIMILARITY)) == pytest.approx(3.0)


def test_dasgupta_hand_value():
    assert eval_dasgupta(tree3(), matrix_maps(W3, SIMILARITY)) == pytest.approx(15.0)


def test_ckmm_hand_value():
    assert eval_ckmm(tree3(), matrix_maps(D3, DISTANCE)) == pytest.approx(17.0)


def test_complement_identity_hand_value():
    maps = matrix_maps(W3, SIMILARITY)
    t = tree3()
    assert eval_dasgupta(t, maps) + eval_mw(t, maps) == pytest.approx(3 * 6.0)


def test_zero_weights_give_zero():
    maps = matrix_maps(np.zeros((4, 4)), SIMILARITY)
    t = random_binary_tree(4, 0)
    assert eval_mw(t, maps) == 0.0
    assert eval_dasgupta(t, maps) == 0.0


def test_measure_mismatch_rejected():
    with pytest.raises(MeasureMismatchError):
        eval_mw(tree3(), matrix_maps(W3, DISTANCE))
    with pytest.raises(MeasureMismatchError):
        eval_ckmm(tree3(), matrix_maps(D3, SIMILARITY))


def test_nary_rejected_by_binary_evaluators():
    with pytest.raises(NonBinaryTreeError):
        eval_mw(star_tree(4), matrix_maps(np.zeros((4, 4)), SIMILARITY))


def test_mw_upper_bound_hand_value():
    assert mw_upper_bound(matrix_maps(W3, SIMILARITY)) == pytest.approx(3.0)


def test_ckmm_upper_bound_hand_value():
    assert ckmm_upper_bound(matrix_maps(D3, DISTANCE)) == pytest.approx(17.0)


def test_upper_bounds_n2():
    w = np.array([[0.0, 0.7], [0.7, 0.0]])
    assert mw_upper_bound(matrix_maps(w, SIMILARITY)) == 0.0
    assert ckmm_upper_bound(matrix_maps(w, DISTANCE)) == pytest.approx(1.4)


def test_random_tree_expectation_hand_values():
    maps = matrix_maps(W3, SIMILARITY)
    assert random_tree_expectation(maps, "mw") == pytest.approx(2.0)
    assert random_tree_expectation(maps, "dasgupta") == pytest.approx(3 * 6.0 - 2.0)
    dmaps = matrix_maps(D3, DISTANCE)
    assert random_tree_expectation(dmaps, "ckmm") == pytest.approx((2 / 3 + 2) * 6.0)


def test_random_tree_expectation_n2():
    w = np.array([[0.0, 0.4], [0.4, 0.0]])
    assert random_tree_expectation(matrix_maps(w, SIMILARITY), "mw") == 0.0
    assert random_tree_expectation(matrix_maps(w, DISTANCE), "ckmm") == pytest.approx(0.8)


def test_random_tree_expectation_scales_linearly(rng):
    W = random_weight_matrix(rng, 7)
    base = random_tree_expectation(matrix_maps(W, SIMILARITY), "mw")
    scaled = random_tree_expectation(matrix_maps(3.5 * W, SIMILARITY), "mw")
    assert scaled == pytest.approx(3.5 * base, rel=1e-12)


def test_expectation_matches_monte_carlo(rng):
    W = random_weight_matrix(rng, 8)
    mean, stderr = oracle.monte_carlo_random_tree(W, "ckmm", 4000, seed=11)
    closed = random_tree_expectation(matrix_maps(W, DISTANCE), "ckmm")
    assert abs(mean - closed) <= 3 * stderr + 1e-9


def test_normalize_trivial_points():
    assert normalize(5.0, 10.0, 5.0) == (0.0, False)
    assert normalize(10.0, 10.0, 5.0) == (1.0, False)
    value, degenerate = normalize(3.0, 3.0, 3.0)
    assert value == 0.0 and degenerate


def test_normalize_hand_value():
    maps = matrix_maps(W3, SIMILARITY)
    q = eval_mw(tree3(), maps)
    ub = mw_upper_bound(maps)
    rand = random_tree_expectation(maps, "mw")
    value, degenerate = normalize(q, ub, rand)
    assert value == pytest.approx(1.0) and not degenerate


def test_report_degenerate_mw_n2():
    w = np.array([[0.0, 0.4], [0.4, 0.0]])
    t = random_binary_tree(2, 0)
    report = evaluate_tree(t, matrix_maps(w, SIMILARITY), "mw")
    assert report.degenerate and report.alpha_star == 0.0


def test_report_dasgupta_normalization_matches_mw(rng):
    # Q_D = n sum(w) - Q_M makes the two normalized scores coincide.
    W = random_weight_matrix(rng, 9)
    maps = matrix_maps(W, SIMILARITY)
    t = random_binary_tree(9, 5)
    r_mw = evaluate_tree(t, maps, "mw")
    r_d = evaluate_tree(t, maps, "dasgupta")
    assert r_d.alpha_star == pytest.approx(r_mw.alpha_star, rel=1e-9)
    assert 0.0 <= r_d.alpha <= 1.0 + 1e-12


def test_leaf_relabeling_equivariance(rng):
    n = 8
    W = random_weight_matrix(rng, n)
    t = random_binary_tree(n, 3)
    perm = rng.permutation(n)
    # relabel points and leaves identically: new point i is old point perm[i]
    W2 = W[np.ix_(perm, perm)]
    inv = np.empty(n, dtype=int)
    inv[perm] = np.arange(n)
    children2 = [tuple(int(inv[c]) if c < n else c for c in ch) for ch in t.children]
    t2 = Dendrogram(n_leaves=n, children=children2, root=t.root)
    maps, maps2 = matrix_maps(W, SIMILARITY), matrix_maps(W2, SIMILARITY)
    assert eval_mw(t2, maps2) == pytest.approx(eval_mw(t, maps), rel=1e-9)
    assert eval_dasgupta(t2, maps2) == pytest.approx(eval_dasgupta(t, maps), rel=1e-9)


@given(st.integers(min_value=2, max_value=10), st.integers(min_value=0, max_value=10**6))
@settings(max_examples=30, deadline=None)
def test_complement_identity_property(n, seed):
    rng = np.random.default_rng(seed)
    W = random_weight_matrix(rng, n)
    maps = matrix_maps(W, SIMILARITY)
    t = random_binary_tree(n, seed)
    total = W[np.triu_indices(n, 1)].sum()
    lhs = eval_dasgupta(t, maps) + eval_mw(t, maps)
    assert lhs == pytest.approx(n * total, rel=1e-9, abs=1e-9)


# -- non-binary extensions ----------------------------------------------------


def plus_brute_force(tree, W, kind):
    """Literal triple-by-triple evaluation of the non-binary extensions."""
    n = tree.n_leaves
    iu = np.triu_indices(n, 1)
    total = 0.0
    if kind == "ckmm_plus":
        total += 2.0 * W[iu].sum()
    sizes = {}
    for i, j, k in itertools.combinations(range(n), 3):
        s_ij = tree.sizes[brute_lca_node(tree, i, j)]
        s_ik = tree.sizes[brute_lca_node(tree, i, k)]
        s_jk = tree.sizes[brute_lca_node(tree, j, k)]
        trio = sorted([(s_ij, (i, j), k), (s_ik, (i, k), j), (s_jk, (j, k), i)])
        if trio[0][0] == trio[2][0]:  # all three leaves split at one node
            s = W[i, j] + W[i, k] + W[j, k]
            total += s / 3.0 if kind == "mw_plus" else 2.0 * s / 3.0
        else:
            (a, b), far = trio[0][1], trio[0][2]
            if kind == "mw_plus":
                total += W[a, b]
            else:
                total += W[a, far] + W[b, far]
    return total


def random_nary_tree(n, seed, p=0.45):
    """Contract random internal edges of a random binary tree."""
    t = random_binary_tree(n, seed)
    if n < 3:
        return t
    rng = np.random.default_rng(seed + 1)
    contract = {v: bool(rng.random() < p) for v in range(n, t.n_nodes)}
    contract[t.root] = False
    kids = {v: [] for v in range(n, t.n_nodes) if not contract[v]}

    def survivor(v):
        while contract.get(v, False):
            v = int(t.parents[v])
        return v

    for v in range(t.n_nodes):
        if v == t.root:
            continue
        parent = survivor(int(t.parents[v]))
        if v < n or not contract[v]:
            kids[parent].append(v)
    mapping = {}
    children = []
    for v in t.internal_topo():
        if contract.get(v, False):
            continue
        mapped = tuple(mapping.get(c, c) for c in kids[v])
        mapping[v] = n + len(children)
        children.append(mapped)
    return Dendrogram(n_leaves=n, children=children, root=mapping[t.root])


def test_plus_equals_base_on_binary(rng):
    for seed in range(8):
        n = int(rng.integers(2, 12))
        W = random_weight_matrix(rng, n)
        t = random_binary_tree(n, seed)
        assert eval_mw_plus(t, matrix_maps(W, SIMILARITY)) == pytest.approx(
            eval_mw(t, matrix_maps(W, SIMILARITY)), rel=1e-9, abs=1e-9)
        assert eval_ckmm_plus(t, matrix_maps(W, DISTANCE)) == pytest.approx(
            eval_ckmm(t, matrix_maps(W, DISTANCE)), rel=1e-9, abs=1e-9)


def test_plus_star_tree_closed_forms(rng):
    n = 9
    W = random_weight_matrix(rng, n)
    star = star_tree(n)
    total = W[np.triu_indices(n, 1)].sum()
    assert eval_mw_plus(star, matrix_maps(W, SIMILARITY)) == pytest.approx(
        (n - 2) / 3 * total, rel=1e-9)
    assert eval_ckmm_plus(star, matrix_maps(W, DISTANCE)) == pytest.approx(
        (2 * (n - 2) / 3 + 2) * total, rel=1e-9)
    assert eval_mw_plus(star, matrix_maps(W, SIMILARITY)) == pytest.approx(
        random_tree_expectation(matrix_maps(W, SIMILARITY), "mw"), rel=1e-9)


def test_plus_matches_triple_brute_force_on_nary(rng):
    for seed in range(6):
        n = int(rng.integers(4, 10))
        W = random_weight_matrix(rng, n)
        t = random_nary_tree(n, seed)
        assert eval_mw_plus(t, matrix_maps(W, SIMILARITY)) == pytest.approx(
            plus_brute_force(t, W, "mw_plus"), rel=1e-9, abs=1e-9)
        assert eval_ckmm_plus(t, matrix_maps(W, DISTANCE)) == pytest.approx(
            plus_brute_force(t, W, "ckmm_plus"), rel=1e-9, abs=1e-9)


# -- dendrogram purity --------------------------------------------------------


def purity_brute_force(tree, labels):
    labels = np.asarray(labels)
    total = 0.0
    norm = 0.0
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        norm += len(members) ** 2
        for e1 in members:
            for e2 in members:
                if e1 == e2:
                    total += 1.0
                    continue
                node = brute_lca_node(tree, e1, e2)
                leaves = tree.leaves_under(node)
                inside = sum(1 for x in leaves if labels[x] == c)
                total += inside / len(leaves)
    return total / norm


def test_purity_pure_subtrees_is_one():
    asm = TreeAssembler(4)
    t = asm.build(asm.join(asm.join(0, 1), asm.join(2, 3)))
    assert dendrogram_purity(t, [0, 0, 1, 1]) == pytest.approx(1.0)


def test_purity_n2_two_classes():
    t = random_binary_tree(2, 0)
    assert dendrogram_purity(t, [0, 1]) == pytest.approx(1.0)


def test_purity_interleaved_hand_value():
    # classes {0,1} and {2,3} on ((0,2),(1,3)): diagonal terms are 1, the
    # four ordered same-class cross pairs hit the root with purity 2/4,
    # so DP = (4 + 4*(1/2)) / 8.
    asm = TreeAssembler(4)
    t = asm.build(asm.join(asm.join(0, 2), asm.join(1, 3)))
    assert dendrogram_purity(t, [0, 0, 1, 1]) == pytest.approx(0.75)


def test_purity_matches_brute_force(rng):
    for seed in range(6):
        n = int(rng.integers(2, 12))
        labels = rng.integers(0, 3, n)
        t = random_binary_tree(n, seed)
        assert dendrogram_purity(t, labels) == pytest.approx(
            purity_brute_force(t, labels), rel=1e-12)


def test_purity_on_nary(rng):
    t = star_tree(6)
    labels = np.array([0, 0, 0, 1, 1, 1])
    assert dendrogram_purity(t, labels) == pytest.approx(
        purity_brute_force(t, labels), rel=1e-12)


def test_purity_requires_labels():
    with pytest.raises(MissingLabelsError):
        dendrogram_purity(random_binary_tree(3, 0), None)


def test_purity_in_unit_interval(rng):
    for seed in range(10):
        n = int(rng.integers(1, 15))
        labels = rng.integers(0, 4, n)
        value = dendrogram_purity(random_binary_tree(n, seed), labels)
        assert 0.0 < value <= 1.0 + 1e-12
