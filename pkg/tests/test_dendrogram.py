import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcembed import (
    Dendrogram,
    TreeAssembler,
    deserialize,
    lca_sizes_accumulate,
    leaf_tree,
    path_tree,
    random_binary_tree,
    serialize,
    star_tree,
)
from hcembed import oracle
from hcembed.errors import FormatError, InvalidParamError, NonBinaryTreeError

from conftest import brute_lca_node, random_weight_matrix


def count_cross_pairs(tree):
    return lca_sizes_accumulate(
        tree,
        leaf_state=lambda i: 1,
        merge_state=lambda a, b: a + b,
        cross_pair_sum=lambda a, b: a * b,
        node_term=lambda size, cross: cross,
    )


def test_single_leaf():
    t = random_binary_tree(1, 0)
    assert t.n_leaves == 1 and t.n_nodes == 1 and t.sizes[t.root] == 1


def test_two_leaves_unique_shape():
    a = random_binary_tree(2, 0)
    b = random_binary_tree(2, 99)
    assert a == b
    assert a.sizes[a.root] == 2


def test_random_tree_structure(rng):
    for seed in range(30):
        n = int(rng.integers(1, 40))
        t = random_binary_tree(n, seed)
        assert t.n_leaves == n
        assert t.arity == "binary" or n == 1
        assert t.sizes[t.root] == n
        if n > 1:
            assert count_cross_pairs(t) == n * (n - 1) // 2


def test_random_tree_deterministic():
    assert random_binary_tree(23, 7) == random_binary_tree(23, 7)


def test_random_tree_mw_mean_matches_closed_form(rng):
    # Each pair of a triple is equally likely to separate first, so
    # E[Q_M] = (n-2)/3 * sum(w); checked by Monte Carlo at 2%.
    n = 10
    W = random_weight_matrix(rng, n)
    mean, _ = oracle.monte_carlo_random_tree(W, "mw", 10000, seed=3)
    closed = (n - 2) / 3 * W[np.triu_indices(n, 1)].sum()
    assert mean == pytest.approx(closed, rel=0.02)


def test_root_split_profile_chi_square():
    # n=4 under the resample-empty fair-coin law: P({2,2}) = 6/14,
    # P({1,3}) = 8/14.  Chi-square with 1 dof at p > 0.001 -> stat < 10.828.
    samples = 100_000
    even = 0
    for seed in range(samples):
        t = random_binary_tree(4, seed)
        left, _ = t.children_of(t.root)
        even += int(t.sizes[left] == 2)
    expected_even = samples * 6 / 14
    expected_odd = samples * 8 / 14
    stat = ((even - expected_even) ** 2 / expected_even
            + (samples - even - expected_odd) ** 2 / expected_odd)
    assert stat < 10.828


def test_path_tree_lca_sizes():
    t = path_tree([0, 1, 2])
    lca = oracle._pair_lca_sizes(t)
    assert lca[0, 1] == 3 and lca[1, 2] == 2


def test_path_tree_positional_law(rng):
    order = rng.permutation(6)
    t = path_tree(order)
    lca = oracle._pair_lca_sizes(t)
    # pair at 1-indexed positions (1, 4): |LCA| = n - 1 + 1 = 6
    assert lca[order[0], order[3]] == 6
    for p in range(6):
        for q in range(p + 1, 6):
            assert lca[order[p], order[q]] == 6 - p


def test_path_tree_two_leaves_unique():
    assert path_tree([0, 1]) == path_tree([1, 0])
    assert path_tree([0, 1]).n_nodes == 3


def test_path_tree_invalid_order():
    with pytest.raises(InvalidParamError):
        path_tree([0, 2, 2])


def test_accumulate_visits_each_internal_node():
    t = path_tree([0, 1, 2])
    seen = []
    lca_sizes_accumulate(
        t,
        leaf_state=lambda i: 1,
        merge_state=lambda a, b: a + b,
        cross_pair_sum=lambda a, b: a * b,
        node_term=lambda size, cross: seen.append(size) or 0.0,
    )
    assert sorted(seen) == [2, 3]


def test_accumulate_two_leaves():
    t = random_binary_tree(2, 0)
    sizes = []
    lca_sizes_accumulate(
        t,
        leaf_state=lambda i: 1,
        merge_state=lambda a, b: a + b,
        cross_pair_sum=lambda a, b: a * b,
        node_term=lambda size, cross: sizes.append(size) or 0.0,
    )
    assert sizes == [2]


def test_accumulate_rejects_nary():
    with pytest.raises(NonBinaryTreeError):
        count_cross_pairs(star_tree(4))


@given(st.integers(min_value=2, max_value=60), st.integers(min_value=0, max_value=10**6))
@settings(max_examples=40, deadline=None)
def test_accumulate_cross_pair_count_property(n, seed):
    t = random_binary_tree(n, seed)
    assert count_cross_pairs(t) == n * (n - 1) // 2


def test_lca_lookup_matches_accumulated_sizes(rng):
    for seed in range(5):
        n = int(rng.integers(2, 14))
        t = random_binary_tree(n, seed)
        lca = oracle._pair_lca_sizes(t)
        for i in range(n):
            for j in range(i + 1, n):
                node = brute_lca_node(t, i, j)
                assert lca[i, j] == t.sizes[node]


@pytest.mark.parametrize("n", [1, 2, 3, 8, 25, 50])
def test_serialize_roundtrip(n):
    t = random_binary_tree(n, n + 17)
    data = serialize(t)
    back = deserialize(data)
    assert back == t
    assert serialize(back) == data


def test_serialize_roundtrip_nary():
    t = star_tree(5)
    assert deserialize(serialize(t)) == t


def test_deserialize_two_roots_rejected():
    payload = {"n": 2, "leaf_count": 2, "parents": [-1, -1, -1]}
    with pytest.raises(FormatError):
        deserialize(json.dumps(payload))


def test_deserialize_leaf_as_parent_rejected():
    payload = {"n": 2, "leaf_count": 2, "parents": [1, -1, 1]}
    with pytest.raises(FormatError):
        deserialize(json.dumps(payload))


def test_deserialize_single_child_rejected():
    payload = {"n": 2, "leaf_count": 2, "parents": [2, 3, 3, -1]}
    with pytest.raises(FormatError):
        deserialize(json.dumps(payload))


def test_deserialize_garbage_rejected():
    with pytest.raises(FormatError):
        deserialize(b"not json at all")


def test_validation_rejects_duplicate_parenting():
    with pytest.raises(InvalidParamError):
        Dendrogram(n_leaves=3, children=[(0, 1), (0, 2)], root=4)


def test_validation_rejects_wrong_root_size():
    with pytest.raises(InvalidParamError):
        Dendrogram(n_leaves=3, children=[(0, 1)], root=3)


def test_assembler_builds_valid_tree():
    asm = TreeAssembler(4)
    a = asm.join(0, 1)
    b = asm.join(2, 3)
    t = asm.build(asm.join(a, b))
    assert t.sizes[t.root] == 4 and t.arity == "binary"


def test_leaf_tree():
    t = leaf_tree()
    assert t.n_leaves == 1 and t.root == 0
