"""Independent brute-force reference implementations.

Everything here evaluates objectives straight from their defining formulas
(explicit LCA lookups, triple sums, exhaustive enumeration) and shares no
evaluation code with the fast O(nk) paths, so any disagreement localizes a
bug rather than a shared assumption.  All limits are desk-scale on purpose.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dendrogram import Dendrogram, TreeAssembler, leaf_tree, random_binary_tree
from .errors import InvalidParamError, NonBinaryTreeError, TooLargeError
from .measures import Measure, pairwise_matrix
from .validation import check_square_matrix


@dataclass
class ExhaustiveLimit:
    """Size caps for the exhaustive oracles."""

    max_n_trees: int = 8
    max_n_sat: int = 20


def _pair_lca_sizes(tree: Dendrogram) -> np.ndarray:
    """|LCA(i, j)| for every leaf pair via explicit ancestor walks."""
    n = tree.n_leaves
    parents = tree.parents
    depth = np.zeros(tree.n_nodes, dtype=np.int64)
    order = [tree.root]
    for node in order:
        for c in tree.children_of(node):
            depth[c] = depth[node] + 1
            order.append(c)
    out = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = i, j
            while a != b:
                if depth[a] >= depth[b]:
                    a = parents[a]
                else:
                    b = parents[b]
            out[i, j] = out[j, i] = tree.sizes[a]
    return out


def eval_matrix_direct(tree: Dendrogram, weights, objective_kind: str) -> float:
    """Formula-literal objective value from an explicit weight matrix."""
    W = check_square_matrix(weights)
    n = tree.n_leaves
    if W.shape[0] != n:
        raise InvalidParamError("matrix size must match the leaf count")
    lca = _pair_lca_sizes(tree)
    terms = []
    for i in range(n):
        for j in range(i + 1, n):
            if objective_kind in ("dasgupta", "ckmm"):
                terms.append(W[i, j] * lca[i, j])
            elif objective_kind == "mw":
                terms.append(W[i, j] * (n - lca[i, j]))
            else:
                raise InvalidParamError(f"unsupported kind {objective_kind!r}")
    return math.fsum(terms)


def eval_pairwise_direct(tree: Dendrogram, measure: Measure, dataset,
                         objective_kind: str, *, max_n: int = 2000) -> float:
    """Direct evaluation from closed-form pairwise measure values.

    The correctness anchor for the fast evaluators: materializes all C(n, 2)
    weights with the exact closed forms and walks explicit LCAs.
    """
    points = getattr(dataset, "points", dataset)
    n = np.asarray(points).shape[0]
    if n > max_n:
        raise TooLargeError(f"n={n} exceeds the quadratic-memory cap {max_n}")
    return eval_matrix_direct(tree, pairwise_matrix(measure, points), objective_kind)


def _min_pair_of_triple(lca: np.ndarray, i: int, j: int, k: int) -> tuple:
    sides = [(lca[i, j], (i, j), k), (lca[i, k], (i, k), j), (lca[j, k], (j, k), i)]
    sides.sort(key=lambda t: t[0])
    # In a binary tree exactly one pair separates last, so the minimum is
    # strict; anything else indicates a broken tree.
    assert sides[0][0] < sides[1][0], "ambiguous min-LCA pair in a binary tree"
    return sides[0][1], sides[0][2]


def eval_mw_triples(tree: Dendrogram, weights, *, max_n: int = 200) -> float:
    """Triple-form MW value: sum over triples of the closest pair's weight."""
    W = check_square_matrix(weights)
    n = tree.n_leaves
    if n > max_n:
        raise TooLargeError(f"n={n} exceeds the O(n^3) cap {max_n}")
    if tree.arity != "binary":
        raise NonBinaryTreeError("triple oracle needs a binary tree")
    if n < 3:
        return 0.0
    lca = _pair_lca_sizes(tree)
    terms = []
    for i, j, k in itertools.combinations(range(n), 3):
        (a, b), _ = _min_pair_of_triple(lca, i, j, k)
        terms.append(W[a, b])
    return math.fsum(terms)


def eval_dasgupta_triples(tree: Dendrogram, weights, *, max_n: int = 200) -> float:
    """Triple-form Dasgupta value: the two far pairs of every triple, plus
    2 * sum of all pair weights."""
    W = check_square_matrix(weights)
    n = tree.n_leaves
    if n > max_n:
        raise TooLargeError(f"n={n} exceeds the O(n^3) cap {max_n}")
    if tree.arity != "binary":
        raise NonBinaryTreeError("triple oracle needs a binary tree")
    terms = []
    if n >= 3:
        lca = _pair_lca_sizes(tree)
        for i, j, k in itertools.combinations(range(n), 3):
            (a, b), far = _min_pair_of_triple(lca, i, j, k)
            terms.append(W[a, far] + W[b, far])
    pair_total = math.fsum(W[i, j] for i in range(n) for j in range(i + 1, n))
    return math.fsum(terms) + 2.0 * pair_total


def count_binary_trees(n: int) -> int:
    """(2n-3)!! labeled binary tree shapes on n leaves."""
    if n < 1:
        raise InvalidParamError("n must be >= 1")
    out = 1
    for v in range(2 * n - 3, 1, -2):
        out *= v
    return out


def enumerate_binary_trees(n: int):
    """Yield every labeled binary tree shape on leaves 0..n-1 exactly once.

    Canonical recursion: the block containing the smallest remaining leaf is
    always the first child, so mirrored children are never double counted.
    """
    if n < 1:
        raise InvalidParamError("n must be >= 1")

    def shapes(leaves: tuple):
        if len(leaves) == 1:
            yield leaves[0]
            return
        first, rest = leaves[0], leaves[1:]
        m = len(rest)
        for mask in range(2 ** m - 1):  # complement must stay non-empty
            left = (first,) + tuple(rest[t] for t in range(m) if mask >> t & 1)
            right = tuple(rest[t] for t in range(m) if not mask >> t & 1)
            for a in shapes(left):
                for b in shapes(right):
                    yield (a, b)

    for shape in shapes(tuple(range(n))):
        if n == 1:
            yield leaf_tree()
            continue
        asm = TreeAssembler(n)

        def build(node) -> int:
            if isinstance(node, int):
                return node
            return asm.join(build(node[0]), build(node[1]))

        yield asm.build(build(shape))


def exhaustive_tree_opt(weights, objective_kind: str,
                        limit: ExhaustiveLimit | None = None) -> tuple[Dendrogram, float]:
    """Exact optimum of an objective over all (2n-3)!! binary trees.

    Realized as a subset DP over the canonical bipartition recursion (the
    block holding the smallest leaf anchors each split), with memoization on
    leaf subsets; this visits each unordered shape's value exactly once and
    is property-tested against literal enumeration at small n.
    """
    W = check_square_matrix(weights)
    n = W.shape[0]
    lim = limit or ExhaustiveLimit()
    if n > lim.max_n_trees:
        raise TooLargeError(f"n={n} exceeds max_n_trees={lim.max_n_trees}")
    if objective_kind not in ("dasgupta", "mw", "ckmm", "mw_plus", "ckmm_plus"):
        raise InvalidParamError(f"unknown objective kind {objective_kind!r}")
    kind = {"mw_plus": "mw", "ckmm_plus": "ckmm"}.get(objective_kind, objective_kind)
    if n == 1:
        return leaf_tree(), 0.0
    rows = W.tolist()
    full = 1 << n
    inpair = [0.0] * full
    for mask in range(1, full):
        lsb = mask & -mask
        i = lsb.bit_length() - 1
        rest = mask ^ lsb
        s = inpair[rest]
        mm = rest
        row = rows[i]
        while mm:
            b = mm & -mm
            s += row[b.bit_length() - 1]
            mm ^= b
        inpair[mask] = s
    popcount = [bin(m).count("1") for m in range(full)]
    maximize = kind in ("mw", "ckmm")
    dp = [0.0] * full
    choice = [0] * full
    masks = sorted(range(1, full), key=lambda m: popcount[m])
    for mask in masks:
        if popcount[mask] < 2:
            continue
        lsb = mask & -mask
        rest = mask ^ lsb
        coef = popcount[mask] if kind in ("ckmm", "dasgupta") else n - popcount[mask]
        best = None
        best_sub = 0
        sub = rest
        while True:
            part = lsb | sub
            if part != mask:
                other = mask ^ part
                cross = inpair[mask] - inpair[part] - inpair[other]
                val = coef * cross + dp[part] + dp[other]
                if best is None or (val > best if maximize else val < best):
                    best = val
                    best_sub = part
            if sub == 0:
                break
            sub = (sub - 1) & rest
        dp[mask] = best
        choice[mask] = best_sub
    asm = TreeAssembler(n)

    def rebuild(mask: int) -> int:
        if popcount[mask] == 1:
            return mask.bit_length() - 1
        part = choice[mask]
        return asm.join(rebuild(part), rebuild(mask ^ part))

    root = rebuild(full - 1)
    return asm.build(root), dp[full - 1]


def exhaustive_balanced_max2sat(distances, limit: ExhaustiveLimit | None = None
                                ) -> tuple[np.ndarray, float]:
    """Exact optimum over all C(n, ceil(n/2)) balanced subsets S.

    The objective (total weight of pairs touching S) equals D - d(V \\ S), so
    the scan minimizes the internal weight of the complement.
    """
    D = check_square_matrix(distances)
    n = D.shape[0]
    lim = limit or ExhaustiveLimit()
    if n > lim.max_n_sat:
        raise TooLargeError(f"n={n} exceeds max_n_sat={lim.max_n_sat}")
    total = math.fsum(D[i, j] for i in range(n) for j in range(i + 1, n))
    if n == 1:
        return np.array([0], dtype=np.intp), 0.0
    rows = D.tolist()
    best_t: tuple = tuple(range(n // 2))
    best_internal = None
    for T in itertools.combinations(range(n), n // 2):
        s = 0.0
        for a_idx in range(len(T)):
            row = rows[T[a_idx]]
            for b_idx in range(a_idx + 1, len(T)):
                s += row[T[b_idx]]
        if best_internal is None or s < best_internal:
            best_internal = s
            best_t = T
    S = np.setdiff1d(np.arange(n), np.array(best_t, dtype=np.intp))
    return S.astype(np.intp), total - float(best_internal)


def monte_carlo_random_tree(weights, objective_kind: str, samples: int,
                            seed: int) -> tuple[float, float]:
    """Sample mean and standard error of Q over random binary trees."""
    if samples < 1:
        raise InvalidParamError("samples must be >= 1")
    W = check_square_matrix(weights)
    n = W.shape[0]
    rng_seeds = np.random.SeedSequence(seed).spawn(samples)
    values = np.empty(samples)
    for s in range(samples):
        tree = random_binary_tree(n, rng_seeds[s])
        values[s] = eval_matrix_direct(tree, W, objective_kind)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return mean, stderr
