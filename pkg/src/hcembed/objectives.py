"""Fast evaluators for the hierarchical clustering objectives.

All evaluators aggregate in a single bottom-up pass: at every internal node
the total weight of cross pairs between the two child subtrees is an inner
product of accumulated feature-map row sums, so the whole evaluation is
O(nk) instead of O(n^2).  Per-node contributions are combined with
compensated summation (math.fsum).

Objective conventions (w = similarity, d = distance, |LCA| = subtree size):

* dasgupta:  sum w_ij |LCA|            (minimize)
* mw:        sum w_ij (n - |LCA|)      (maximize);  dasgupta + mw = n sum(w)
* ckmm:      sum d_ij |LCA|            (maximize, binary trees)
* mw_plus / ckmm_plus: n-ary extensions that score every triple sharing its
  LCA at a node with three distinct children as a random binarization;
  they coincide with mw / ckmm on binary trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dendrogram import Dendrogram, lca_sizes_accumulate
from .errors import (
    DimensionMismatchError,
    InvalidParamError,
    MissingLabelsError,
)
from .measures import DISTANCE, SIMILARITY, FeatureMaps

MAX_KINDS = ("mw", "ckmm", "mw_plus", "ckmm_plus")
ALL_KINDS = ("dasgupta",) + MAX_KINDS

_ORIENTATION_OF = {
    "dasgupta": SIMILARITY,
    "mw": SIMILARITY,
    "mw_plus": SIMILARITY,
    "ckmm": DISTANCE,
    "ckmm_plus": DISTANCE,
}


def _check(tree: Dendrogram, maps: FeatureMaps, kind: str):
    if kind not in ALL_KINDS:
        raise InvalidParamError(f"unknown objective kind {kind!r}")
    if tree.n_leaves != maps.n:
        raise DimensionMismatchError(
            f"tree has {tree.n_leaves} leaves, maps cover {maps.n} points")
    maps.require(_ORIENTATION_OF[kind], what=f"objective {kind!r}")


def _cross_fold(tree: Dendrogram, maps: FeatureMaps, node_term) -> float:
    phi, psi = maps.phi, maps.psi
    if maps.symmetric:
        return lca_sizes_accumulate(
            tree,
            leaf_state=lambda i: phi[i],
            merge_state=lambda a, b: a + b,
            cross_pair_sum=lambda a, b: float(a @ b),
            node_term=node_term,
        )
    return lca_sizes_accumulate(
        tree,
        leaf_state=lambda i: (phi[i], psi[i]),
        merge_state=lambda a, b: (a[0] + b[0], a[1] + b[1]),
        cross_pair_sum=lambda a, b: 0.5 * (float(a[0] @ b[1]) + float(b[0] @ a[1])),
        node_term=node_term,
    )


def eval_dasgupta(tree: Dendrogram, maps: FeatureMaps) -> float:
    _check(tree, maps, "dasgupta")
    return _cross_fold(tree, maps, lambda size, c: size * c)


def eval_mw(tree: Dendrogram, maps: FeatureMaps) -> float:
    _check(tree, maps, "mw")
    n = tree.n_leaves
    return _cross_fold(tree, maps, lambda size, c: (n - size) * c)


def eval_ckmm(tree: Dendrogram, maps: FeatureMaps) -> float:
    _check(tree, maps, "ckmm")
    return _cross_fold(tree, maps, lambda size, c: size * c)


def _eval_plus(tree: Dendrogram, maps: FeatureMaps, coefficient) -> float:
    """Shared n-ary evaluator.

    At a node C with children c_a != c_b, every cross pair (i, j) in
    c_a x c_b contributes coefficient(|C|, |c_a| + |c_b|) * w_ij; coefficients
    fold in the random-binarization value of triples with three distinct
    children under C.
    """
    phi, psi = maps.phi, maps.psi
    n = tree.n_leaves
    if n == 1:
        return 0.0
    sum_phi: dict[int, np.ndarray] = {}
    sum_psi = sum_phi if maps.symmetric else {}
    terms = []
    for node in tree.internal_topo():
        kids = tree.children_of(node)
        phis = [sum_phi.pop(c) if c >= n else phi[c] for c in kids]
        psis = phis if maps.symmetric else [sum_psi.pop(c) if c >= n else psi[c] for c in kids]
        size = int(tree.sizes[node])
        kid_sizes = [int(tree.sizes[c]) for c in kids]
        for a in range(len(kids)):
            for b in range(a + 1, len(kids)):
                w_ab = float(phis[a] @ psis[b])
                if not maps.symmetric:
                    w_ab = 0.5 * (w_ab + float(phis[b] @ psis[a]))
                terms.append(coefficient(n, size, kid_sizes[a] + kid_sizes[b]) * w_ab)
        sum_phi[node] = np.sum(phis, axis=0)
        if not maps.symmetric:
            sum_psi[node] = np.sum(psis, axis=0)
    return math.fsum(terms)


def eval_mw_plus(tree: Dendrogram, maps: FeatureMaps) -> float:
    _check(tree, maps, "mw_plus")
    return _eval_plus(tree, maps,
                      lambda n, size, pair: (n - size) + (size - pair) / 3.0)


def eval_ckmm_plus(tree: Dendrogram, maps: FeatureMaps) -> float:
    _check(tree, maps, "ckmm_plus")
    return _eval_plus(tree, maps,
                      lambda n, size, pair: pair + 2.0 * (size - pair) / 3.0)


# -- upper bounds and the random-tree baseline -------------------------------


def _triple_terms(W: np.ndarray, combine) -> float:
    n = W.shape[0]
    if n < 3:
        return 0.0
    terms = []
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            rest = slice(j + 1, n)
            terms.append(float(np.sum(combine(W[i, j], W[i, rest], W[j, rest]))))
    return math.fsum(terms)


def mw_upper_bound(maps: FeatureMaps) -> float:
    """Q_M^ub = sum over triples of max(w_ij, w_ik, w_jk)."""
    maps.require(SIMILARITY, what="mw_upper_bound")
    W = maps.materialize()
    return _triple_terms(W, lambda wij, wik, wjk: np.maximum(wij, np.maximum(wik, wjk)))


def ckmm_upper_bound(maps: FeatureMaps) -> float:
    """Q_C^ub = sum over triples of the max pairwise-sum, plus 2 sum(d)."""
    maps.require(DISTANCE, what="ckmm_upper_bound")
    W = maps.materialize()
    triples = _triple_terms(
        W, lambda dij, dik, djk: np.maximum(dij + dik, np.maximum(dik + djk, dij + djk)))
    return triples + 2.0 * maps.pair_sum()


def random_tree_expectation(maps: FeatureMaps, objective_kind: str) -> float:
    """Closed-form E[Q(T_R)] over random binary trees; no sampling.

    Every pair of a triple is equally likely to separate first, so each of
    the n-2 outside leaves sits under a pair's LCA with probability 2/3:
    E|LCA| = 2 + 2(n-2)/3, which yields the formulas below.
    """
    if objective_kind not in ALL_KINDS:
        raise InvalidParamError(f"unknown objective kind {objective_kind!r}")
    n = maps.n
    total = maps.pair_sum()
    if objective_kind in ("mw", "mw_plus"):
        return 0.0 if n < 3 else (n - 2) / 3.0 * total
    if objective_kind in ("ckmm", "ckmm_plus"):
        return 0.0 if n < 2 else (2.0 * (n - 2) / 3.0 + 2.0) * total
    e_mw = 0.0 if n < 3 else (n - 2) / 3.0 * total
    return n * total - e_mw


def upper_bound(maps: FeatureMaps, objective_kind: str) -> float:
    """OPT-side bound: upper bound for max objectives, lower bound for dasgupta."""
    if objective_kind in ("mw", "mw_plus"):
        return mw_upper_bound(maps)
    if objective_kind in ("ckmm", "ckmm_plus"):
        return ckmm_upper_bound(maps)
    if objective_kind == "dasgupta":
        return maps.n * maps.pair_sum() - mw_upper_bound(maps)
    raise InvalidParamError(f"unknown objective kind {objective_kind!r}")


def normalize(q_value: float, q_upper: float, q_random: float) -> tuple[float, bool]:
    """Normalized score (q - E[random]) / (q_upper - E[random]).

    Returns (value, degenerate).  A non-positive denominator (possible for
    tiny n, e.g. MW at n = 2) is signalled via the flag, not an exception.
    """
    denom = q_upper - q_random
    if denom <= 0.0:
        return 0.0, True
    return (q_value - q_random) / denom, False


def dendrogram_purity(tree: Dendrogram, labels) -> float:
    """Dendrogram purity over ordered same-class leaf pairs (diagonal included),
    normalized by sum |C_i|^2; the value lies in (0, 1]."""
    if labels is None:
        raise MissingLabelsError("dendrogram purity needs ground-truth labels")
    labels = np.asarray(labels)
    n = tree.n_leaves
    if labels.shape != (n,):
        raise MissingLabelsError(f"need one label per leaf, got shape {labels.shape}")
    _, dense = np.unique(labels, return_inverse=True)
    n_classes = int(dense.max()) + 1
    class_sizes = np.bincount(dense, minlength=n_classes).astype(np.float64)
    counts: dict[int, np.ndarray] = {}
    terms = [float(n)]  # diagonal pairs: LCA of (e, e) is the leaf itself
    for node in tree.internal_topo():
        kid_counts = []
        for c in tree.children_of(node):
            if c < n:
                vec = np.zeros(n_classes)
                vec[dense[c]] = 1.0
            else:
                vec = counts.pop(c)
            kid_counts.append(vec)
        total = np.sum(kid_counts, axis=0)
        cross = total * total - np.sum([v * v for v in kid_counts], axis=0)
        size = float(tree.sizes[node])
        terms.append(float(cross @ (total / size)))
        counts[node] = total
    return math.fsum(terms) / float(class_sizes @ class_sizes)


@dataclass
class ObjectiveReport:
    """Raw objective value, bounds, and normalized scores for one tree.

    For the minimization objective (dasgupta) ``q_upper`` holds the OPT-side
    *lower* bound n*sum(w) - Q_M^ub, ``alpha`` is bound/value, and
    ``alpha_star`` measures advantage over the random tree toward that bound;
    it coincides with the MW alpha_star on the same instance.
    """

    objective_kind: str
    n: int
    q_value: float
    q_upper: float
    q_random_expected: float
    alpha: float
    alpha_star: float
    degenerate: bool
    measure: dict = field(default_factory=dict)
    dendrogram_purity: float | None = None

    def to_dict(self) -> dict:
        out = {
            "objective_kind": self.objective_kind,
            "n": self.n,
            "q_value": self.q_value,
            "q_upper": self.q_upper,
            "q_random_expected": self.q_random_expected,
            "alpha": self.alpha,
            "alpha_star": self.alpha_star,
            "degenerate": self.degenerate,
            "measure": self.measure,
        }
        if self.dendrogram_purity is not None:
            out["dendrogram_purity"] = self.dendrogram_purity
        return out


_EVALUATORS = {
    "dasgupta": eval_dasgupta,
    "mw": eval_mw,
    "ckmm": eval_ckmm,
    "mw_plus": eval_mw_plus,
    "ckmm_plus": eval_ckmm_plus,
}


def evaluate_tree(tree: Dendrogram, maps: FeatureMaps, objective_kind: str,
                  labels=None, *, bound: float | None = None,
                  expectation: float | None = None) -> ObjectiveReport:
    """Evaluate one tree into a full ObjectiveReport.

    ``bound``/``expectation`` may be passed in to reuse cached values when
    scoring many trees on the same instance.
    """
    q = _EVALUATORS[objective_kind](tree, maps)
    ub = upper_bound(maps, objective_kind) if bound is None else bound
    rand = (random_tree_expectation(maps, objective_kind)
            if expectation is None else expectation)
    if objective_kind == "dasgupta":
        alpha = ub / q if q > 0 else 0.0
        alpha_star, degenerate = normalize(-q, -ub, -rand)
        degenerate = degenerate or q <= 0
    else:
        alpha = q / ub if ub > 0 else 0.0
        alpha_star, degenerate = normalize(q, ub, rand)
        degenerate = degenerate or ub <= 0
    measure_info = {"orientation": maps.orientation, "exact": maps.exact}
    if maps.measure is not None:
        measure_info["kind"] = maps.measure.kind
        if maps.measure.kind == "rbf":
            measure_info["gamma"] = maps.measure.gamma
            measure_info["rbf_features"] = maps.measure.rbf_features
    purity = None
    if labels is not None:
        purity = dendrogram_purity(tree, labels)
    return ObjectiveReport(
        objective_kind=objective_kind, n=tree.n_leaves, q_value=float(q),
        q_upper=float(ub), q_random_expected=float(rand), alpha=float(alpha),
        alpha_star=float(alpha_star), degenerate=bool(degenerate),
        measure=measure_info, dendrogram_purity=purity)
