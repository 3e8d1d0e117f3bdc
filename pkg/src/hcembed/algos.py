"""Hierarchical clustering algorithms.

Top-down methods (bppc, b2satc, balanced_bisection_hc) build feature maps
once and slice them per block; recursion derives a child seed from
(seed, node path) so parallel and serial runs would produce identical trees.
Bottom-up baselines (average/single/complete/ward) share one Lance-Williams
engine with a fixed lowest-id tie-break.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .dendrogram import Dendrogram, TreeAssembler, leaf_tree, path_tree, random_binary_tree
from .errors import InvalidParamError, MeasureMismatchError, TooLargeError
from .measures import (
    DISTANCE,
    FeatureMaps,
    Measure,
    build_feature_maps,
    pairwise_matrix,
)
from .objectives import eval_ckmm
from .partitioner import (
    MAXIMIZE_CUT,
    PartitionConfig,
    _auto_eta0,
    derandomized_min_internal,
    gd_partition,
    pgd_minimize,
)

ALGORITHMS = ("bppc", "b2satc", "bbhc", "avg", "single", "complete", "ward",
              "bkmeans", "randomcut", "random")

_LINKAGE_OF = {"avg": "average", "single": "single", "complete": "complete",
               "ward": "ward"}

MAX_EXHAUSTIVE_SAT = 20
_AUTO_SAT_CUTOVER = 16


@dataclass
class HcConfig:
    """Bundle of knobs shared by the CLI and the bench harness."""

    algorithm: str = "bppc"
    theta: int = 512
    partition: PartitionConfig = field(default_factory=lambda: PartitionConfig(delta=0.1))
    seed: int = 0

    def __post_init__(self):
        if self.theta < 1:
            raise InvalidParamError("theta must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise InvalidParamError(f"unknown algorithm {self.algorithm!r}")


def _as_points(data) -> np.ndarray:
    return np.asarray(getattr(data, "points", data), dtype=np.float64)


def _sub_seed(seed: int, path: int) -> int:
    return int(np.random.SeedSequence([seed, path]).generate_state(1)[0])


# -- agglomerative baselines -------------------------------------------------


def _lance_williams(prox: np.ndarray, method: str) -> tuple[list[tuple[int, int]], list[float]]:
    """Agglomerate from a merge-cost matrix (smaller merges first).

    Ties break on the lexicographically lowest (min id, max id) pair; new
    clusters take ids m, m+1, ... in merge order.  Returns the merge pairs
    and their merge scores.
    """
    m = prox.shape[0]
    if m == 1:
        return [], []
    total = 2 * m - 1
    d = np.full((total, total), np.inf)
    d[:m, :m] = prox
    np.fill_diagonal(d, np.inf)
    active = np.zeros(total, dtype=bool)
    active[:m] = True
    sizes = np.zeros(total)
    sizes[:m] = 1.0
    best_val = np.full(total, np.inf)
    best_j = np.full(total, -1, dtype=np.int64)

    def rescan(i: int):
        js = np.flatnonzero(active[:i])
        if js.size == 0:
            best_val[i], best_j[i] = np.inf, -1
            return
        vals = d[i, js]
        k = int(np.argmin(vals))  # first minimum -> smallest partner id
        best_val[i], best_j[i] = float(vals[k]), int(js[k])

    for i in range(1, m):
        rescan(i)
    merges: list[tuple[int, int]] = []
    heights: list[float] = []
    for step in range(m - 1):
        rows = np.flatnonzero(active & (best_j >= 0))
        order = np.lexsort((rows, best_j[rows], best_val[rows]))
        b = int(rows[order[0]])
        a = int(best_j[b])
        new = m + step
        others = np.flatnonzero(active)
        others = others[(others != a) & (others != b)]
        da, db, dab = d[a, others], d[b, others], d[a, b]
        if method == "single":
            dn = np.minimum(da, db)
        elif method == "complete":
            dn = np.maximum(da, db)
        elif method == "average":
            dn = (sizes[a] * da + sizes[b] * db) / (sizes[a] + sizes[b])
        elif method == "ward":
            so = sizes[others]
            dn = ((sizes[a] + so) * da + (sizes[b] + so) * db - so * dab) / (
                sizes[a] + sizes[b] + so)
        else:
            raise InvalidParamError(f"unknown linkage {method!r}")
        active[a] = active[b] = False
        active[new] = True
        sizes[new] = sizes[a] + sizes[b]
        d[new, others] = dn
        d[others, new] = dn
        merges.append((a, b))
        heights.append(float(dab))
        rescan(new)
        for i in np.flatnonzero(active):
            if i != new and best_j[i] in (a, b):
                rescan(i)
    return merges, heights


def _merge_proximity(points: np.ndarray, measure: Measure, linkage: str) -> np.ndarray:
    """Merge-cost matrix: distances merge low, similarities merge high."""
    W = pairwise_matrix(measure, points)
    return W if measure.orientation == DISTANCE else -W


def hac(data, linkage: str = "average", measure: Measure | None = None,
        *, return_heights: bool = False):
    """Agglomerative clustering with Lance-Williams updates.

    ``linkage`` is one of single/complete/average/ward; ward is defined only
    for the squared Euclidean distance.
    """
    if measure is None:
        raise InvalidParamError("hac needs a measure")
    if linkage == "ward" and measure.kind != "l2sq":
        raise MeasureMismatchError("ward linkage requires the l2sq distance")
    points = _as_points(data)
    n = points.shape[0]
    if n == 1:
        tree = leaf_tree()
        return (tree, []) if return_heights else tree
    merges, heights = _lance_williams(_merge_proximity(points, measure, linkage), linkage)
    tree = Dendrogram(n_leaves=n, children=merges, root=2 * n - 2)
    return (tree, heights) if return_heights else tree


def average_linkage(data, measure: Measure) -> Dendrogram:
    return hac(data, "average", measure)


def _graft_average_linkage(asm: TreeAssembler, points: np.ndarray,
                           measure: Measure, block: np.ndarray) -> int:
    """Average-linkage subtree over a block, grafted onto global leaf ids."""
    if block.size == 1:
        return int(block[0])
    merges, _ = _lance_williams(
        _merge_proximity(points[block], measure, "average"), "average")
    local2global = [int(v) for v in block]
    for a, b in merges:
        local2global.append(asm.join(local2global[a], local2global[b]))
    return local2global[-1]


# -- top-down algorithms -----------------------------------------------------


def bppc(data, measure: Measure, *, theta: int = 512,
         partition: PartitionConfig | None = None, seed: int = 0) -> Dendrogram:
    """Recursive imbalanced bisection with an average-linkage base case.

    Blocks of at most ``theta`` points are solved by average linkage under
    the same measure; larger blocks are split by gd_partition and recursed.
    The default imbalance is delta = 0.1; pass a PartitionConfig to change
    any partitioner knob.
    """
    if theta < 1:
        raise InvalidParamError("theta must be >= 1")
    cfg = partition if partition is not None else PartitionConfig(delta=0.1)
    points = _as_points(data)
    n = points.shape[0]
    if n == 1:
        return leaf_tree()
    maps = build_feature_maps(points, measure, seed=_sub_seed(seed, 0))
    asm = TreeAssembler(n)

    def rec(block: np.ndarray, path: int) -> int:
        if block.size <= theta:
            return _graft_average_linkage(asm, points, measure, block)
        pv = gd_partition(maps.subset(block), replace(cfg, seed=_sub_seed(seed, path)))
        left = rec(block[pv.part_one], 2 * path)
        right = rec(block[pv.part_two], 2 * path + 1)
        return asm.join(left, right)

    root = rec(np.arange(n), 1)
    return asm.build(root)


def _resolve_distance_maps(data, measure: Measure | None, seed: int) -> FeatureMaps:
    if isinstance(data, FeatureMaps):
        maps = data
    else:
        if measure is None:
            raise InvalidParamError("need a measure (or prebuilt FeatureMaps)")
        maps = build_feature_maps(_as_points(data), measure, seed=seed)
    maps.require(DISTANCE)
    return maps


def _bbhc_block(asm: TreeAssembler, maps: FeatureMaps, block: np.ndarray,
                cfg: PartitionConfig, seed: int, path: int) -> int:
    """Recursive maximize-cut balanced bisection over global indices."""
    if block.size == 1:
        return int(block[0])
    pv = gd_partition(maps.subset(block),
                      replace(cfg, delta=0.0, sense=MAXIMIZE_CUT, rounding="topk",
                              seed=_sub_seed(seed, path)))
    left = _bbhc_block(asm, maps, block[pv.part_one], cfg, seed, 2 * path)
    right = _bbhc_block(asm, maps, block[pv.part_two], cfg, seed, 2 * path + 1)
    return asm.join(left, right)


def balanced_bisection_hc(data, measure: Measure | None = None, *,
                          partition: PartitionConfig | None = None,
                          seed: int = 0) -> Dendrogram:
    """Recursive maximize-cut balanced bisection (sizes floor/ceil).

    Every split is the best of gradient descent and the derandomized greedy,
    so each cut is at least the expected random balanced cut; that premise
    yields Q_C >= (2/3) n sum(d) for the whole tree.
    """
    maps = _resolve_distance_maps(data, measure, _sub_seed(seed, 0))
    cfg = partition if partition is not None else PartitionConfig()
    if maps.n == 1:
        return leaf_tree()
    asm = TreeAssembler(maps.n)
    root = _bbhc_block(asm, maps, np.arange(maps.n), cfg, seed, 1)
    return asm.build(root)


def _sat_objective(maps: FeatureMaps, total: float, s_idx: np.ndarray) -> float:
    complement = np.setdiff1d(np.arange(maps.n), s_idx, assume_unique=True)
    if complement.size < 2:
        return total
    return total - maps.pair_sum(complement)


def balanced_max2sat_partition(maps: FeatureMaps, solver: str = "auto", *,
                               partition: PartitionConfig | None = None,
                               seed: int = 0) -> np.ndarray:
    """Choose S with |S| = ceil(n/2) maximizing the weight of pairs touching S.

    The objective equals D - d(V \\ S), so solving it means minimizing the
    internal weight of the complement.  ``exhaustive`` scans all balanced
    subsets (n <= 20); ``gd-relaxation`` minimizes the relaxed quadratic
    (1/4) sum (1-x_u)(1-x_v) d_uv with a kernelized gradient W x - W 1, then
    keeps the best of the rounded runs, the derandomized greedy, and a
    random balanced assignment.
    """
    maps.require(DISTANCE, what="balanced max-2-sat partitioning")
    n = maps.n
    if n == 1:
        return np.array([0], dtype=np.intp)
    if solver == "auto":
        solver = "exhaustive" if n <= _AUTO_SAT_CUTOVER else "gd-relaxation"
    if solver == "exhaustive":
        if n > MAX_EXHAUSTIVE_SAT:
            raise TooLargeError(f"exhaustive solver capped at n={MAX_EXHAUSTIVE_SAT}")
        W = maps.materialize()
        W = 0.5 * (W + W.T)
        rows = W.tolist()
        best_t = None
        best_internal = None
        for T in itertools.combinations(range(n), n // 2):
            s = 0.0
            for i in range(len(T)):
                row = rows[T[i]]
                for j in range(i + 1, len(T)):
                    s += row[T[j]]
            if best_internal is None or s < best_internal:
                best_internal, best_t = s, T
        return np.setdiff1d(np.arange(n), np.array(best_t, dtype=np.intp))
    if solver != "gd-relaxation":
        raise InvalidParamError(f"unknown solver {solver!r}")
    cfg = partition if partition is not None else PartitionConfig()
    n_s = (n + 1) // 2
    target = float(n % 2)  # sum(x) = |S| - |T|
    bias = maps.matvec(np.ones(n))
    gradient = lambda x: maps.matvec(x) - bias  # noqa: E731
    eta0 = cfg.eta0 if cfg.eta0 is not None else _auto_eta0(maps)
    total = maps.pair_sum()
    seeds = np.random.SeedSequence([seed, 0x25A7]).spawn(cfg.restarts + 1)
    candidates: list[np.ndarray] = []
    for r in range(cfg.restarts):
        rng = np.random.default_rng(seeds[r])
        x = pgd_minimize(gradient, n, target, cfg, rng, eta0)
        order = np.lexsort((np.arange(n), -x))
        candidates.append(np.sort(order[:n_s]))
    candidates.append(derandomized_min_internal(maps, (n_s, n - n_s)))
    rng = np.random.default_rng(seeds[-1])
    candidates.append(np.sort(rng.permutation(n)[:n_s]))
    if n % 2 == 0:
        candidates.extend([np.setdiff1d(np.arange(n), c, assume_unique=True)
                           for c in list(candidates)])
    scored = [(_sat_objective(maps, total, c), i) for i, c in enumerate(candidates)]
    best_value, best_idx = max(scored, key=lambda t: (t[0], -t[1]))
    return candidates[best_idx]


def b2satc(data, measure: Measure | None = None, *,
           partition: PartitionConfig | None = None, seed: int = 0,
           return_details: bool = False):
    """Best of three trees built around a balanced MAX-2-SAT split S.

    O1 is a path tree with shuffled S on top of shuffled V \\ S, O2 joins
    balanced bisections of S and its complement, O3 is a balanced bisection
    of everything; the exact ckmm value picks the winner.
    """
    maps = _resolve_distance_maps(data, measure, _sub_seed(seed, 0))
    n = maps.n
    if n == 1:
        tree = leaf_tree()
        return (tree, {}) if return_details else tree
    cfg = partition if partition is not None else PartitionConfig()
    s_idx = balanced_max2sat_partition(maps, "auto", partition=cfg,
                                       seed=_sub_seed(seed, 2))
    t_idx = np.setdiff1d(np.arange(n), s_idx, assume_unique=True)
    rng = np.random.default_rng(_sub_seed(seed, 3))
    order = np.concatenate((rng.permutation(s_idx), rng.permutation(t_idx)))
    o1 = path_tree(order)
    asm = TreeAssembler(n)
    left = _bbhc_block(asm, maps, s_idx, cfg, _sub_seed(seed, 4), 2)
    right = _bbhc_block(asm, maps, t_idx, cfg, _sub_seed(seed, 4), 3)
    o2 = asm.build(asm.join(left, right))
    o3 = balanced_bisection_hc(maps, partition=cfg, seed=_sub_seed(seed, 5))
    trees = (o1, o2, o3)
    values = [eval_ckmm(t, maps) for t in trees]
    best = int(np.argmax(values))
    if return_details:
        return trees[best], {"values": values, "s": s_idx, "chosen": best}
    return trees[best]


# -- other baselines ---------------------------------------------------------


def _two_means(X: np.ndarray, rng: np.random.Generator, max_iter: int,
               tol: float) -> np.ndarray | None:
    """One 2-means run (k-means++ seeding, Lloyd); None if the split collapses."""
    m = X.shape[0]
    c0 = X[rng.integers(m)]
    d2 = ((X - c0) ** 2).sum(axis=1)
    mass = d2.sum()
    if mass == 0.0:
        return None
    c1 = X[rng.choice(m, p=d2 / mass)]
    centers = np.stack([c0, c1])
    labels = None
    for _ in range(max_iter):
        d0 = ((X - centers[0]) ** 2).sum(axis=1)
        d1 = ((X - centers[1]) ** 2).sum(axis=1)
        labels = (d1 < d0).astype(np.int8)
        if labels.all() or not labels.any():
            return None
        new_centers = np.stack([X[labels == 0].mean(axis=0), X[labels == 1].mean(axis=0)])
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break
    return labels


def bkmeans(data, seed: int = 0, *, max_iter: int = 100, tol: float = 1e-6) -> Dendrogram:
    """Bisecting k-means: recursive 2-means splits, deterministic per seed.

    Collapsed splits (one empty side, or all-identical blocks) fall back to a
    median split along the highest-variance coordinate.
    """
    points = _as_points(data)
    n = points.shape[0]
    if n == 1:
        return leaf_tree()
    asm = TreeAssembler(n)

    def median_split(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = points[block]
        coord = int(np.argmax(X.var(axis=0)))
        order = np.lexsort((block, X[:, coord]))
        half = block.size // 2
        return block[order[:half]], block[order[half:]]

    def rec(block: np.ndarray, path: int) -> int:
        if block.size == 1:
            return int(block[0])
        rng = np.random.default_rng(_sub_seed(seed, path))
        labels = _two_means(points[block], rng, max_iter, tol)
        if labels is None:
            left_block, right_block = median_split(block)
        else:
            left_block, right_block = block[labels == 0], block[labels == 1]
        return asm.join(rec(left_block, 2 * path), rec(right_block, 2 * path + 1))

    return asm.build(rec(np.arange(n), 1))


def random_cut(data, seed: int = 0) -> Dendrogram:
    """1-d random projection tree: project onto one Gaussian direction, then
    recursively cut at a uniform point of each block's projected range."""
    points = _as_points(data)
    n = points.shape[0]
    if n == 1:
        return leaf_tree()
    rng = np.random.default_rng(seed)
    proj = points @ rng.standard_normal(points.shape[1])
    order = np.lexsort((np.arange(n), proj))  # ties broken by index order
    x = proj[order]
    root = -1
    pending: list[tuple[int, int, int, int]] = [(0, n, -1, -1)]
    slots: list[list[int]] = []
    while pending:
        lo, hi, parent, slot = pending.pop()
        if hi - lo == 1:
            node = int(order[lo])
        else:
            slots.append([-1, -1])
            node = n + len(slots) - 1
            lo_v, hi_v = float(x[lo]), float(x[hi - 1])
            mid = (lo + hi) // 2
            if lo_v < hi_v:
                for _ in range(64):
                    u = rng.uniform(lo_v, hi_v)
                    cut = lo + int(np.searchsorted(x[lo:hi], u, side="left"))
                    if cut > lo:
                        mid = cut
                        break
            pending.append((mid, hi, node, 1))
            pending.append((lo, mid, node, 0))
        if parent < 0:
            root = node
        else:
            slots[parent - n][slot] = node
    return Dendrogram(n_leaves=n, children=[tuple(c) for c in slots], root=root)


def run_algorithm(data, measure: Measure | None, config: HcConfig) -> Dendrogram:
    """Dispatch one named algorithm with the bundled configuration."""
    name = config.algorithm
    needs_measure = name in ("bppc", "b2satc", "bbhc", "avg", "single", "complete", "ward")
    if needs_measure and measure is None:
        raise InvalidParamError(f"algorithm {name!r} needs a measure")
    if name == "bppc":
        return bppc(data, measure, theta=config.theta, partition=config.partition,
                    seed=config.seed)
    if name == "b2satc":
        return b2satc(data, measure, partition=config.partition, seed=config.seed)
    if name == "bbhc":
        return balanced_bisection_hc(data, measure, partition=config.partition,
                                     seed=config.seed)
    if name in _LINKAGE_OF:
        return hac(data, _LINKAGE_OF[name], measure)
    if name == "bkmeans":
        return bkmeans(data, seed=config.seed)
    if name == "randomcut":
        return random_cut(data, seed=config.seed)
    if name == "random":
        return random_binary_tree(_as_points(data).shape[0], config.seed)
    raise InvalidParamError(f"unknown algorithm {name!r}")
