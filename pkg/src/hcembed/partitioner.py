"""Imbalanced graph 2-partitioning via randomized projected gradient descent.

The relaxed problem optimizes x^T W x over the box-hyperplane polytope
B = [-1, 1]^n  intersect  {x : sum(x) = 2*delta*n}.  W is never materialized:
gradients use the inverse kernel trick W x = Phi (Psi^T x), so one iteration
costs O(nk).

Similarity measures minimize the cut (keep similar items together), distance
measures maximize it; the sign of the quadratic flips accordingly.

Every partition call also evaluates a derandomized greedy cut built from
conditional expectations, which guarantees a cut at least as good as the
expected random balanced partition.  Returning the best of gradient descent
and the greedy makes that guarantee unconditional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateSplitError, InfeasibleError, InvalidParamError
from .measures import DISTANCE, FeatureMaps

MINIMIZE_CUT = "minimize-cut"
MAXIMIZE_CUT = "maximize-cut"

_RANDOMIZED_ROUNDING_RETRIES = 16


@dataclass
class PartitionConfig:
    """Knobs for the projected-gradient partitioner."""

    delta: float = 0.0
    iterations: int = 200
    noise_variance: float = 0.1
    rounding: str = "topk"  # "topk" (exact sizes) or "randomized"
    restarts: int = 3
    seed: int = 0
    sense: str | None = None  # None: derived from the measure orientation
    eta0: float | None = None
    learning_rates: Callable[[int], float] | None = None

    def __post_init__(self):
        if not 0.0 <= self.delta <= 0.5:
            raise InvalidParamError("delta must lie in [0, 0.5]")
        if self.iterations < 1:
            raise InvalidParamError("iterations must be >= 1")
        if self.noise_variance < 0:
            raise InvalidParamError("noise variance must be >= 0")
        if self.rounding not in ("topk", "randomized"):
            raise InvalidParamError(f"unknown rounding {self.rounding!r}")
        if self.restarts < 1:
            raise InvalidParamError("restarts must be >= 1")
        if self.sense not in (None, MINIMIZE_CUT, MAXIMIZE_CUT):
            raise InvalidParamError(f"unknown sense {self.sense!r}")
        if self.eta0 is not None and self.eta0 <= 0:
            raise InvalidParamError("eta0 must be positive")


@dataclass
class PartitionVector:
    """Relaxed assignment plus the rounded two-set partition."""

    relaxed: np.ndarray
    part_one: np.ndarray
    part_two: np.ndarray
    cut_value: float


def project_box_hyperplane(y, target_sum: float) -> np.ndarray:
    """Exact Euclidean projection of y onto [-1,1]^n intersect {sum = target}.

    The projection is clip(y - lam, -1, 1) for the lam solving
    g(lam) = sum(clip(y - lam)) - target = 0; g is piecewise linear and
    non-increasing, so lam comes from a breakpoint bisection plus one linear
    solve on the active segment.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.size
    if n == 0:
        raise InvalidParamError("cannot project an empty vector")
    if abs(target_sum) > n:
        raise InfeasibleError(f"|target|={abs(target_sum)} exceeds n={n}")
    ys = np.sort(y)
    prefix = np.concatenate(([0.0], np.cumsum(ys)))

    def g(lam: float) -> float:
        hi = int(np.searchsorted(ys, lam + 1.0, side="left"))   # y >= lam+1 -> +1
        lo = int(np.searchsorted(ys, lam - 1.0, side="right"))  # y <= lam-1 -> -1
        interior = prefix[hi] - prefix[lo] - (hi - lo) * lam
        return (n - hi) - lo + interior - target_sum

    breakpoints = np.sort(np.concatenate((ys - 1.0, ys + 1.0)))
    # For lam <= min(y)-1 everything saturates at +1 (g = n - target >= 0);
    # for lam >= max(y)+1 everything saturates at -1 (g = -n - target <= 0).
    if g(float(breakpoints[0])) <= 0.0:  # target == n
        return np.clip(y - float(breakpoints[0]), -1.0, 1.0)
    if g(float(breakpoints[-1])) >= 0.0:  # target == -n
        return np.clip(y - float(breakpoints[-1]), -1.0, 1.0)
    lo_idx, hi_idx = 0, breakpoints.size - 1
    while hi_idx - lo_idx > 1:
        mid = (lo_idx + hi_idx) // 2
        if g(float(breakpoints[mid])) >= 0.0:
            lo_idx = mid
        else:
            hi_idx = mid
    lam0 = float(breakpoints[lo_idx])
    g0 = g(lam0)
    if g0 == 0.0:
        return np.clip(y - lam0, -1.0, 1.0)
    # g crosses zero strictly inside the segment, where its slope is the
    # (constant, nonzero) count of interior coordinates.
    lam_mid = 0.5 * (lam0 + float(breakpoints[hi_idx]))
    hi = int(np.searchsorted(ys, lam_mid + 1.0, side="left"))
    lo = int(np.searchsorted(ys, lam_mid - 1.0, side="right"))
    m = hi - lo
    lam = lam_mid + (g(lam_mid) / m if m > 0 else 0.0)
    return np.clip(y - lam, -1.0, 1.0)


def _auto_eta0(maps: FeatureMaps) -> float:
    r_phi = float(np.sqrt(np.einsum("ij,ij->i", maps.phi, maps.phi).max()))
    r_psi = r_phi if maps.symmetric else float(
        np.sqrt(np.einsum("ij,ij->i", maps.psi, maps.psi).max()))
    scale = r_phi * r_psi
    return 1.0 / scale if scale > 0 else 1.0


def pgd_minimize(gradient: Callable[[np.ndarray], np.ndarray], n: int,
                 target_sum: float, config: PartitionConfig,
                 rng: np.random.Generator, eta0: float) -> np.ndarray:
    """One projected-gradient-descent run from a projected Gaussian start."""
    x = project_box_hyperplane(
        rng.normal(0.0, math.sqrt(config.noise_variance), n), target_sum)
    schedule = config.learning_rates or (lambda t: eta0 / math.sqrt(t + 1.0))
    for t in range(config.iterations):
        x = project_box_hyperplane(x - schedule(t) * gradient(x), target_sum)
    return x


def _round_topk(x: np.ndarray, n_one: int) -> np.ndarray:
    order = np.lexsort((np.arange(x.size), -x))
    return np.sort(order[:n_one])


def _round_randomized(x: np.ndarray, rng: np.random.Generator, n_one: int) -> np.ndarray:
    for _ in range(_RANDOMIZED_ROUNDING_RETRIES):
        pick = rng.random(x.size) < (x + 1.0) / 2.0
        if pick.any() and not pick.all():
            return np.flatnonzero(pick)
    # persistent degeneracy: fall back to exact-size rounding
    return _round_topk(x, n_one)


def _is_better(a: float, b: float, sense: str) -> bool:
    return a > b if sense == MAXIMIZE_CUT else a < b


def resolve_sense(maps: FeatureMaps, config: PartitionConfig) -> str:
    if config.sense is not None:
        return config.sense
    return MAXIMIZE_CUT if maps.orientation == DISTANCE else MINIMIZE_CUT


def gd_partition(maps: FeatureMaps, config: PartitionConfig) -> PartitionVector:
    """Best-of-restarts randomized projected gradient partition.

    The derandomized greedy cut is always included as a candidate, so under
    maximize-cut the returned cut is never below the expected random
    balanced cut (and never above it under minimize-cut).
    """
    n = maps.n
    if n < 2:
        raise InvalidParamError("partitioning needs at least two points")
    sense = resolve_sense(maps, config)
    target = 2.0 * config.delta * n
    n_one = int(math.floor((0.5 + config.delta) * n + 0.5))
    n_one = min(max(n_one, 1), n - 1)
    eta0 = config.eta0 if config.eta0 is not None else _auto_eta0(maps)
    sign = 1.0 if sense == MAXIMIZE_CUT else -1.0
    gradient = lambda x: sign * maps.matvec(x)  # noqa: E731

    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    best_cut = None
    best_one = None
    best_x = None
    for restart in range(config.restarts):
        rng = np.random.default_rng(seeds[restart])
        x = pgd_minimize(gradient, n, target, config, rng, eta0)
        if config.rounding == "topk":
            one = _round_topk(x, n_one)
        else:
            one = _round_randomized(x, rng, n_one)
        if one.size == 0 or one.size == n:
            raise DegenerateSplitError("rounding produced an empty side")
        two = np.setdiff1d(np.arange(n), one, assume_unique=True)
        cut = maps.cross_sum(one, two)
        if best_cut is None or _is_better(cut, best_cut, sense):
            best_cut, best_one, best_x = cut, one, x
    greedy = derandomized_balanced_cut(maps, (n_one, n - n_one), sense)
    if _is_better(greedy.cut_value, best_cut, sense):
        best_cut, best_one = greedy.cut_value, greedy.part_one
    part_two = np.setdiff1d(np.arange(n), best_one, assume_unique=True)
    return PartitionVector(relaxed=best_x, part_one=np.sort(best_one),
                           part_two=part_two, cut_value=best_cut)


def _pair_probability(c_a: int, c_b: int, u: int) -> float:
    if u < 2:
        return 0.0
    return 2.0 * c_a * c_b / (u * (u - 1.0))


def derandomized_balanced_cut(maps: FeatureMaps, sizes: tuple[int, int],
                              sense: str = MAXIMIZE_CUT) -> PartitionVector:
    """Greedy conditional-expectation cut with fixed side sizes.

    Assigns vertices one at a time to the side whose conditional expected cut
    (under uniformly random completion respecting the remaining capacities)
    is better.  By induction the final cut is at least (maximize-cut) or at
    most (minimize-cut) the expected value of a random partition with these
    sizes: 2|X||Y|/(n(n-1)) times the total pair weight.
    """
    n_one, n_two = int(sizes[0]), int(sizes[1])
    n = maps.n
    if n_one + n_two != n or n_one < 1 or n_two < 1:
        raise InvalidParamError(f"sizes {sizes} incompatible with n={n}")
    phi, psi = maps.phi, maps.psi
    self_w = maps.self_products()

    def w_to(sum_phi, sum_psi, v):
        return 0.5 * (float(phi[v] @ sum_psi) + float(psi[v] @ sum_phi))

    sum_phi_u = phi.sum(axis=0)
    sum_psi_u = sum_phi_u if maps.symmetric else psi.sum(axis=0)
    zeros = np.zeros(maps.k)
    sum_phi_x, sum_psi_x = zeros.copy(), zeros.copy()
    sum_phi_y, sum_psi_y = zeros.copy(), zeros.copy()
    w_pairs_u = maps.pair_sum()
    w_xu = w_yu = cut = 0.0
    cap_x, cap_y = n_one, n_two
    assign = np.empty(n, dtype=np.int8)
    for v in range(n):
        u_left = n - v - 1  # unassigned after v
        s_x = w_to(sum_phi_x, sum_psi_x, v)
        s_y = w_to(sum_phi_y, sum_psi_y, v)
        s_u = w_to(sum_phi_u, sum_psi_u, v) - float(self_w[v])
        sum_phi_u = sum_phi_u - phi[v]
        if not maps.symmetric:
            sum_psi_u = sum_psi_u - psi[v]
        else:
            sum_psi_u = sum_phi_u
        w_pairs_u -= s_u
        w_xu_rest = w_xu - s_x
        w_yu_rest = w_yu - s_y
        if cap_x == 0:
            side = 1
        elif cap_y == 0:
            side = 0
        else:
            inv = 1.0 / u_left if u_left else 0.0
            e_x = (cut + s_y
                   + (w_xu_rest + s_u) * cap_y * inv
                   + w_yu_rest * (cap_x - 1) * inv
                   + w_pairs_u * _pair_probability(cap_x - 1, cap_y, u_left))
            e_y = (cut + s_x
                   + w_xu_rest * (cap_y - 1) * inv
                   + (w_yu_rest + s_u) * cap_x * inv
                   + w_pairs_u * _pair_probability(cap_x, cap_y - 1, u_left))
            prefer_x = e_x >= e_y if sense == MAXIMIZE_CUT else e_x <= e_y
            side = 0 if prefer_x else 1
        if side == 0:
            assign[v] = 0
            cap_x -= 1
            cut += s_y
            w_xu = w_xu_rest + s_u
            w_yu = w_yu_rest
            sum_phi_x = sum_phi_x + phi[v]
            sum_psi_x = sum_psi_x + psi[v]
        else:
            assign[v] = 1
            cap_y -= 1
            cut += s_x
            w_yu = w_yu_rest + s_u
            w_xu = w_xu_rest
            sum_phi_y = sum_phi_y + phi[v]
            sum_psi_y = sum_psi_y + psi[v]
    part_one = np.flatnonzero(assign == 0)
    part_two = np.flatnonzero(assign == 1)
    relaxed = np.where(assign == 0, 1.0, -1.0)
    return PartitionVector(relaxed=relaxed, part_one=part_one, part_two=part_two,
                           cut_value=maps.cross_sum(part_one, part_two))


def derandomized_min_internal(maps: FeatureMaps, sizes: tuple[int, int]) -> np.ndarray:
    """Greedy conditional-expectation assignment minimizing d(T).

    Splits V into S (capacity sizes[0]) and T (capacity sizes[1]) so that the
    internal weight of T ends up at most the expectation under a uniformly
    random balanced assignment.  Returns the index set S.
    """
    n_s, n_t = int(sizes[0]), int(sizes[1])
    n = maps.n
    if n_s + n_t != n or n_s < 0 or n_t < 0:
        raise InvalidParamError(f"sizes {sizes} incompatible with n={n}")
    phi, psi = maps.phi, maps.psi
    self_w = maps.self_products()
    sum_phi_u = phi.sum(axis=0)
    sum_psi_u = sum_phi_u if maps.symmetric else psi.sum(axis=0)
    sum_phi_t = np.zeros(maps.k)
    sum_psi_t = np.zeros(maps.k)
    w_pairs_u = maps.pair_sum()
    w_tu = inner_t = 0.0
    cap_s, cap_t = n_s, n_t
    assign = np.empty(n, dtype=np.int8)
    for v in range(n):
        u_left = n - v - 1
        s_t = 0.5 * (float(phi[v] @ sum_psi_t) + float(psi[v] @ sum_phi_t))
        s_u = 0.5 * (float(phi[v] @ sum_psi_u) + float(psi[v] @ sum_phi_u)) - float(self_w[v])
        sum_phi_u = sum_phi_u - phi[v]
        sum_psi_u = sum_phi_u if maps.symmetric else sum_psi_u - psi[v]
        w_pairs_u -= s_u
        w_tu_rest = w_tu - s_t
        if cap_s == 0:
            side = 1
        elif cap_t == 0:
            side = 0
        else:
            inv = 1.0 / u_left if u_left else 0.0
            both = (w_pairs_u * cap_t * (cap_t - 1) / (u_left * (u_left - 1.0))
                    if u_left >= 2 else 0.0)
            e_s = inner_t + w_tu_rest * cap_t * inv + both
            both_t = (w_pairs_u * (cap_t - 1) * (cap_t - 2) / (u_left * (u_left - 1.0))
                      if u_left >= 2 else 0.0)
            e_t = (inner_t + s_t + (w_tu_rest + s_u) * (cap_t - 1) * inv + both_t)
            side = 0 if e_s <= e_t else 1
        if side == 0:
            assign[v] = 0
            cap_s -= 1
            w_tu = w_tu_rest
        else:
            assign[v] = 1
            cap_t -= 1
            inner_t += s_t
            w_tu = w_tu_rest + s_u
            sum_phi_t = sum_phi_t + phi[v]
            sum_psi_t = sum_psi_t + psi[v]
    return np.flatnonzero(assign == 0)
