"""Scikit-learn style estimator wrappers around the clustering algorithms.

Each estimator follows the fit/get_params protocol: ``fit(X)`` validates the
input, builds the hierarchy, and stores it as ``tree_`` together with the
feature maps used for scoring.  ``score(X=None)`` returns the normalized
objective of the fitted tree (random tree ~ 0, upper bound = 1), so the
estimators compose with sklearn model selection out of the box.

Flat-label extraction is deliberately absent: the product of these models is
the dendrogram itself.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .algos import (
    balanced_bisection_hc,
    bkmeans,
    bppc,
    b2satc,
    hac,
    random_cut,
)
from .dendrogram import random_binary_tree
from .errors import InvalidParamError
from .measures import DISTANCE, Measure, build_feature_maps
from .objectives import evaluate_tree
from .partitioner import PartitionConfig
from .validation import check_embedding_array


class BaseHierarchy(BaseEstimator):
    """Shared fit/score plumbing; subclasses implement _build_tree."""

    def __init__(self, measure="l2sq", gamma=1.0, rbf_features=1024, random_state=0):
        self.measure = measure
        self.gamma = gamma
        self.rbf_features = rbf_features
        self.random_state = random_state

    def _measure(self) -> Measure:
        return Measure(kind=self.measure, gamma=self.gamma,
                       rbf_features=self.rbf_features)

    def _build_tree(self, X, measure):
        raise NotImplementedError

    def fit(self, X, y=None):
        X = check_embedding_array(X)
        measure = self._measure()
        self.tree_ = self._build_tree(X, measure)
        self.maps_ = build_feature_maps(X, measure, seed=self.random_state)
        self.n_leaves_ = self.tree_.n_leaves
        return self

    def _check_fitted(self):
        if not hasattr(self, "tree_"):
            raise NotFittedError("call fit first")

    def score(self, X=None, y=None, objective: str | None = None) -> float:
        """Normalized objective (alpha*) of the fitted tree; higher is better."""
        self._check_fitted()
        if objective is None:
            objective = "ckmm" if self.maps_.orientation == DISTANCE else "mw"
        return evaluate_tree(self.tree_, self.maps_, objective).alpha_star


class BisectPlusPlus(BaseHierarchy):
    """Top-down imbalanced gradient-descent bisection with an
    average-linkage base case (theta)."""

    def __init__(self, measure="cossim", gamma=1.0, rbf_features=1024,
                 theta=512, delta=0.1, iterations=200, noise_variance=0.1,
                 rounding="topk", restarts=3, random_state=0):
        super().__init__(measure, gamma, rbf_features, random_state)
        self.theta = theta
        self.delta = delta
        self.iterations = iterations
        self.noise_variance = noise_variance
        self.rounding = rounding
        self.restarts = restarts

    def _partition_config(self) -> PartitionConfig:
        return PartitionConfig(delta=self.delta, iterations=self.iterations,
                               noise_variance=self.noise_variance,
                               rounding=self.rounding, restarts=self.restarts)

    def _build_tree(self, X, measure):
        return bppc(X, measure, theta=self.theta,
                    partition=self._partition_config(), seed=self.random_state)


class MaxSatHierarchy(BaseHierarchy):
    """Best-of-three hierarchy around a balanced MAX-2-SAT split (distances)."""

    def __init__(self, measure="l2sq", gamma=1.0, rbf_features=1024, random_state=0):
        super().__init__(measure, gamma, rbf_features, random_state)

    def _build_tree(self, X, measure):
        return b2satc(X, measure, seed=self.random_state)


class BalancedBisectionHierarchy(BaseHierarchy):
    """Recursive maximize-cut balanced bisection (distances)."""

    def __init__(self, measure="l2sq", gamma=1.0, rbf_features=1024, random_state=0):
        super().__init__(measure, gamma, rbf_features, random_state)

    def _build_tree(self, X, measure):
        return balanced_bisection_hc(X, measure, seed=self.random_state)


class AgglomerativeHierarchy(BaseHierarchy):
    """Classic agglomerative clustering (single/complete/average/ward)."""

    def __init__(self, linkage="average", measure="l2sq", gamma=1.0,
                 rbf_features=1024, random_state=0):
        super().__init__(measure, gamma, rbf_features, random_state)
        self.linkage = linkage

    def _build_tree(self, X, measure):
        return hac(X, self.linkage, measure)


class BisectingKMeansHierarchy(BaseHierarchy):
    """Recursive 2-means splits with k-means++ seeding."""

    def __init__(self, measure="l2sq", gamma=1.0, rbf_features=1024,
                 max_iter=100, tol=1e-6, random_state=0):
        super().__init__(measure, gamma, rbf_features, random_state)
        self.max_iter = max_iter
        self.tol = tol

    def _build_tree(self, X, measure):
        return bkmeans(X, seed=self.random_state, max_iter=self.max_iter, tol=self.tol)


class RandomCutHierarchy(BaseHierarchy):
    """Recursive uniform cuts on a single random 1-d projection."""

    def _build_tree(self, X, measure):
        return random_cut(X, seed=self.random_state)


class RandomHierarchy(BaseHierarchy):
    """Uniform random binary tree; the zero point of the normalized scores."""

    def _build_tree(self, X, measure):
        return random_binary_tree(X.shape[0], self.random_state)


def make_estimator(algorithm: str, **kwargs) -> BaseHierarchy:
    """Estimator factory keyed by the CLI algorithm names."""
    table = {
        "bppc": BisectPlusPlus,
        "b2satc": MaxSatHierarchy,
        "bbhc": BalancedBisectionHierarchy,
        "avg": lambda **kw: AgglomerativeHierarchy(linkage="average", **kw),
        "single": lambda **kw: AgglomerativeHierarchy(linkage="single", **kw),
        "complete": lambda **kw: AgglomerativeHierarchy(linkage="complete", **kw),
        "ward": lambda **kw: AgglomerativeHierarchy(linkage="ward", **kw),
        "bkmeans": BisectingKMeansHierarchy,
        "randomcut": RandomCutHierarchy,
        "random": RandomHierarchy,
    }
    if algorithm not in table:
        raise InvalidParamError(f"unknown algorithm {algorithm!r}")
    return table[algorithm](**kwargs)
