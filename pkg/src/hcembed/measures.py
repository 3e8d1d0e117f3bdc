"""Similarity/distance measures and their kernel-defining feature maps.

Each supported measure can be written as an inner product
``w_ij = <phi(v_i), psi(v_j)>`` for feature maps phi, psi:

* ``cossim``  (similarity, values in [0, 1]) — exact with k = d + 1,
  phi = psi = (x_1, ..., x_d, |x|) / (sqrt(2) |x|).
* ``l2sq``    (distance, values >= 0) — exact with k = d + 2,
  phi(x) = (|x|^2, 1, x), psi(y) = (1, |y|^2, -2y).
* ``rbf``     (similarity, values in (0, 1]) — random Fourier features,
  an unbiased estimator of exp(-gamma |x - y|^2).

Stacking the maps row-wise into matrices Phi, Psi in R^{n x k} lets every
weighted aggregate over pairs (gradients W @ x, cut values, subtree cross
sums) be computed in O(nk) without materializing W.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidParamError,
    MeasureMismatchError,
    ZeroVectorError,
)
from .validation import check_embedding_array, check_square_matrix

MEASURE_KINDS = ("cossim", "l2sq", "rbf")

SIMILARITY = "similarity"
DISTANCE = "distance"


@dataclass(frozen=True)
class Measure:
    """A similarity or distance measure on embedding vectors."""

    kind: str
    gamma: float = 1.0
    rbf_features: int = 1024

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise InvalidParamError(f"unknown measure kind {self.kind!r}")
        if self.kind == "rbf":
            if self.gamma <= 0:
                raise InvalidParamError("rbf gamma must be positive")
            if self.rbf_features < 1:
                raise InvalidParamError("rbf_features must be >= 1")

    @property
    def orientation(self) -> str:
        return DISTANCE if self.kind == "l2sq" else SIMILARITY


def pairwise(measure: Measure, x, y) -> float:
    """Exact closed-form measure value for a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionMismatchError(f"shapes {x.shape} vs {y.shape}")
    if measure.kind == "cossim":
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        if nx == 0.0 or ny == 0.0:
            raise ZeroVectorError("cosine similarity undefined for the zero vector")
        return float(np.dot(x, y) / (2.0 * nx * ny) + 0.5)
    if measure.kind == "l2sq":
        diff = x - y
        return float(np.dot(diff, diff))
    gamma = measure.gamma
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def pairwise_matrix(measure: Measure, points) -> np.ndarray:
    """Materialize the full n x n measure matrix from closed forms.

    This is the oracle-side path: it never touches feature maps, so
    discrepancies against map-based evaluation isolate the approximation.
    """
    X = check_embedding_array(points)
    if measure.kind == "cossim":
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0.0):
            raise ZeroVectorError("cosine similarity undefined for the zero vector")
        W = (X @ X.T) / (2.0 * np.outer(norms, norms)) + 0.5
    else:
        sq = np.einsum("ij,ij->i", X, X)
        D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
        np.maximum(D, 0.0, out=D)
        W = np.exp(-measure.gamma * D) if measure.kind == "rbf" else D
    np.fill_diagonal(W, 0.0 if measure.kind == "l2sq" else 1.0)
    return W


@dataclass
class FeatureMaps:
    """The kernelization pair (Phi, Psi) realizing a measure as inner products.

    ``phi`` and ``psi`` are the same array object for symmetric maps
    (cossim, rbf).  ``exact`` is False only for rbf random features.
    """

    phi: np.ndarray
    psi: np.ndarray
    orientation: str
    exact: bool
    measure: Measure | None = None
    _self_products: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.phi.shape != self.psi.shape:
            raise DimensionMismatchError("phi and psi must have identical shape")
        if self.orientation not in (SIMILARITY, DISTANCE):
            raise InvalidParamError(f"bad orientation {self.orientation!r}")

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def k(self) -> int:
        return self.phi.shape[1]

    @property
    def symmetric(self) -> bool:
        return self.phi is self.psi

    def require(self, orientation: str, what: str = "operation"):
        if self.orientation != orientation:
            raise MeasureMismatchError(f"{what} requires a {orientation} measure, "
                                       f"got {self.orientation}")

    def subset(self, idx) -> "FeatureMaps":
        """Row-sliced view for a block of points (indices into 0..n-1)."""
        idx = np.asarray(idx, dtype=np.intp)
        phi = self.phi[idx]
        psi = phi if self.symmetric else self.psi[idx]
        return FeatureMaps(phi=phi, psi=psi, orientation=self.orientation,
                           exact=self.exact, measure=self.measure)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """W @ x computed as Phi (Psi^T x): the inverse kernel trick."""
        return self.phi @ (self.psi.T @ x)

    def self_products(self) -> np.ndarray:
        """Per-point w_ii = <phi_i, psi_i> (0 for l2sq, 1 for cossim/rbf-exact)."""
        if self._self_products is None:
            self._self_products = np.einsum("ij,ij->i", self.phi, self.psi)
        return self._self_products

    def cross_sum(self, idx_a, idx_b) -> float:
        """Sum of w_ij over i in idx_a, j in idx_b (disjoint index sets)."""
        sa_phi = self.phi[idx_a].sum(axis=0)
        sb_psi = self.psi[idx_b].sum(axis=0)
        value = float(sa_phi @ sb_psi)
        if not self.symmetric:
            sb_phi = self.phi[idx_b].sum(axis=0)
            sa_psi = self.psi[idx_a].sum(axis=0)
            value = 0.5 * (value + float(sb_phi @ sa_psi))
        return value

    def pair_sum(self, idx=None) -> float:
        """Sum of w_ij over unordered pairs i < j within ``idx`` (default: all)."""
        if idx is None:
            phi, psi = self.phi, self.psi
            diag = self.self_products().sum()
        else:
            idx = np.asarray(idx, dtype=np.intp)
            phi = self.phi[idx]
            psi = phi if self.symmetric else self.psi[idx]
            diag = float(np.einsum("ij,ij->i", phi, psi).sum())
        total = float(phi.sum(axis=0) @ psi.sum(axis=0))
        return 0.5 * (total - diag)

    def materialize(self) -> np.ndarray:
        """Explicit W = Phi Psi^T (desk-scale oracles and tests only)."""
        return self.phi @ self.psi.T

    @staticmethod
    def from_matrix(W, orientation: str) -> "FeatureMaps":
        """Wrap an explicit symmetric weight matrix as exact feature maps.

        Uses phi = W, psi = I so that <phi_i, psi_j> = W_ij; k equals n, which
        is fine at the desk scales where explicit matrices appear.
        """
        W = check_square_matrix(W)
        return FeatureMaps(phi=W.copy(), psi=np.eye(W.shape[0]),
                           orientation=orientation, exact=True, measure=None)


def build_feature_maps(dataset, measure: Measure, seed: int = 0) -> FeatureMaps:
    """Build the kernel-defining feature maps for ``measure`` over a dataset.

    ``dataset`` may be an EmbeddingSet or a plain (n, d) array.  Deterministic
    given the seed (the seed only matters for rbf).
    """
    points = getattr(dataset, "points", dataset)
    X = check_embedding_array(points)
    n, d = X.shape
    if measure.kind == "cossim":
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0.0):
            raise ZeroVectorError("cosine similarity undefined for the zero vector")
        phi = np.empty((n, d + 1))
        scale = 1.0 / (np.sqrt(2.0) * norms)
        phi[:, :d] = X * scale[:, None]
        phi[:, d] = norms * scale
        return FeatureMaps(phi=phi, psi=phi, orientation=SIMILARITY,
                           exact=True, measure=measure)
    if measure.kind == "l2sq":
        sq = np.einsum("ij,ij->i", X, X)
        phi = np.empty((n, d + 2))
        phi[:, 0] = sq
        phi[:, 1] = 1.0
        phi[:, 2:] = X
        psi = np.empty((n, d + 2))
        psi[:, 0] = 1.0
        psi[:, 1] = sq
        psi[:, 2:] = -2.0 * X
        return FeatureMaps(phi=phi, psi=psi, orientation=DISTANCE,
                           exact=True, measure=measure)
    # rbf random Fourier features: w_i ~ N(0, 2*gamma*I), b_i ~ U[0, 2*pi)
    rng = np.random.default_rng(seed)
    k = measure.rbf_features
    W = rng.normal(0.0, np.sqrt(2.0 * measure.gamma), size=(k, d))
    b = rng.uniform(0.0, 2.0 * np.pi, size=k)
    phi = np.sqrt(2.0 / k) * np.cos(X @ W.T + b)
    return FeatureMaps(phi=phi, psi=phi, orientation=SIMILARITY,
                       exact=False, measure=measure)
