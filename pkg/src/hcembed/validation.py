"""Input validation helpers used by estimators and loaders."""

from __future__ import annotations

import numpy as np

from .errors import FormatError, InvalidParamError


def check_embedding_array(X, *, allow_single: bool = True) -> np.ndarray:
    """Coerce ``X`` to a validated float64 matrix of shape (n, d).

    Rejects empty inputs and non-finite coordinates: every downstream
    quadratic form assumes finite values.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if allow_single else arr
    if arr.ndim != 2:
        raise InvalidParamError(f"expected a 2-d array of points, got ndim={arr.ndim}")
    n, d = arr.shape
    if n < 1:
        raise InvalidParamError("need at least one point")
    if d < 1:
        raise InvalidParamError("need at least one feature dimension")
    if not np.all(np.isfinite(arr)):
        raise FormatError("non-finite coordinate (NaN/Inf) in embedding matrix")
    return arr


def check_labels_array(labels, n: int) -> np.ndarray:
    """Validate an integer label vector of length ``n``."""
    arr = np.asarray(labels)
    if arr.shape != (n,):
        raise InvalidParamError(f"labels must have shape ({n},), got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise InvalidParamError("labels must be integers")
    if arr.min(initial=0) < 0:
        raise InvalidParamError("labels must be non-negative")
    return arr.astype(np.int64)


def check_square_matrix(m, *, nonnegative: bool = True) -> np.ndarray:
    """Validate a symmetric weight/distance matrix with zero diagonal."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidParamError("expected a square matrix")
    if not np.all(np.isfinite(arr)):
        raise FormatError("non-finite entry in weight matrix")
    if not np.allclose(arr, arr.T):
        raise InvalidParamError("weight matrix must be symmetric")
    if nonnegative and arr.min() < 0:
        raise InvalidParamError("weights must be non-negative")
    return arr
