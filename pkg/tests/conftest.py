import numpy as np
import pytest

from hcembed import DISTANCE, Dendrogram, FeatureMaps


def random_weight_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    """Symmetric non-negative matrix with zero diagonal."""
    upper = np.triu(rng.random((n, n)), 1)
    return upper + upper.T


def matrix_maps(W: np.ndarray, orientation: str = DISTANCE) -> FeatureMaps:
    return FeatureMaps.from_matrix(W, orientation)


def brute_lca_node(tree: Dendrogram, i: int, j: int) -> int:
    """Smallest node containing both leaves, by scanning all leaf sets."""
    best = None
    for node in range(tree.n_nodes):
        leaves = set(tree.leaves_under(node))
        if i in leaves and j in leaves:
            if best is None or tree.sizes[node] < tree.sizes[best]:
                best = node
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
