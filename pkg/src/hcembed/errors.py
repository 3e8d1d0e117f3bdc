"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: I/O problems -> 1, bad parameters or
malformed inputs -> 2, algorithm failures -> 3.
"""


class HCEmbedError(Exception):
    """Base class for all package errors."""


class FormatError(HCEmbedError):
    """Malformed file contents (ragged rows, bad numbers, broken tree files)."""


class EmptyDatasetError(HCEmbedError):
    """A dataset with zero rows."""


class InvalidParamError(HCEmbedError):
    """A parameter outside its documented range."""


class ZeroVectorError(HCEmbedError):
    """Cosine similarity requested on an all-zero vector."""


class DimensionMismatchError(HCEmbedError):
    """Operands with incompatible dimensions."""


class NonBinaryTreeError(HCEmbedError):
    """A binary-only operation applied to an n-ary dendrogram."""


class MeasureMismatchError(HCEmbedError):
    """Similarity passed where a distance is required, or vice versa."""


class MissingLabelsError(HCEmbedError):
    """Ground-truth labels required but absent."""


class InfeasibleError(HCEmbedError):
    """Projection target outside the feasible polytope."""


class DegenerateSplitError(HCEmbedError):
    """A partition collapsed to one side and could not be repaired."""


class TooLargeError(HCEmbedError):
    """Instance exceeds a brute-force oracle's size limit."""
