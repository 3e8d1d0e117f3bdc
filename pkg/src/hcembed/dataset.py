"""Embedding-vector datasets: loading, saving, and synthetic mixtures.

Two on-disk formats are supported:

* ``csv`` — UTF-8, comma separated, optional header row, optional label
  column selected by index.  Label cells may be arbitrary strings; they are
  dictionary-encoded to dense integers in first-appearance order.
* ``f32`` — little-endian raw float32 row-major payload ``X.f32`` with a JSON
  sidecar ``X.f32.json`` holding ``{"n": ..., "d": ..., "labels": path?}``.
  Labels live in a separate text file, one label per line.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyDatasetError, FormatError, InvalidParamError
from .validation import check_embedding_array, check_labels_array

SIDECAR_SUFFIX = ".json"


@dataclass
class EmbeddingSet:
    """n points in R^d with optional integer class labels.

    Attributes:
        points: float64 array of shape (n, d), all coordinates finite.
        labels: optional int64 array of length n (dense, non-negative).
        ids: optional per-point string identifiers (not serialized).
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    ids: list[str] | None = None

    def __post_init__(self):
        self.points = check_embedding_array(self.points)
        if self.labels is not None:
            self.labels = check_labels_array(self.labels, self.n)
        if self.ids is not None and len(self.ids) != self.n:
            raise InvalidParamError("ids must have one entry per point")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        if self.points.shape != other.points.shape:
            return False
        if not np.array_equal(self.points, other.points):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None and not np.array_equal(self.labels, other.labels):
            return False
        return self.ids == other.ids


def _parse_cell(cell: str, row: int, col: int) -> float:
    try:
        value = float(cell)
    except ValueError as exc:
        raise FormatError(f"non-numeric cell at row {row}, column {col}: {cell!r}") from exc
    if not math.isfinite(value):
        raise FormatError(f"non-finite cell at row {row}, column {col}: {cell!r}")
    return value


def _load_csv(path: Path, label_col: int | None, has_header: bool) -> EmbeddingSet:
    rows: list[list[float]] = []
    raw_labels: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        width = None
        for idx, record in enumerate(reader):
            if has_header and idx == 0:
                continue
            if not record:
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise FormatError(f"ragged row {idx}: expected {width} cells, got {len(record)}")
            if label_col is not None:
                if not -len(record) <= label_col < len(record):
                    raise FormatError(f"label column {label_col} out of range for row {idx}")
                record = list(record)
                raw_labels.append(record.pop(label_col))
            rows.append([_parse_cell(c, idx, j) for j, c in enumerate(record)])
    if not rows:
        raise EmptyDatasetError(f"no data rows in {path}")
    points = np.array(rows, dtype=np.float64)
    labels = None
    if label_col is not None:
        codebook: dict[str, int] = {}
        labels = np.array([codebook.setdefault(s, len(codebook)) for s in raw_labels], dtype=np.int64)
    return EmbeddingSet(points=points, labels=labels)


def _load_f32(path: Path) -> EmbeddingSet:
    sidecar = Path(str(path) + SIDECAR_SUFFIX)
    if not sidecar.exists():
        raise FormatError(f"missing sidecar {sidecar}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        n, d = int(meta["n"]), int(meta["d"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad sidecar {sidecar}: {exc}") from exc
    if n < 1:
        raise EmptyDatasetError(f"sidecar declares n={n}")
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != n * d:
        raise FormatError(f"payload holds {raw.size} floats, sidecar declares {n}x{d}")
    points = raw.reshape(n, d).astype(np.float64)
    if not np.all(np.isfinite(points)):
        raise FormatError("non-finite value in binary payload")
    labels = None
    if meta.get("labels"):
        label_path = Path(meta["labels"])
        if not label_path.is_absolute():
            label_path = path.parent / label_path
        lines = label_path.read_text(encoding="utf-8").splitlines()
        if len(lines) != n:
            raise FormatError(f"label file has {len(lines)} lines, expected {n}")
        codebook: dict[str, int] = {}
        labels = np.array([codebook.setdefault(s, len(codebook)) for s in lines], dtype=np.int64)
    return EmbeddingSet(points=points, labels=labels)


def load_dataset(path, fmt: str = "csv", *, label_col: int | None = None,
                 has_header: bool = False) -> EmbeddingSet:
    """Load an EmbeddingSet from ``path`` in the given format (``csv``/``f32``)."""
    path = Path(path)
    if not path.exists():
        raise OSError(f"no such file: {path}")
    if fmt == "csv":
        return _load_csv(path, label_col, has_header)
    if fmt == "f32":
        return _load_f32(path)
    raise InvalidParamError(f"unknown format {fmt!r}")


def save_dataset(ds: EmbeddingSet, path, fmt: str = "csv") -> None:
    """Write ``ds`` to ``path``.

    CSV cells use ``repr`` so float64 values round-trip bit-exactly.  The f32
    format stores raw float32; the round-trip is bit-exact when coordinates
    are float32-representable.  Labels (when present) go into column 0 for
    CSV and into a companion ``.labels`` file for f32.
    """
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for i in range(ds.n):
                row = [repr(float(v)) for v in ds.points[i]]
                if ds.labels is not None:
                    row.insert(0, str(int(ds.labels[i])))
                writer.writerow(row)
    elif fmt == "f32":
        ds.points.astype("<f4").tofile(path)
        meta: dict = {"n": ds.n, "d": ds.d, "labels": None}
        if ds.labels is not None:
            label_path = Path(str(path) + ".labels")
            label_path.write_text("\n".join(str(int(v)) for v in ds.labels) + "\n",
                                  encoding="utf-8")
            meta["labels"] = label_path.name
        Path(str(path) + SIDECAR_SUFFIX).write_text(json.dumps(meta), encoding="utf-8")
    else:
        raise InvalidParamError(f"unknown format {fmt!r}")


def gen_mixture(num_clusters: int, points_per_cluster: int, d: int,
                separation: float, seed: int) -> EmbeddingSet:
    """Synthesize a labeled Gaussian mixture.

    Cluster centers are drawn uniformly from the sphere of radius
    ``separation``; points get unit-variance isotropic noise.  Labels are the
    cluster index.  Deterministic given the seed.
    """
    if num_clusters < 1 or points_per_cluster < 1:
        raise InvalidParamError("cluster counts must be positive")
    if d < 1:
        raise InvalidParamError("dimension must be positive")
    if separation < 0:
        raise InvalidParamError("separation must be non-negative")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((num_clusters, d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    centers = separation * directions / norms
    n = num_clusters * points_per_cluster
    noise = rng.standard_normal((n, d))
    labels = np.repeat(np.arange(num_clusters, dtype=np.int64), points_per_cluster)
    points = centers[labels] + noise
    return EmbeddingSet(points=points, labels=labels)
