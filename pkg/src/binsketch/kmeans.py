"""Spherical K-Means on unit-normalized function embeddings.

Assignment uses cosine similarity (dot product on normalized vectors) and
the update step renormalizes the cluster mean, so every centroid stays on
the unit sphere. Initialization is k-means++ with cosine distance, and an
empty cluster is repaired by stealing the point farthest from its own
centroid. Ties in assignment always resolve to the lowest cluster index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import _Reader, _write_u32, _write_u64
from .errors import ConfigError, FormatError, ValidationError

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"KHKM1"

DEFAULT_ITERATIONS = 30

_ASSIGN_CHUNK = 8192


@dataclass(eq=False)
class CentroidModel:
    """Trained centroids, one unit-length float32 row per cluster.

    ``objective`` holds the per-iteration training objective (sum of
    cosine similarities of points to their assigned centroid); it is not
    persisted by :func:`save_model`.
    """

    centroids: np.ndarray
    objective: list[float] | None = field(default=None)

    def __post_init__(self):
        self.centroids = np.ascontiguousarray(self.centroids, dtype=np.float32)
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise ValidationError(
                f"centroids must be a non-empty 2-D array, got shape {self.centroids.shape}"
            )
        if not np.all(np.isfinite(self.centroids)):
            raise ValidationError("centroids have non-finite values")
        norms = np.linalg.norm(self.centroids.astype(np.float64), axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            worst = float(np.abs(norms - 1.0).max())
            raise ValidationError(f"centroids must be unit length (max |norm-1| = {worst:.3g})")

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]


@dataclass(eq=False)
class LabelAssignment:
    """Nearest-centroid labels plus a mask of zero-norm inputs.

    Zero-norm embeddings cannot be placed on the sphere; they get label 0
    and are flagged here so callers can decide what to do with them.
    """

    labels: np.ndarray
    zero_norm: np.ndarray


def _check_matrix(X: np.ndarray, what: str) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"{what} must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError(f"{what} has non-finite values")
    return X


def _assign(Xn: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per row; argmax breaks ties at the lowest index."""
    n = Xn.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sims = np.empty(n, dtype=np.float64)
    for start in range(0, n, _ASSIGN_CHUNK):
        stop = min(start + _ASSIGN_CHUNK, n)
        block = Xn[start:stop] @ centers.T
        labels[start:stop] = np.argmax(block, axis=1)
        sims[start:stop] = block[np.arange(stop - start), labels[start:stop]]
    return labels, sims


def _repair_empty(
    Xn: np.ndarray, labels: np.ndarray, sims: np.ndarray, centers: np.ndarray
) -> None:
    """Give each empty cluster the point farthest from its own centroid.

    Only clusters with more than one member may donate, so repair never
    re-empties a cluster. All three arrays are updated in place.
    """
    k = centers.shape[0]
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        donors = np.flatnonzero(counts[labels] > 1)
        if donors.size == 0:
            break
        worst = donors[np.argmin(sims[donors])]
        counts[labels[worst]] -= 1
        labels[worst] = j
        counts[j] = 1
        centers[j] = Xn[worst]
        sims[worst] = 1.0


def _update(Xn: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    k, d = centers.shape
    sums = np.empty((k, d), dtype=np.float64)
    for col in range(d):
        sums[:, col] = np.bincount(labels, weights=Xn[:, col], minlength=k)
    norms = np.linalg.norm(sums, axis=1)
    out = centers.copy()
    ok = norms > 0.0
    out[ok] = sums[ok] / norms[ok, np.newaxis]
    return out


def train(
    embeddings: np.ndarray,
    n_clusters: int,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
) -> CentroidModel:
    """Run k-means++ initialization then a fixed number of Lloyd iterations.

    The per-iteration objective (recorded after assignment and empty-cluster
    repair) is non-decreasing; training is deterministic given ``seed``.
    """
    if n_clusters < 1:
        raise ConfigError(f"n_clusters must be >= 1, got {n_clusters}")
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    X = _check_matrix(embeddings, "training embeddings")
    if X.shape[0] == 0:
        raise ValidationError("training set is empty")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        raise ValidationError(
            f"{int((norms == 0.0).sum())} training embeddings have zero norm"
        )
    Xn = X / norms[:, np.newaxis]
    distinct = np.unique(Xn, axis=0).shape[0]
    if n_clusters > distinct:
        raise ConfigError(
            f"n_clusters={n_clusters} exceeds the {distinct} distinct directions in the data"
        )

    rng = np.random.default_rng(seed)
    n = Xn.shape[0]
    centers = np.empty((n_clusters, Xn.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = Xn[first]
    chosen = [first]
    best_sim = Xn @ centers[0]
    for j in range(1, n_clusters):
        dist = np.clip(1.0 - best_sim, 0.0, None)
        weights = dist * dist
        total = weights.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=weights / total))
        else:
            # Every remaining point coincides with a chosen center
            # (possible with duplicates); fall back to a uniform pick.
            mask = np.ones(n, dtype=bool)
            mask[chosen] = False
            candidates = np.flatnonzero(mask)
            idx = int(candidates[rng.integers(candidates.size)])
        centers[j] = Xn[idx]
        chosen.append(idx)
        np.maximum(best_sim, Xn @ centers[j], out=best_sim)

    trace: list[float] = []
    for _ in range(iterations):
        labels, sims = _assign(Xn, centers)
        _repair_empty(Xn, labels, sims, centers)
        trace.append(float(sims.sum()))
        centers = _update(Xn, labels, centers)

    return CentroidModel(centroids=centers.astype(np.float32), objective=trace)


def classify(model: CentroidModel, embeddings: np.ndarray) -> LabelAssignment:
    """Assign each embedding to its nearest centroid by cosine similarity.

    Classification is scale invariant. Zero-norm rows get label 0 and are
    flagged in the returned assignment.
    """
    X = _check_matrix(embeddings, "embeddings")
    if X.shape[0] == 0:
        return LabelAssignment(
            labels=np.empty(0, dtype=np.int64), zero_norm=np.empty(0, dtype=bool)
        )
    if X.shape[1] != model.d:
        raise ValidationError(
            f"embeddings have dimension {X.shape[1]}, model expects {model.d}"
        )
    norms = np.linalg.norm(X, axis=1)
    zero = norms == 0.0
    Xn = np.divide(X, norms[:, np.newaxis], out=np.zeros_like(X), where=~zero[:, np.newaxis])
    labels, _ = _assign(Xn, model.centroids.astype(np.float64))
    if np.any(zero):
        labels[zero] = 0
        logger.warning(
            "%d zero-norm embeddings assigned label 0", int(zero.sum())
        )
    return LabelAssignment(labels=labels, zero_norm=zero)


def save_model(model: CentroidModel, path: str) -> None:
    """Write centroids in the float32 container format (magic KHKM1).

    Entry ids are the decimal cluster indices in order.
    """
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        _write_u32(fh, model.d)
        _write_u64(fh, model.n_clusters)
        for idx in range(model.n_clusters):
            encoded = str(idx).encode("ascii")
            _write_u32(fh, len(encoded))
            fh.write(encoded)
            fh.write(model.centroids[idx].astype("<f4", copy=False).tobytes())


def load_model(path: str) -> CentroidModel:
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), path)
    if reader.take(len(MODEL_MAGIC)) != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {MODEL_MAGIC!r}")
    d = reader.u32()
    if d < 1:
        raise FormatError(f"{path}: dimension must be >= 1, got {d}")
    count = reader.u64()
    if count < 1:
        raise FormatError(f"{path}: model must have at least one centroid")
    rows = np.empty((count, d), dtype=np.float32)
    for idx in range(count):
        length = reader.u32()
        name = reader.take(length).decode("ascii", errors="replace")
        if name != str(idx):
            raise FormatError(f"{path}: centroid {idx} has unexpected id {name!r}")
        rows[idx] = np.frombuffer(reader.take(4 * d), dtype="<f4")
    reader.done()
    return CentroidModel(centroids=rows)
