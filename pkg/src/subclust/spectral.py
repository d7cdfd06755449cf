"""Spectral clustering of an affinity matrix plus the accuracy metric.

The default pipeline is the symmetric-normalized embedding (top eigenvectors
of D^{-1/2} W D^{-1/2}, rows renormalized) followed by k-means++ with
restarts. All randomness comes from an explicit seed, so runs are exactly
repeatable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .affinity import AffinityMatrix
from .data import LabelVector
from .errors import ConfigError, DataError, NumericalError

LAPLACIANS = ("symmetric_normalized", "random_walk", "unnormalized")


@dataclass(frozen=True)
class SpectralConfig:
    """Settings of the spectral clustering step."""

    n_clusters: int
    seed: int = 0
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 100
    laplacian: str = "symmetric_normalized"

    def __post_init__(self):
        if self.n_clusters < 2:
            raise ConfigError("n_clusters must be >= 2")
        if self.kmeans_restarts < 1:
            raise ConfigError("kmeans_restarts must be >= 1")
        if self.kmeans_max_iter < 1:
            raise ConfigError("kmeans_max_iter must be >= 1")
        if self.laplacian not in LAPLACIANS:
            raise ConfigError(f"laplacian must be one of {LAPLACIANS}")


@dataclass(frozen=True)
class ClusteringOutcome:
    """Predicted labels with the k-means inertia and optional accuracy."""

    labels: LabelVector
    kmeans_inertia: float
    accuracy_percent: float | None = None


def _affinity_values(W) -> np.ndarray:
    if isinstance(W, AffinityMatrix):
        return W.values
    return AffinityMatrix(values=np.asarray(W, dtype=np.float64), method="sm").values


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    # make the largest-magnitude entry of each eigenvector positive
    for j in range(vectors.shape[1]):
        i = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[i, j] < 0:
            vectors[:, j] = -vectors[:, j]
    return vectors


def spectral_embed(W, cfg: SpectralConfig) -> np.ndarray:
    """Embed the graph nodes as rows of the leading Laplacian eigenvectors.

    For the symmetric-normalized variant the rows are scaled to unit norm;
    zero-degree nodes get an all-zero row and a warning.
    """
    values = _affinity_values(W)
    n = values.shape[0]
    if cfg.n_clusters > n:
        raise ConfigError(f"n_clusters={cfg.n_clusters} exceeds the {n} samples")
    degrees = values.sum(axis=1)
    isolated = degrees == 0.0
    if np.any(isolated):
        warnings.warn(
            f"spectral_embed: {int(isolated.sum())} zero-degree node(s) get zero embeddings",
            stacklevel=2,
        )
    try:
        if cfg.laplacian == "unnormalized":
            lap = np.diag(degrees) - values
            eigvals, eigvecs = np.linalg.eigh(lap)
            embedding = _canonical_signs(eigvecs[:, : cfg.n_clusters].copy())
        else:
            inv_root = np.zeros(n)
            inv_root[~isolated] = 1.0 / np.sqrt(degrees[~isolated])
            sym = inv_root[:, None] * values * inv_root[None, :]
            sym = (sym + sym.T) / 2.0
            eigvals, eigvecs = np.linalg.eigh(sym)
            top = eigvecs[:, -cfg.n_clusters :][:, ::-1].copy()
            top_vals = eigvals[-cfg.n_clusters :][::-1]
            # a numerically-zero eigenvalue spans an arbitrary basis; drop it
            top[:, np.abs(top_vals) <= 1e-12 * max(1.0, np.abs(eigvals).max())] = 0.0
            top = _canonical_signs(top)
            if cfg.laplacian == "random_walk":
                embedding = inv_root[:, None] * top
            else:
                norms = np.linalg.norm(top, axis=1)
                safe = np.where(norms > 0, norms, 1.0)
                embedding = top / safe[:, None]
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of the Laplacian failed: {exc}") from exc
    embedding[isolated, :] = 0.0
    return embedding


def _kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    closest = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            probs = closest / total
            idx = int(rng.choice(n, p=probs))
        else:  # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        centers[j] = points[idx]
        closest = np.minimum(closest, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _assign(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = (
        np.sum(points * points, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    labels = np.argmin(d2, axis=1)
    return labels, np.maximum(d2[np.arange(points.shape[0]), labels], 0.0)


def _lloyd(points, k, rng, max_iter):
    centers = _kmeans_plus_plus(points, k, rng)
    labels, dist = _assign(points, centers)
    for _ in range(max_iter):
        for j in range(k):
            mask = labels == j
            if np.any(mask):
                centers[j] = points[mask].mean(axis=0)
            else:  # re-seed an empty cluster at the worst-served point
                centers[j] = points[int(np.argmax(dist))]
        new_labels, dist = _assign(points, centers)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return labels, float(dist.sum())


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int,
    restarts: int = 10,
    max_iter: int = 100,
) -> np.ndarray:
    """k-means++ with restarts; returns the labels of the best-inertia run.

    Deterministic for fixed (points, k, seed, restarts).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ConfigError("points must be a 2-D array")
    if not 1 <= k <= points.shape[0]:
        raise ConfigError(f"k must be in 1..{points.shape[0]}, got {k}")
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(max(1, restarts)):
        labels, inertia = _lloyd(points, k, rng, max_iter)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels


def labels_inertia(points: np.ndarray, labels: np.ndarray) -> float:
    """Within-cluster sum of squared distances to centroids."""
    points = np.asarray(points, dtype=np.float64)
    total = 0.0
    for j in np.unique(labels):
        block = points[labels == j]
        total += float(np.sum((block - block.mean(axis=0)) ** 2))
    return total


def cluster(W, cfg: SpectralConfig) -> LabelVector:
    """Spectral embedding followed by k-means; returns predicted labels."""
    return evaluate_clustering(W, cfg).labels


def _label_array(labels) -> np.ndarray:
    if isinstance(labels, LabelVector):
        return labels.labels
    return np.asarray(labels, dtype=np.int64).ravel()


def clustering_accuracy(pred, truth) -> float:
    """Percent of samples matched under the best one-to-one cluster pairing.

    The pairing is the optimal assignment on the contingency table, solved by
    the Hungarian method.
    """
    p = _label_array(pred)
    t = _label_array(truth)
    if p.size != t.size:
        raise DataError(f"label lengths differ: {p.size} vs {t.size}")
    if p.size == 0:
        raise DataError("empty label vectors")
    p_ids, p_idx = np.unique(p, return_inverse=True)
    t_ids, t_idx = np.unique(t, return_inverse=True)
    k = max(len(p_ids), len(t_ids))
    contingency = np.zeros((k, k), dtype=np.int64)
    np.add.at(contingency, (p_idx, t_idx), 1)
    rows, cols = linear_sum_assignment(contingency, maximize=True)
    matched = int(contingency[rows, cols].sum())
    return 100.0 * matched / p.size


def evaluate_clustering(W, cfg: SpectralConfig, truth: LabelVector | None = None) -> ClusteringOutcome:
    """Cluster W and score against ground truth when it is supplied."""
    embedding = spectral_embed(W, cfg)
    labels = kmeans(
        embedding,
        cfg.n_clusters,
        seed=cfg.seed,
        restarts=cfg.kmeans_restarts,
        max_iter=cfg.kmeans_max_iter,
    )
    accuracy = clustering_accuracy(labels, truth) if truth is not None else None
    return ClusteringOutcome(
        labels=LabelVector(labels=labels, k=cfg.n_clusters),
        kmeans_inertia=labels_inertia(embedding, labels),
        accuracy_percent=accuracy,
    )
