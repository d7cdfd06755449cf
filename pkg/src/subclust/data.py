"""Dataset representation, file I/O, preprocessing, and synthetic data.

Conventions: a data matrix is d x n with one sample per column. CSV files on
disk hold one sample per row and are transposed at load; the binary matrix
format stores the in-memory column orientation directly.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError

BINARY_MAGIC = b"SSCB"
BINARY_VERSION = 0x01
FORMATS = ("csv", "binary")


@dataclass(frozen=True)
class DataMatrix:
    """A d x n real matrix whose columns are data points."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DataError(f"data matrix must be 2-D, got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 2:
            raise DataError(f"data matrix needs d >= 1 and n >= 2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("data matrix contains non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelVector:
    """Integer cluster labels in 0..k-1, one per sample."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.k < 1:
            raise DataError(f"label vector needs k >= 1, got k={self.k}")
        if lab.size == 0:
            raise DataError("label vector is empty")
        if lab.min() < 0 or lab.max() >= self.k:
            raise DataError(f"labels must lie in 0..{self.k - 1}")
        object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class Dataset:
    """A data matrix with ground-truth labels and a preprocessing trail."""

    matrix: DataMatrix
    truth: LabelVector
    name: str = "unnamed"
    preprocessing: tuple[str, ...] = ()

    def __post_init__(self):
        if self.matrix.n != len(self.truth):
            raise DataError(
                f"matrix has {self.matrix.n} samples but labels have {len(self.truth)}"
            )


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a random union-of-subspaces instance."""

    num_subspaces: int
    subspace_dim: int
    ambient_dim: int
    points_per_subspace: int
    noise_sigma: float = 0.0
    seed: int = 0
    independent: bool = True

    def __post_init__(self):
        if self.num_subspaces < 1 or self.subspace_dim < 1:
            raise ConfigError("num_subspaces and subspace_dim must be >= 1")
        if self.ambient_dim < self.subspace_dim:
            raise ConfigError("ambient_dim must be >= subspace_dim")
        if self.points_per_subspace < self.subspace_dim:
            raise ConfigError("points_per_subspace must be >= subspace_dim")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be nonnegative")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.independent and self.ambient_dim < self.num_subspaces * self.subspace_dim:
            raise ConfigError(
                "independent subspaces need ambient_dim >= num_subspaces * subspace_dim"
            )


def remap_labels(raw: np.ndarray) -> LabelVector:
    """Map arbitrary integer labels onto contiguous 0..k-1 (sorted order)."""
    raw = np.asarray(raw, dtype=np.int64).ravel()
    uniq, contiguous = np.unique(raw, return_inverse=True)
    return LabelVector(labels=contiguous, k=len(uniq))


def _load_matrix_csv(path) -> np.ndarray:
    try:
        rows = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except (ValueError, OSError) as exc:
        if isinstance(exc, OSError):
            raise
        raise DataError(f"malformed CSV matrix file {path}: {exc}") from exc
    # one sample per row on disk -> columns in memory
    return rows.T


def load_matrix_binary(path) -> np.ndarray:
    """Read a matrix in the SSCB binary format (see save_matrix_binary)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 13 or blob[:4] != BINARY_MAGIC:
        raise DataError(f"{path} is not an SSCB binary matrix file")
    if blob[4] != BINARY_VERSION:
        raise DataError(f"unsupported SSCB version {blob[4]} in {path}")
    d, n = struct.unpack("<II", blob[5:13])
    expected = 13 + 8 * d * n
    if len(blob) != expected:
        raise DataError(
            f"{path}: expected {expected} bytes for a {d}x{n} matrix, got {len(blob)}"
        )
    flat = np.frombuffer(blob, dtype="<f8", offset=13)
    return flat.reshape((d, n), order="F").copy()


def save_matrix_binary(values: np.ndarray, path) -> None:
    """Write magic 'SSCB', version byte, u32-LE dims, then f64-LE column-major data."""
    values = np.asarray(values, dtype=np.float64)
    d, n = values.shape
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(bytes([BINARY_VERSION]))
        fh.write(struct.pack("<II", d, n))
        fh.write(values.astype("<f8").tobytes(order="F"))


def _load_labels(path) -> np.ndarray:
    try:
        raw = np.loadtxt(path, dtype=np.int64, ndmin=1)
    except (ValueError, OSError) as exc:
        if isinstance(exc, OSError):
            raise
        raise DataError(f"malformed labels file {path}: {exc}") from exc
    return raw


def load_dataset(matrix_path, labels_path, format: str = "csv", name: str | None = None) -> Dataset:
    """Load a dataset from a matrix file plus a one-integer-per-line labels file.

    Labels are remapped to contiguous 0..k-1. CSV matrices are transposed so
    that samples end up as columns.
    """
    if format not in FORMATS:
        raise ConfigError(f"unknown format {format!r}, expected one of {FORMATS}")
    if format == "csv":
        values = _load_matrix_csv(matrix_path)
    else:
        values = load_matrix_binary(matrix_path)
    if not np.all(np.isfinite(values)):
        raise DataError(f"matrix file {matrix_path} contains non-finite entries")
    truth = remap_labels(_load_labels(labels_path))
    matrix = DataMatrix(values)
    if matrix.n != len(truth):
        raise DataError(
            f"matrix {matrix_path} has {matrix.n} samples but "
            f"{labels_path} has {len(truth)} labels"
        )
    return Dataset(matrix=matrix, truth=truth, name=name or str(matrix_path))


def save_labels(labels, path) -> None:
    """Write labels as one integer per line."""
    values = labels.labels if isinstance(labels, LabelVector) else labels
    np.savetxt(path, np.asarray(values, dtype=np.int64), fmt="%d")


def save_dataset(ds: Dataset, matrix_path, labels_path, format: str = "csv") -> None:
    """Write a dataset; load_dataset inverts this (bit-exactly for binary)."""
    if format not in FORMATS:
        raise ConfigError(f"unknown format {format!r}, expected one of {FORMATS}")
    if format == "csv":
        # %.17g round-trips IEEE doubles exactly
        np.savetxt(matrix_path, ds.matrix.values.T, delimiter=",", fmt="%.17g")
    else:
        save_matrix_binary(ds.matrix.values, matrix_path)
    save_labels(ds.truth, labels_path)


def pca_project(X: DataMatrix, target_dim: int) -> DataMatrix:
    """Project onto the top principal directions of the mean-centered data.

    Returns a target_dim x n matrix whose rows are ordered by decreasing
    variance.
    """
    d, n = X.d, X.n
    if not 1 <= target_dim <= min(d, n):
        raise ConfigError(f"target_dim must be in 1..{min(d, n)}, got {target_dim}")
    centered = X.values - X.values.mean(axis=1, keepdims=True)
    U, s, Vt = np.linalg.svd(centered, full_matrices=False)
    U = U[:, :target_dim]
    # fix the sign ambiguity of each direction for reproducibility
    for j in range(target_dim):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
    return DataMatrix(U.T @ centered)


def normalize_columns(X: DataMatrix) -> DataMatrix:
    """Scale every nonzero column to unit l2 norm; zero columns pass through."""
    norms = np.linalg.norm(X.values, axis=0)
    zero = norms == 0.0
    if np.any(zero):
        warnings.warn(
            f"normalize_columns: {int(zero.sum())} zero column(s) left unchanged",
            stacklevel=2,
        )
    safe = np.where(zero, 1.0, norms)
    return DataMatrix(X.values / safe)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw a union-of-subspaces dataset, deterministic in spec.seed.

    Each subspace gets an orthonormal basis (QR of a Gaussian matrix); points
    are the basis times unit-norm random coefficients, plus isotropic Gaussian
    noise of scale noise_sigma.
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.ambient_dim
    r = spec.subspace_dim
    m = spec.points_per_subspace
    total = spec.num_subspaces * m

    values = np.zeros((d, total))
    labels = np.zeros(total, dtype=np.int64)
    for i in range(spec.num_subspaces):
        basis, _ = np.linalg.qr(rng.standard_normal((d, r)))
        coeffs = rng.standard_normal((r, m))
        coeffs /= np.linalg.norm(coeffs, axis=0, keepdims=True)
        values[:, i * m : (i + 1) * m] = basis @ coeffs
        labels[i * m : (i + 1) * m] = i
    if spec.noise_sigma > 0:
        values += spec.noise_sigma * rng.standard_normal((d, total))

    name = (
        f"synthetic(K={spec.num_subspaces},r={r},d={d},m={m},"
        f"sigma={spec.noise_sigma},seed={spec.seed})"
    )
    return Dataset(
        matrix=DataMatrix(values),
        truth=LabelVector(labels, spec.num_subspaces),
        name=name,
    )


def prepare_dataset(ds: Dataset, pca_dim: int | None = None, normalize: bool = True) -> Dataset:
    """Apply the standard preprocessing pipeline, recording each step."""
    matrix = ds.matrix
    trail = list(ds.preprocessing)
    if pca_dim is not None:
        matrix = pca_project(matrix, pca_dim)
        trail.append(f"pca:{pca_dim}")
    if normalize:
        matrix = normalize_columns(matrix)
        trail.append("normalize_columns")
    return replace(ds, matrix=matrix, preprocessing=tuple(trail))
