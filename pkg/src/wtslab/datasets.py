"""Embedding datasets: in-memory container, binary file format, synthesis.

A dataset packages N image-feature vectors with observed (possibly
corrupted) labels, optional ground-truth labels, one prototype vector per
class, and class names. It stands in for a frozen vision-language
encoder pair: the prototypes play the role of encoded label text, the
image embeddings the role of encoded images.

Binary format ``WTSEMB1`` (little-endian):

    8 bytes   magic ``WTSEMB1\\0``
    u32       N   number of samples
    u32       D   embedding dimension
    u32       C   number of classes
    u8        has_true_labels (0 or 1)
    N*D f32   image embeddings, row-major
    N u32     observed labels
    N u32     true labels            (only if has_true_labels)
    C*D f32   prototype ("text") embeddings, row-major
    C times   class name: u16 byte length + UTF-8 bytes

Arrays are float32 on disk and float64 in memory; the widening is exact,
so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .validation import as_float_matrix, as_label_array, require_same_length

MAGIC = b"WTSEMB1\x00"
_HEADER = struct.Struct("<III B")


class DatasetFormatError(ValueError):
    """Raised when a dataset file violates the binary format or invariants."""


@dataclass
class EmbeddingDataset:
    """Immutable-by-convention bundle of embeddings and labels.

    true_labels is None for datasets whose ground truth is unknown
    (e.g. exported from a real noisy corpus).
    """

    image_embeddings: np.ndarray
    observed_labels: np.ndarray
    text_embeddings: np.ndarray
    class_names: list[str]
    true_labels: np.ndarray | None = None

    def __post_init__(self):
        self.image_embeddings = as_float_matrix(self.image_embeddings, "image_embeddings")
        self.text_embeddings = as_float_matrix(self.text_embeddings, "text_embeddings")
        n, d = self.image_embeddings.shape
        c = self.text_embeddings.shape[0]
        if n == 0:
            raise DatasetFormatError("empty dataset (N = 0)")
        if d < 2:
            raise DatasetFormatError(f"embedding dimension must be >= 2, got {d}")
        if self.text_embeddings.shape[1] != d:
            raise DatasetFormatError(
                f"prototype dimension {self.text_embeddings.shape[1]} != image dimension {d}"
            )
        if len(self.class_names) != c:
            raise DatasetFormatError(
                f"got {len(self.class_names)} class names for {c} classes"
            )
        if np.any(np.linalg.norm(self.text_embeddings, axis=1) == 0.0):
            raise DatasetFormatError("prototype with zero norm")
        try:
            self.observed_labels = as_label_array(self.observed_labels, c, "observed_labels")
            if self.true_labels is not None:
                self.true_labels = as_label_array(self.true_labels, c, "true_labels")
        except ValueError as exc:
            raise DatasetFormatError(f"label out of range: {exc}") from exc
        require_same_length(self.observed_labels, self.image_embeddings,
                            "observed_labels", "image_embeddings")
        if self.true_labels is not None:
            require_same_length(self.true_labels, self.image_embeddings,
                                "true_labels", "image_embeddings")

    @property
    def n_samples(self) -> int:
        return self.image_embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.image_embeddings.shape[1]

    @property
    def n_classes(self) -> int:
        return self.text_embeddings.shape[0]

    def subset(self, indices) -> "EmbeddingDataset":
        """New dataset restricted to the given sample indices."""
        indices = np.asarray(indices, dtype=np.int64)
        return EmbeddingDataset(
            image_embeddings=self.image_embeddings[indices],
            observed_labels=self.observed_labels[indices],
            text_embeddings=self.text_embeddings,
            class_names=list(self.class_names),
            true_labels=None if self.true_labels is None else self.true_labels[indices],
        )

    def with_observed_labels(self, observed) -> "EmbeddingDataset":
        return EmbeddingDataset(
            image_embeddings=self.image_embeddings,
            observed_labels=observed,
            text_embeddings=self.text_embeddings,
            class_names=list(self.class_names),
            true_labels=self.true_labels,
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic stand-in for encoder features.

    Class centroids are drawn on the unit sphere; samples scatter around
    them with isotropic Gaussian noise of scale ``cluster_spread`` before
    re-normalization. ``teacher_quality`` in (0, 1] blends each prototype
    between its class centroid (1.0) and an unrelated random direction.
    """

    n_classes: int
    dim: int
    samples_per_class: int
    cluster_spread: float
    teacher_quality: float
    seed: int

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if self.cluster_spread <= 0.0:
            raise ValueError("cluster_spread must be positive")
        if not 0.0 < self.teacher_quality <= 1.0:
            raise ValueError("teacher_quality must be in (0, 1]")


def normalize_rows(matrix) -> np.ndarray:
    """Scale each row to unit L2 norm; rejects zero rows."""
    m = as_float_matrix(matrix, "matrix")
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError(f"cannot normalize zero row at index {int(np.argmin(norms))}")
    return m / norms


def generate_synthetic(spec: SyntheticSpec) -> EmbeddingDataset:
    """Deterministic synthetic dataset; same spec gives identical arrays.

    Draw order on the PCG64 stream: centroids, prototype perturbations,
    then per-class sample noise in class order. Observed labels start
    equal to the ground truth; corruption is a separate step.
    """
    rng = np.random.default_rng(spec.seed)
    c, d, n_pc = spec.n_classes, spec.dim, spec.samples_per_class
    centroids = normalize_rows(rng.standard_normal((c, d)))
    jitter = normalize_rows(rng.standard_normal((c, d)))
    prototypes = normalize_rows(
        spec.teacher_quality * centroids + (1.0 - spec.teacher_quality) * jitter
    )
    images = np.empty((c * n_pc, d), dtype=np.float64)
    labels = np.repeat(np.arange(c, dtype=np.int64), n_pc)
    for k in range(c):
        noise = spec.cluster_spread * rng.standard_normal((n_pc, d))
        images[k * n_pc:(k + 1) * n_pc] = centroids[k] + noise
    images = normalize_rows(images)
    names = [f"class_{k}" for k in range(c)]
    return EmbeddingDataset(
        image_embeddings=images,
        observed_labels=labels.copy(),
        text_embeddings=prototypes,
        class_names=names,
        true_labels=labels,
    )


def split_per_class(
    dataset: EmbeddingDataset, holdout_per_class: int
) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    """Split by true label: last ``holdout_per_class`` of each class held out.

    Both halves share prototypes and class names, so a held-out test set
    lives in the same feature space as the training pool.
    """
    if dataset.true_labels is None:
        raise ValueError("split requires true labels")
    rest, held = [], []
    for k in range(dataset.n_classes):
        members = np.flatnonzero(dataset.true_labels == k)
        if len(members) <= holdout_per_class:
            raise ValueError(
                f"class {k} has {len(members)} samples, cannot hold out {holdout_per_class}"
            )
        rest.append(members[:-holdout_per_class])
        held.append(members[-holdout_per_class:])
    return dataset.subset(np.concatenate(rest)), dataset.subset(np.concatenate(held))


def save_dataset(dataset: EmbeddingDataset, path) -> None:
    """Write the ``WTSEMB1`` binary format."""
    n, d, c = dataset.n_samples, dataset.dim, dataset.n_classes
    has_true = dataset.true_labels is not None
    parts = [MAGIC, _HEADER.pack(n, d, c, 1 if has_true else 0)]
    parts.append(dataset.image_embeddings.astype("<f4").tobytes(order="C"))
    parts.append(dataset.observed_labels.astype("<u4").tobytes())
    if has_true:
        parts.append(dataset.true_labels.astype("<u4").tobytes())
    parts.append(dataset.text_embeddings.astype("<f4").tobytes(order="C"))
    for name in dataset.class_names:
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise DatasetFormatError(f"class name too long ({len(encoded)} bytes)")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.blob):
            raise DatasetFormatError(
                f"{self.path}: truncated file while reading {what} "
                f"(need {count} bytes at offset {self.pos}, have {len(self.blob) - self.pos})"
            )
        out = self.blob[self.pos:self.pos + count]
        self.pos += count
        return out


def load_dataset(path) -> EmbeddingDataset:
    """Read a ``WTSEMB1`` file, validating format and invariants."""
    blob = Path(path).read_bytes()
    r = _Reader(blob, path)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    n, d, c, has_true = _HEADER.unpack(r.take(_HEADER.size, "header"))
    if n == 0:
        raise DatasetFormatError(f"{path}: empty dataset (N = 0)")
    if has_true not in (0, 1):
        raise DatasetFormatError(f"{path}: has_true_labels flag must be 0 or 1, got {has_true}")
    images = np.frombuffer(r.take(4 * n * d, "image embeddings"), dtype="<f4")
    images = images.reshape(n, d).astype(np.float64)
    if not np.all(np.isfinite(images)):
        raise DatasetFormatError(f"{path}: NaN or Inf in image embeddings")
    observed = np.frombuffer(r.take(4 * n, "observed labels"), dtype="<u4").astype(np.int64)
    true = None
    if has_true:
        true = np.frombuffer(r.take(4 * n, "true labels"), dtype="<u4").astype(np.int64)
    text = np.frombuffer(r.take(4 * c * d, "prototype embeddings"), dtype="<f4")
    text = text.reshape(c, d).astype(np.float64)
    if not np.all(np.isfinite(text)):
        raise DatasetFormatError(f"{path}: NaN or Inf in prototype embeddings")
    names = []
    for k in range(c):
        (length,) = struct.unpack("<H", r.take(2, f"class name {k} length"))
        names.append(r.take(length, f"class name {k}").decode("utf-8"))
    if r.pos != len(blob):
        raise DatasetFormatError(f"{path}: {len(blob) - r.pos} trailing bytes after payload")
    for labels, what in ((observed, "observed"), (true, "true")):
        if labels is not None and labels.size and labels.max() >= c:
            raise DatasetFormatError(
                f"{path}: label out of range in {what} labels "
                f"(found {labels.max()}, C = {c})"
            )
    return EmbeddingDataset(
        image_embeddings=images,
        observed_labels=observed,
        text_embeddings=text,
        class_names=names,
        true_labels=true,
    )
