"""Long-tail subsampling and label-noise corruption.

Builds exponentially decaying class histograms, the three standard
row-stochastic corruption matrices (joint, symmetric, asymmetric), and
applies them to ground-truth labels with a seeded generator.

All randomness goes through ``numpy.random.Generator`` seeded with PCG64
(``numpy.random.default_rng``). Determinism is bit-exact for a fixed seed
within this implementation; the PRNG is named here so results can be
reproduced, but no cross-library stream compatibility is implied.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .validation import as_label_array, require_same_length

ROW_SUM_TOL = 1e-12

JOINT = "joint"
SYMMETRIC = "symmetric"
ASYMMETRIC = "asymmetric"
NOISE_KINDS = (JOINT, SYMMETRIC, ASYMMETRIC)


class CorruptionError(ValueError):
    """Raised for invalid corruption parameters or insufficient samples."""


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix T[i, j] = P(observed=j | true=i).

    ``mapping`` is the flip-target permutation and is set only for the
    asymmetric kind.
    """

    kind: str
    gamma: float
    rows: np.ndarray
    mapping: np.ndarray | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise CorruptionError(f"transition matrix must be square, got {rows.shape}")
        if np.any(rows < 0.0) or np.any(rows > 1.0):
            raise CorruptionError("transition matrix entries must lie in [0, 1]")
        if np.abs(rows.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise CorruptionError("transition matrix rows must sum to 1")
        object.__setattr__(self, "rows", rows)

    @property
    def n_classes(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class LabelAssignment:
    """Paired ground-truth and observed labels for one corruption run."""

    n_classes: int
    true_labels: np.ndarray
    observed_labels: np.ndarray
    seed: int

    def __post_init__(self):
        true = as_label_array(self.true_labels, self.n_classes, "true_labels")
        observed = as_label_array(self.observed_labels, self.n_classes, "observed_labels")
        require_same_length(true, observed, "true_labels", "observed_labels")
        object.__setattr__(self, "true_labels", true)
        object.__setattr__(self, "observed_labels", observed)


def longtail_counts(n_classes: int, imbalance_factor: float, n_max: int) -> np.ndarray:
    """Exponentially decaying per-class sample counts.

    Class c (1-indexed) gets round(n_max * IF**(-(c-1)/(C-1))) samples,
    rounded half-to-even, floored at 1 sample per class. The imbalance
    factor is the ratio of the largest target count to the smallest.
    """
    if n_classes < 2:
        raise CorruptionError("need at least 2 classes")
    if imbalance_factor < 1.0:
        raise CorruptionError("imbalance factor must be >= 1")
    if n_max < 1:
        raise CorruptionError("n_max must be >= 1")
    exponents = -np.arange(n_classes) / (n_classes - 1)
    raw = n_max * imbalance_factor**exponents
    counts = np.rint(raw).astype(np.int64)
    return np.maximum(counts, 1)


def _indices_by_class(labels_or_lists, n_classes: int | None) -> list[np.ndarray]:
    """Accepts either per-class index lists or a flat label array."""
    first = labels_or_lists[0] if len(labels_or_lists) else None
    if first is not None and np.ndim(first) > 0:
        return [np.asarray(ix, dtype=np.int64) for ix in labels_or_lists]
    labels = np.asarray(labels_or_lists, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    return [np.flatnonzero(labels == c) for c in range(n_classes)]


def subsample_longtail(
    class_indices: Sequence,
    imbalance_factor: float,
    n_max: int,
    seed: int,
    n_classes: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw a long-tailed subset, uniformly without replacement per class.

    ``class_indices`` is either a sequence of per-class sample-index
    arrays or a flat array of class labels. Returns the selected global
    indices (ascending) and the realized per-class histogram. The
    histogram depends only on (C, IF, n_max); the index set depends on
    the seed.
    """
    per_class = _indices_by_class(class_indices, n_classes)
    counts = longtail_counts(len(per_class), imbalance_factor, n_max)
    rng = np.random.default_rng(seed)
    chosen = []
    for c, (pool, want) in enumerate(zip(per_class, counts)):
        if len(pool) < want:
            raise CorruptionError(
                f"class {c} has only {len(pool)} samples, need {want} "
                f"for IF={imbalance_factor}, n_max={n_max}"
            )
        chosen.append(rng.choice(pool, size=want, replace=False))
    selected = np.sort(np.concatenate(chosen))
    return selected, counts


def build_joint_matrix(counts, gamma: float) -> TransitionMatrix:
    """Frequency-proportional noise: off-diagonal mass follows class sizes.

    Row i keeps 1-gamma on the diagonal and spreads gamma over the other
    classes proportionally to their training counts: T[i, j] =
    n_j / (N - n_i) * gamma for j != i.
    """
    _check_gamma(gamma)
    counts = np.asarray(counts, dtype=np.int64)
    if np.any(counts <= 0):
        raise CorruptionError("joint noise requires every class count > 0")
    n = int(counts.sum())
    c = len(counts)
    if c < 2:
        raise CorruptionError("need at least 2 classes")
    rows = np.empty((c, c), dtype=np.float64)
    for i in range(c):
        rest = n - counts[i]
        if rest == 0:
            raise CorruptionError(f"class {i} holds all samples; joint noise undefined")
        rows[i] = counts / rest * gamma
        rows[i, i] = 1.0 - gamma
    return TransitionMatrix(kind=JOINT, gamma=gamma, rows=rows)


def build_symmetric_matrix(n_classes: int, gamma: float) -> TransitionMatrix:
    """Uniform noise: gamma/C everywhere, plus 1-gamma on the diagonal."""
    _check_gamma(gamma)
    if n_classes < 2:
        raise CorruptionError("need at least 2 classes")
    rows = np.full((n_classes, n_classes), gamma / n_classes, dtype=np.float64)
    np.fill_diagonal(rows, gamma / n_classes + (1.0 - gamma))
    return TransitionMatrix(kind=SYMMETRIC, gamma=gamma, rows=rows)


def cyclic_mapping(n_classes: int) -> np.ndarray:
    """Default asymmetric flip target: i -> (i + 1) mod C."""
    return (np.arange(n_classes) + 1) % n_classes


def build_asymmetric_matrix(
    n_classes: int, gamma: float, mapping: np.ndarray | None = None
) -> TransitionMatrix:
    """Single-target flips: row i sends gamma to exactly one other class."""
    _check_gamma(gamma)
    if n_classes < 2:
        raise CorruptionError("need at least 2 classes")
    if mapping is None:
        mapping = cyclic_mapping(n_classes)
    mapping = np.asarray(mapping, dtype=np.int64)
    if mapping.shape != (n_classes,):
        raise CorruptionError(f"mapping must have length {n_classes}")
    if sorted(mapping.tolist()) != list(range(n_classes)):
        raise CorruptionError("mapping must be a permutation of the classes")
    fixed = np.flatnonzero(mapping == np.arange(n_classes))
    if fixed.size:
        raise CorruptionError(f"mapping has a fixed point at class {fixed[0]}")
    rows = np.zeros((n_classes, n_classes), dtype=np.float64)
    idx = np.arange(n_classes)
    rows[idx, idx] = 1.0 - gamma
    rows[idx, mapping] = gamma
    return TransitionMatrix(kind=ASYMMETRIC, gamma=gamma, rows=rows, mapping=mapping)


def apply_noise(true_labels, matrix: TransitionMatrix, seed: int) -> LabelAssignment:
    """Draw each observed label from the transition row of its true label.

    Samples are independent given the seed. Zero-probability classes are
    never produced, including at floating-point boundaries: each row's
    CDF is renormalized by its final value so the last edge is exactly 1.
    """
    c = matrix.n_classes
    true = as_label_array(true_labels, c, "true_labels")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(matrix.rows, axis=1)
    cdf = cdf / cdf[:, -1:]
    edges = cdf[true]
    u = rng.random(len(true))
    observed = (edges <= u[:, None]).sum(axis=1)
    return LabelAssignment(
        n_classes=c, true_labels=true, observed_labels=observed, seed=seed
    )


def save_label_assignment(assignment: LabelAssignment, path) -> None:
    """Text format: header line ``C N seed``, then N lines ``true observed``."""
    lines = [f"{assignment.n_classes} {len(assignment.true_labels)} {assignment.seed}"]
    for t, o in zip(assignment.true_labels, assignment.observed_labels):
        lines.append(f"{t} {o}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_label_assignment(path) -> LabelAssignment:
    text = Path(path).read_text(encoding="ascii").splitlines()
    if not text:
        raise CorruptionError(f"{path}: empty label assignment file")
    try:
        c, n, seed = (int(tok) for tok in text[0].split())
    except ValueError as exc:
        raise CorruptionError(f"{path}: malformed header {text[0]!r}") from exc
    body = [line for line in text[1:] if line.strip()]
    if len(body) != n:
        raise CorruptionError(f"{path}: header says {n} rows, found {len(body)}")
    pairs = np.array([[int(tok) for tok in line.split()] for line in body], dtype=np.int64)
    pairs = pairs.reshape(n, 2) if n else np.empty((0, 2), dtype=np.int64)
    return LabelAssignment(
        n_classes=c, true_labels=pairs[:, 0], observed_labels=pairs[:, 1], seed=seed
    )


def _check_gamma(gamma: float) -> None:
    if not 0.0 <= gamma < 1.0:
        raise CorruptionError(f"noise ratio must be in [0, 1), got {gamma}")
