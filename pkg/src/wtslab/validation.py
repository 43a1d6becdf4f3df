"""Shared checks for array-shaped inputs.

All numeric computation in this package runs in float64; these helpers
coerce and validate once at module boundaries so the kernels can assume
clean inputs.
"""

from __future__ import annotations

import numpy as np


def as_float_matrix(x, name: str) -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_label_array(x, n_classes: int, name: str = "labels") -> np.ndarray:
    """Coerce to a 1-D int64 array of class indices in [0, n_classes)."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        rounded = np.rint(arr)
        if not np.array_equal(rounded, arr):
            raise ValueError(f"{name} must be integer class indices")
        arr = rounded
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
        raise ValueError(
            f"{name} out of range: expected [0, {n_classes}), "
            f"found [{arr.min()}, {arr.max()}]"
        )
    return arr


def check_distribution_rows(p: np.ndarray, name: str, atol: float = 1e-8) -> None:
    """Require every row of ``p`` to be a probability distribution."""
    if np.any(p < -atol):
        raise ValueError(f"{name} has negative entries")
    sums = p.sum(axis=1)
    if not np.allclose(sums, 1.0, atol=atol):
        worst = np.abs(sums - 1.0).max()
        raise ValueError(f"{name} rows must sum to 1 (max deviation {worst:.3g})")


def require_same_length(a, b, name_a: str, name_b: str) -> None:
    if len(a) != len(b):
        raise ValueError(f"{name_a} and {name_b} differ in length: {len(a)} vs {len(b)}")
