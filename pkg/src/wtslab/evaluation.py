"""Top-1 accuracy metrics with head/medium/tail breakdowns.

Evaluation always scores raw model outputs: no prior adjustment is
applied at test time. Group membership comes from training-set class
counts, ranked into terciles (head = most frequent third, rounded up).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import EmbeddingDataset
from .teacher import TeacherHead, similarities, text_predicted_labels

HEAD = "head"
MEDIUM = "medium"
TAIL = "tail"
GROUPS = (HEAD, MEDIUM, TAIL)


@dataclass(frozen=True)
class RunMetrics:
    overall_accuracy: float
    per_class_accuracy: np.ndarray
    group_accuracy: dict
    confusion: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "overall": self.overall_accuracy,
            "per_class": self.per_class_accuracy.tolist(),
            "groups": dict(self.group_accuracy),
            "confusion": self.confusion.tolist(),
        }


def group_split(train_counts) -> np.ndarray:
    """Assign each class to head/medium/tail by training-count rank.

    Classes sort by count descending, ties broken by class index; the
    first ceil(C/3) are head, the last floor(C/3) tail, the rest medium.
    Fewer than 3 classes all count as head.
    """
    counts = np.asarray(train_counts, dtype=np.int64)
    c = counts.size
    groups = np.empty(c, dtype=object)
    if c < 3:
        groups[:] = HEAD
        return groups
    order = np.lexsort((np.arange(c), -counts))
    n_head = -(-c // 3)
    n_tail = c // 3
    groups[order[:n_head]] = HEAD
    groups[order[n_head:c - n_tail]] = MEDIUM
    groups[order[c - n_tail:]] = TAIL
    return groups


def confusion_matrix(predicted, true, n_classes: int) -> np.ndarray:
    """Counts[i, j] = samples with true class i predicted as j."""
    predicted = np.asarray(predicted, dtype=np.int64)
    true = np.asarray(true, dtype=np.int64)
    if predicted.shape != true.shape:
        raise ValueError("predicted and true labels differ in length")
    flat = true * n_classes + predicted
    counts = np.bincount(flat, minlength=n_classes * n_classes)
    return counts.reshape(n_classes, n_classes)


def metrics_from_predictions(predicted, true, n_classes: int, group_map) -> RunMetrics:
    confusion = confusion_matrix(predicted, true, n_classes)
    row_totals = confusion.sum(axis=1)
    diag = np.diag(confusion).astype(np.float64)
    per_class = np.divide(diag, row_totals, out=np.zeros(n_classes), where=row_totals > 0)
    overall = float(diag.sum() / confusion.sum())
    group_map = np.asarray(group_map, dtype=object)
    group_acc = {}
    for g in GROUPS:
        members = group_map == g
        total = row_totals[members].sum()
        group_acc[g] = float(diag[members].sum() / total) if total else 0.0
    return RunMetrics(
        overall_accuracy=overall,
        per_class_accuracy=per_class,
        group_accuracy=group_acc,
        confusion=confusion,
    )


def evaluate(model, dataset: EmbeddingDataset, group_map=None) -> RunMetrics:
    """Top-1 metrics for a probe or teacher on a dataset with ground truth.

    A probe is scored on its raw logits; a TeacherHead on its cosine
    similarities. ``group_map`` defaults to a split of the dataset's own
    observed-label counts.
    """
    if dataset.true_labels is None:
        raise ValueError("evaluation requires true labels")
    if isinstance(model, TeacherHead):
        scores = similarities(model, dataset.image_embeddings)
    elif hasattr(model, "logits"):
        scores = model.logits(dataset.image_embeddings)
    else:
        raise TypeError(f"cannot evaluate object of type {type(model).__name__}")
    predicted = text_predicted_labels(scores)
    if group_map is None:
        counts = np.bincount(dataset.observed_labels, minlength=dataset.n_classes)
        group_map = group_split(counts)
    return metrics_from_predictions(
        predicted, dataset.true_labels, dataset.n_classes, group_map
    )
