"""Prototype-based teacher: cosine scores, tempered softmax, overlap ratio.

The teacher scores a sample by cosine similarity against one frozen
prototype per class. Its only trainable state is a scalar temperature,
stored as a log so positivity is structural. Predicted labels come from
the raw similarities and are therefore temperature-invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_float_matrix, check_distribution_rows, require_same_length


class TeacherHead:
    """Frozen class prototypes plus a learnable softmax temperature."""

    def __init__(self, prototypes, log_temperature: float = 0.0):
        protos = as_float_matrix(prototypes, "prototypes").copy()
        if np.any(np.linalg.norm(protos, axis=1) == 0.0):
            raise ValueError("prototypes must have nonzero norm")
        protos.setflags(write=False)
        self._prototypes = protos
        self.log_temperature = float(log_temperature)

    @property
    def prototypes(self) -> np.ndarray:
        return self._prototypes

    @property
    def temperature(self) -> float:
        return float(np.exp(self.log_temperature))

    @property
    def n_classes(self) -> int:
        return self._prototypes.shape[0]

    @property
    def dim(self) -> int:
        return self._prototypes.shape[1]


@dataclass(frozen=True)
class TeacherOutput:
    similarities: np.ndarray
    probabilities: np.ndarray
    predicted_labels: np.ndarray


def similarities(head: TeacherHead, image_embeddings) -> np.ndarray:
    """Cosine similarity of each embedding against every prototype, in [-1, 1]."""
    x = as_float_matrix(image_embeddings, "image_embeddings")
    if x.shape[1] != head.dim:
        raise ValueError(f"embedding dim {x.shape[1]} != prototype dim {head.dim}")
    x_norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(x_norms == 0.0):
        raise ValueError("image embedding with zero norm")
    t_norms = np.linalg.norm(head.prototypes, axis=1)
    sims = (x / x_norms) @ (head.prototypes / t_norms[:, None]).T
    return np.clip(sims, -1.0, 1.0)


def teacher_probs(head: TeacherHead, sims) -> np.ndarray:
    """Row-wise softmax of similarities / temperature."""
    s = as_float_matrix(sims, "similarities")
    scaled = s / head.temperature
    shifted = scaled - scaled.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    check_distribution_rows(probs, "teacher probabilities", atol=1e-10)
    return probs


def text_predicted_labels(scores) -> np.ndarray:
    """Per-row argmax; ties resolve to the lowest class index.

    Accepts either raw similarities or softmax probabilities: softmax is
    strictly increasing per row, so the argmax is the same.
    """
    s = as_float_matrix(scores, "scores")
    if s.shape[1] == 0:
        raise ValueError("scores must have at least one column")
    return np.argmax(s, axis=1).astype(np.int64)


def overlap_ratio(predicted, observed) -> float:
    """Fraction of positions where predicted and observed labels agree."""
    p = np.asarray(predicted)
    o = np.asarray(observed)
    require_same_length(p, o, "predicted", "observed")
    if p.size == 0:
        raise ValueError("overlap ratio undefined for an empty batch")
    return float(np.count_nonzero(p == o) / p.size)


def predict(head: TeacherHead, image_embeddings) -> TeacherOutput:
    """Bundle similarities, tempered probabilities, and predicted labels."""
    sims = similarities(head, image_embeddings)
    return TeacherOutput(
        similarities=sims,
        probabilities=teacher_probs(head, sims),
        predicted_labels=text_predicted_labels(sims),
    )
