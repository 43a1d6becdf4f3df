"""Loss kernels with analytic gradients.

Everything here is pure float64 numpy. Softmax and cross entropy are
computed through log-sum-exp so no probability is ever materialized just
to be logged. Batch reduction is the arithmetic mean, which keeps
learning-rate semantics independent of batch size.

Gradient conventions: all logit gradients are with respect to the raw
student logits and already include the 1/B mean factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_float_matrix, as_label_array, check_distribution_rows

BASE_CE = "ce"
BASE_LA = "la"
BASE_LOSSES = (BASE_CE, BASE_LA)


class StudentProbe:
    """Linear classifier over embeddings: logits z = W f + b."""

    def __init__(self, weights, bias):
        self.weights = as_float_matrix(weights, "weights").copy()
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"bias shape {bias.shape} does not match {self.weights.shape[0]} classes"
            )
        self.bias = bias.copy()

    @classmethod
    def zeros(cls, n_classes: int, dim: int) -> "StudentProbe":
        return cls(np.zeros((n_classes, dim)), np.zeros(n_classes))

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def logits(self, image_embeddings) -> np.ndarray:
        x = as_float_matrix(image_embeddings, "image_embeddings")
        if x.shape[1] != self.dim:
            raise ValueError(f"embedding dim {x.shape[1]} != probe dim {self.dim}")
        return x @ self.weights.T + self.bias

    def copy(self) -> "StudentProbe":
        return StudentProbe(self.weights, self.bias)


@dataclass(frozen=True)
class ClassPrior:
    """Strictly positive class marginals summing to one."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        if pi.ndim != 1 or pi.size < 2:
            raise ValueError("prior must be a vector of at least 2 classes")
        if np.any(pi <= 0.0):
            raise ValueError("prior entries must be strictly positive")
        if abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError(f"prior must sum to 1, got {pi.sum()!r}")
        object.__setattr__(self, "pi", pi)

    @classmethod
    def from_observed_labels(cls, labels, n_classes: int) -> "ClassPrior":
        """Estimate from observed-label counts with +1 Laplace smoothing.

        Smoothing keeps the prior strictly positive even for classes that
        the corrupted labels never hit.
        """
        labels = as_label_array(labels, n_classes)
        counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
        smoothed = counts + 1.0
        return cls(pi=smoothed / smoothed.sum())


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = as_label_array(labels, n_classes)
    out = np.zeros((len(labels), n_classes), dtype=np.float64)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def entropy_rows(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy per row, with 0 log 0 = 0."""
    p = np.asarray(probs, dtype=np.float64)
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def mixed_target(observed_onehot, teacher_probs, a: float) -> np.ndarray:
    """Per-class blend a * observed + (1 - a) * teacher; rows stay distributions."""
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"mixing coefficient must be in [0, 1], got {a}")
    p_o = as_float_matrix(observed_onehot, "observed_onehot")
    p_t = as_float_matrix(teacher_probs, "teacher_probs")
    if p_o.shape != p_t.shape:
        raise ValueError(f"target shapes differ: {p_o.shape} vs {p_t.shape}")
    return a * p_o + (1.0 - a) * p_t


def ce_loss_and_grad(logits, targets) -> tuple[float, np.ndarray]:
    """Batch-mean cross entropy against target distributions.

    Returns the scalar loss and its gradient with respect to the logits,
    (softmax(z) - p) / B per row.
    """
    z = as_float_matrix(logits, "logits")
    p = as_float_matrix(targets, "targets")
    if z.shape != p.shape:
        raise ValueError(f"logits shape {z.shape} != targets shape {p.shape}")
    check_distribution_rows(p, "targets")
    b = z.shape[0]
    log_q = log_softmax(z)
    loss = float(-(p * log_q).sum() / b)
    grad = (softmax(z) - p) / b
    return loss, grad


def adjust_logits_la(logits, prior: ClassPrior) -> np.ndarray:
    """Add log class-priors to logits (training-time rebalancing).

    Evaluation always uses raw logits; the adjustment only reshapes the
    training gradient.
    """
    z = as_float_matrix(logits, "logits")
    if z.shape[1] != prior.pi.size:
        raise ValueError(f"logit width {z.shape[1]} != prior size {prior.pi.size}")
    return z + np.log(prior.pi)


def kl_teacher_loss_and_grad(
    student_logits, teacher_probs
) -> tuple[float, np.ndarray, float]:
    """Batch-mean KL(teacher || student) and both gradients.

    Returns (loss, gradient wrt student logits, gradient wrt the
    teacher's log-temperature). The logit gradient is
    (softmax(z) - p_t) / B: the teacher entropy term is constant in z.

    The temperature gradient uses the chain rule through the tempered
    softmax. With g_c = log(p_t_c / p_I_c) and the per-row KL value k,
    d KL / d log_T = -sum_c p_t_c (g_c - k) log p_t_c, averaged over the
    batch. (The scaled similarities equal log p_t up to a per-row
    constant, which vanishes against the centered factor.)
    """
    z = as_float_matrix(student_logits, "student_logits")
    p_t = as_float_matrix(teacher_probs, "teacher_probs")
    if z.shape != p_t.shape:
        raise ValueError(f"logits shape {z.shape} != teacher shape {p_t.shape}")
    check_distribution_rows(p_t, "teacher probabilities")
    b = z.shape[0]
    log_q = log_softmax(z)
    safe_log_pt = np.log(np.where(p_t > 0.0, p_t, 1.0))
    g = np.where(p_t > 0.0, safe_log_pt - log_q, 0.0)
    kl_rows = (p_t * g).sum(axis=1)
    loss = float(kl_rows.sum() / b)
    grad_logits = (softmax(z) - p_t) / b
    centered = g - kl_rows[:, None]
    grad_log_temp = float(-(p_t * centered * safe_log_pt).sum() / b)
    return loss, grad_logits, grad_log_temp


def combined_loss(
    student_logits,
    observed_onehot,
    teacher_probs,
    a: float,
    base: str = BASE_CE,
    prior: ClassPrior | None = None,
) -> tuple[float, np.ndarray, float]:
    """Mix the observed-label loss with the teacher KL term.

    Returns (loss, gradient wrt raw student logits, gradient wrt the
    teacher log-temperature); the temperature gradient arrives already
    scaled by 1 - a. With base "ce" the logit gradient coincides with
    plain cross entropy against the blended target a * p_o + (1 - a) * p_t.
    With base "la" the observed branch runs on prior-adjusted logits while
    the KL branch keeps the raw student distribution.
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"mixing coefficient must be in [0, 1], got {a}")
    if base not in BASE_LOSSES:
        raise ValueError(f"base loss must be one of {BASE_LOSSES}, got {base!r}")
    z = as_float_matrix(student_logits, "student_logits")
    if base == BASE_LA:
        if prior is None:
            raise ValueError("base 'la' requires a class prior")
        observed_logits = adjust_logits_la(z, prior)
    else:
        observed_logits = z
    loss_o, grad_o = ce_loss_and_grad(observed_logits, observed_onehot)
    loss_t, grad_t, grad_temp = kl_teacher_loss_and_grad(z, teacher_probs)
    loss = a * loss_o + (1.0 - a) * loss_t
    grad_logits = a * grad_o + (1.0 - a) * grad_t
    return loss, grad_logits, (1.0 - a) * grad_temp


def la_gradient_difference(logits, margins) -> np.ndarray:
    """Per-class gap softmax(z - m) - softmax(z); diagnostic only.

    Entry y is the change the margins cause in the target-class gradient
    of cross entropy. A strictly larger margin than every other class
    forces a negative entry (the positive learning signal grows); the
    strictly smallest margin forces a positive one.
    """
    z = as_float_matrix(logits, "logits")
    m = np.asarray(margins, dtype=np.float64)
    if m.shape != (z.shape[1],):
        raise ValueError(f"margins shape {m.shape} != ({z.shape[1]},)")
    if not np.all(np.isfinite(m)):
        raise ValueError("margins must be finite")
    return softmax(z - m) - softmax(z)
