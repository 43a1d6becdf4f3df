"""Seeded mini-batch SGD for the linear probe with the supervision switch.

Per batch: predict labels with the frozen teacher, measure the overlap
ratio OR against the observed labels, and if OR drops below the
threshold tau, blend the observed-label loss with the teacher KL term
using a Beta-sampled coefficient. Otherwise train on the observed-label
loss alone.

tau sentinels: any value < 0 disables the switch (never fires); any
value > 1 forces it every batch.

One PCG64 generator seeded from the config drives everything random:
per-epoch shuffles, then Beta draws in batch order. Identical
(dataset, config) pairs produce bitwise-identical results.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation, losses, teacher as teacher_mod
from .datasets import EmbeddingDataset


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or update turns non-finite."""


@dataclass
class TrainConfig:
    seed: int
    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    tau: float = 0.5
    beta_alpha: float = 2.0
    beta_beta: float = 2.0
    base_loss: str = losses.BASE_CE
    wts_enabled: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be >= 0")
        if not np.isfinite(self.tau):
            raise ValueError("tau must be finite")
        if self.beta_alpha <= 0.0 or self.beta_beta <= 0.0:
            raise ValueError("beta parameters must be positive")
        if self.base_loss not in losses.BASE_LOSSES:
            raise ValueError(f"base_loss must be one of {losses.BASE_LOSSES}")


@dataclass(frozen=True)
class BatchRecord:
    """One switch decision: overlap ratio, whether it fired, the drawn a."""

    epoch: int
    step: int
    overlap: float
    fired: bool
    mixing: float
    loss: float


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    mean_overlap: float
    fire_rate: float
    test_metrics: "evaluation.RunMetrics | None" = None


@dataclass
class TrainResult:
    probe: losses.StudentProbe
    teacher: teacher_mod.TeacherHead
    prior: losses.ClassPrior
    epochs: list[EpochMetrics] = field(default_factory=list)
    switch_log: list[BatchRecord] = field(default_factory=list)

    @property
    def mixing_values(self) -> np.ndarray:
        """All Beta-sampled coefficients from batches where the switch fired."""
        return np.array([r.mixing for r in self.switch_log if r.fired])


def sample_beta(alpha: float, beta: float, rng: np.random.Generator) -> float:
    """One Beta(alpha, beta) draw, guaranteed inside the open interval (0, 1)."""
    if alpha <= 0.0 or beta <= 0.0:
        raise ValueError("beta parameters must be positive")
    while True:
        x = float(rng.beta(alpha, beta))
        if 0.0 < x < 1.0:
            return x


def sgd_step(
    param: np.ndarray,
    velocity: np.ndarray,
    grad: np.ndarray,
    learning_rate: float,
    momentum: float,
    weight_decay: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Heavy-ball update: v <- m v + g + wd p; p <- p - lr v."""
    with np.errstate(over="ignore", invalid="ignore"):
        new_velocity = momentum * velocity + grad + weight_decay * param
        new_param = param - learning_rate * new_velocity
    if not np.all(np.isfinite(new_param)):
        raise TrainingDivergedError("non-finite parameter after SGD step")
    return new_param, new_velocity


def minibatch_indices(n: int, batch_size: int, rng: np.random.Generator):
    """Yield index arrays covering a fresh permutation of range(n)."""
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def train(
    dataset: EmbeddingDataset,
    config: TrainConfig,
    eval_dataset: EmbeddingDataset | None = None,
) -> TrainResult:
    """Run the full training loop and return probe, teacher, and logs.

    The teacher's prototypes come from the dataset and stay frozen; only
    its log-temperature moves, and only on batches where the KL branch
    was active. When ``eval_dataset`` is given, each epoch ends with a
    top-1 evaluation on raw logits, grouped by the training histogram.
    """
    if dataset.n_samples == 0:
        raise ValueError("cannot train on an empty dataset")
    n, d, c = dataset.n_samples, dataset.dim, dataset.n_classes
    x = dataset.image_embeddings
    y_obs = dataset.observed_labels
    onehot_all = losses.one_hot(y_obs, c)

    head = teacher_mod.TeacherHead(dataset.text_embeddings)
    sims_all = teacher_mod.similarities(head, x)
    teacher_labels = teacher_mod.text_predicted_labels(sims_all)

    prior = losses.ClassPrior.from_observed_labels(y_obs, c)
    train_counts = np.bincount(y_obs, minlength=c)
    group_map = evaluation.group_split(train_counts)

    probe = losses.StudentProbe.zeros(c, d)
    vel_w = np.zeros_like(probe.weights)
    vel_b = np.zeros_like(probe.bias)
    vel_t = 0.0
    rng = np.random.default_rng(config.seed)

    result = TrainResult(probe=probe, teacher=head, prior=prior)
    step = 0
    for epoch in range(config.epochs):
        batch_losses = []
        overlaps = []
        fires = 0
        n_batches = 0
        for idx in minibatch_indices(n, config.batch_size, rng):
            xb = x[idx]
            logits = probe.logits(xb)
            overlap = teacher_mod.overlap_ratio(teacher_labels[idx], y_obs[idx])
            fired = config.wts_enabled and overlap < config.tau
            if fired:
                a = sample_beta(config.beta_alpha, config.beta_beta, rng)
                probs_t = teacher_mod.teacher_probs(head, sims_all[idx])
                loss, grad_z, grad_temp = losses.combined_loss(
                    logits, onehot_all[idx], probs_t, a,
                    base=config.base_loss, prior=prior,
                )
            else:
                a = 1.0
                target_logits = (
                    losses.adjust_logits_la(logits, prior)
                    if config.base_loss == losses.BASE_LA else logits
                )
                loss, grad_z = losses.ce_loss_and_grad(target_logits, onehot_all[idx])
                grad_temp = 0.0
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} step {step} "
                    f"(overlap={overlap:.3f}, fired={fired}, a={a:.3f})"
                )
            grad_w = grad_z.T @ xb
            grad_b = grad_z.sum(axis=0)
            probe.weights, vel_w = sgd_step(
                probe.weights, vel_w, grad_w,
                config.learning_rate, config.momentum, config.weight_decay,
            )
            probe.bias, vel_b = sgd_step(
                probe.bias, vel_b, grad_b,
                config.learning_rate, config.momentum, config.weight_decay,
            )
            if fired:
                new_t, new_vel_t = sgd_step(
                    np.array(head.log_temperature), np.array(vel_t), np.array(grad_temp),
                    config.learning_rate, config.momentum, config.weight_decay,
                )
                head.log_temperature = float(new_t)
                vel_t = float(new_vel_t)
            result.switch_log.append(BatchRecord(
                epoch=epoch, step=step, overlap=overlap, fired=fired, mixing=a,
                loss=float(loss),
            ))
            batch_losses.append(loss)
            overlaps.append(overlap)
            fires += int(fired)
            n_batches += 1
            step += 1
        metrics = EpochMetrics(
            epoch=epoch,
            train_loss=float(np.mean(batch_losses)),
            mean_overlap=float(np.mean(overlaps)),
            fire_rate=fires / n_batches,
        )
        if eval_dataset is not None:
            metrics.test_metrics = evaluation.evaluate(probe, eval_dataset, group_map)
        result.epochs.append(metrics)
    return result


PROBE_MAGIC = b"WTSPRB1\x00"
_PROBE_HEADER = struct.Struct("<II")


def save_probe(probe: losses.StudentProbe, log_temperature: float, path) -> None:
    """Checkpoint format: magic, u32 C, u32 D, f32 weights, f32 bias, f32 log-temp."""
    parts = [
        PROBE_MAGIC,
        _PROBE_HEADER.pack(probe.n_classes, probe.dim),
        probe.weights.astype("<f4").tobytes(order="C"),
        probe.bias.astype("<f4").tobytes(),
        struct.pack("<f", log_temperature),
    ]
    Path(path).write_bytes(b"".join(parts))


def load_probe(path) -> tuple[losses.StudentProbe, float]:
    blob = Path(path).read_bytes()
    head_len = len(PROBE_MAGIC) + _PROBE_HEADER.size
    if len(blob) < head_len or blob[:len(PROBE_MAGIC)] != PROBE_MAGIC:
        raise ValueError(f"{path}: bad magic, not a probe checkpoint")
    c, d = _PROBE_HEADER.unpack(blob[len(PROBE_MAGIC):head_len])
    expected = head_len + 4 * (c * d + c + 1)
    if len(blob) != expected:
        raise ValueError(f"{path}: truncated checkpoint ({len(blob)} bytes, want {expected})")
    offset = head_len
    weights = np.frombuffer(blob, dtype="<f4", count=c * d, offset=offset).reshape(c, d)
    offset += 4 * c * d
    bias = np.frombuffer(blob, dtype="<f4", count=c, offset=offset)
    offset += 4 * c
    (log_temp,) = struct.unpack_from("<f", blob, offset)
    return losses.StudentProbe(weights.astype(np.float64), bias.astype(np.float64)), float(log_temp)
