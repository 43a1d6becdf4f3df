"""End-to-end experiment cells: synthesize, corrupt, train, evaluate.

A scenario bundles the synthetic-data recipe with the corruption
settings. One cell = (scenario, method, tau, seed); the sweep runs the
cross product and collects one metrics row per cell. Per-seed datasets
are built once and shared across the four methods so method columns are
directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import corruption, evaluation, losses, training
from .datasets import EmbeddingDataset, SyntheticSpec, generate_synthetic, split_per_class

METHODS = ("ce", "ce+wts", "la", "la+wts")

SWEEP_COLUMNS = (
    "method", "tau", "gamma", "imbalance_factor", "seed",
    "overall", "head", "medium", "tail", "mean_or", "fire_rate",
)


@dataclass(frozen=True)
class Scenario:
    """Synthetic data recipe plus corruption settings for one experiment."""

    n_classes: int = 10
    dim: int = 32
    samples_per_class: int = 700
    test_per_class: int = 200
    n_max: int = 500
    imbalance_factor: float = 10.0
    noise: str = corruption.SYMMETRIC
    gamma: float = 0.6
    cluster_spread: float = 0.35
    teacher_quality: float = 0.57
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 0.2


# Reference setting: ten classes in a 32-dim feature space, imbalance 10,
# heavy symmetric noise, teacher tuned into the 65-75% accuracy band.
# The probe needs a larger step size and more epochs than the deep-model
# defaults because it starts from zeros on unit-norm features.
REFERENCE_SCENARIO = Scenario()


def build_datasets(
    scenario: Scenario, seed: int
) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    """Corrupted long-tailed training set plus a clean, balanced test set.

    Both halves come from one synthetic draw so they share centroids and
    prototypes. Sub-seeding is derived through SeedSequence so the data
    seed, the subsample seed, and the noise seed are independent streams.
    """
    data_seed, subsample_seed, noise_seed = (
        s.generate_state(1)[0] for s in np.random.SeedSequence(seed).spawn(3)
    )
    spec = SyntheticSpec(
        n_classes=scenario.n_classes,
        dim=scenario.dim,
        samples_per_class=scenario.samples_per_class,
        cluster_spread=scenario.cluster_spread,
        teacher_quality=scenario.teacher_quality,
        seed=int(data_seed),
    )
    full = generate_synthetic(spec)
    pool, test = split_per_class(full, scenario.test_per_class)
    selected, counts = corruption.subsample_longtail(
        pool.true_labels, scenario.imbalance_factor, scenario.n_max,
        seed=int(subsample_seed), n_classes=scenario.n_classes,
    )
    longtail = pool.subset(selected)
    matrix = make_matrix(scenario.noise, scenario.gamma, counts)
    assignment = corruption.apply_noise(longtail.true_labels, matrix, seed=int(noise_seed))
    train_set = longtail.with_observed_labels(assignment.observed_labels)
    return train_set, test


def make_matrix(noise: str, gamma: float, counts) -> corruption.TransitionMatrix:
    if noise == corruption.JOINT:
        return corruption.build_joint_matrix(counts, gamma)
    if noise == corruption.SYMMETRIC:
        return corruption.build_symmetric_matrix(len(counts), gamma)
    if noise == corruption.ASYMMETRIC:
        return corruption.build_asymmetric_matrix(len(counts), gamma)
    raise ValueError(f"unknown noise kind {noise!r}; expected one of {corruption.NOISE_KINDS}")


def method_config(method: str, tau: float, seed: int, scenario: Scenario) -> training.TrainConfig:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    base = losses.BASE_LA if method.startswith("la") else losses.BASE_CE
    return training.TrainConfig(
        seed=seed,
        epochs=scenario.epochs,
        batch_size=scenario.batch_size,
        learning_rate=scenario.learning_rate,
        tau=tau,
        base_loss=base,
        wts_enabled=method.endswith("+wts"),
    )


def run_cell(
    scenario: Scenario,
    method: str,
    tau: float,
    seed: int,
    datasets: tuple[EmbeddingDataset, EmbeddingDataset] | None = None,
) -> dict:
    """Train one method on one seeded dataset and evaluate on the test set."""
    train_set, test_set = datasets if datasets is not None else build_datasets(scenario, seed)
    config = method_config(method, tau, seed, scenario)
    result = training.train(train_set, config)
    group_map = evaluation.group_split(
        np.bincount(train_set.observed_labels, minlength=train_set.n_classes)
    )
    metrics = evaluation.evaluate(result.probe, test_set, group_map)
    overlaps = [r.overlap for r in result.switch_log]
    fires = [r.fired for r in result.switch_log]
    return {
        "method": method,
        "tau": tau,
        "gamma": scenario.gamma,
        "imbalance_factor": scenario.imbalance_factor,
        "seed": seed,
        "overall": metrics.overall_accuracy,
        "head": metrics.group_accuracy[evaluation.HEAD],
        "medium": metrics.group_accuracy[evaluation.MEDIUM],
        "tail": metrics.group_accuracy[evaluation.TAIL],
        "mean_or": float(np.mean(overlaps)),
        "fire_rate": float(np.mean(fires)),
    }


def run_sweep(
    scenario: Scenario,
    seeds: list[int],
    taus: list[float],
    methods: tuple[str, ...] = METHODS,
    on_error: str = "mark",
) -> tuple[list[dict], list[dict]]:
    """Run the (seed, tau, method) cross product.

    Returns (rows, summary). Rows appear in deterministic order: seeds
    outside, taus, then methods. A failed cell contributes a marker row
    with ``overall`` set to the string "FAILED" and the remaining metric
    fields empty; with on_error="raise" the first failure propagates.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    if not taus:
        raise ValueError("need at least one tau")
    rows: list[dict] = []
    for seed in seeds:
        datasets = build_datasets(scenario, seed)
        for tau in taus:
            for method in methods:
                try:
                    rows.append(run_cell(scenario, method, tau, seed, datasets))
                except Exception as exc:
                    if on_error == "raise":
                        raise
                    rows.append({
                        "method": method, "tau": tau, "gamma": scenario.gamma,
                        "imbalance_factor": scenario.imbalance_factor, "seed": seed,
                        "overall": "FAILED", "head": "", "medium": "", "tail": "",
                        "mean_or": "", "fire_rate": "",
                    })
    summary = summarize_sweep(rows, taus, methods)
    return rows, summary


def summarize_sweep(rows: list[dict], taus, methods) -> list[dict]:
    """Mean and standard deviation of accuracy per (method, tau) cell."""
    summary = []
    for tau in taus:
        for method in methods:
            cell = [
                r for r in rows
                if r["method"] == method and r["tau"] == tau and r["overall"] != "FAILED"
            ]
            if not cell:
                continue
            values = {k: np.array([r[k] for r in cell], dtype=np.float64)
                      for k in ("overall", "head", "medium", "tail")}
            entry = {"method": method, "tau": tau, "n_seeds": len(cell)}
            for k, vals in values.items():
                entry[f"{k}_mean"] = float(vals.mean())
                entry[f"{k}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
            summary.append(entry)
    return summary


def reference_trend(seeds, tau: float = 0.5,
                    scenario: Scenario = REFERENCE_SCENARIO) -> dict[str, float]:
    """Mean test accuracy per method over the given seeds at one tau."""
    totals = {m: 0.0 for m in METHODS}
    for seed in seeds:
        datasets = build_datasets(scenario, seed)
        for method in METHODS:
            totals[method] += run_cell(scenario, method, tau, seed, datasets)["overall"]
    return {m: total / len(seeds) for m, total in totals.items()}


def scenario_from_config(view) -> Scenario:
    """Build a Scenario from a ConfigView, falling back to reference values."""
    ref = REFERENCE_SCENARIO
    return Scenario(
        n_classes=view.get_int("n_classes", ref.n_classes),
        dim=view.get_int("dim", ref.dim),
        samples_per_class=view.get_int("samples_per_class", ref.samples_per_class),
        test_per_class=view.get_int("test_per_class", ref.test_per_class),
        n_max=view.get_int("n_max", ref.n_max),
        imbalance_factor=view.get_float("imbalance_factor", ref.imbalance_factor),
        noise=view.get_str("noise", ref.noise),
        gamma=view.get_float("gamma", ref.gamma),
        cluster_spread=view.get_float("cluster_spread", ref.cluster_spread),
        teacher_quality=view.get_float("teacher_quality", ref.teacher_quality),
        epochs=view.get_int("epochs", ref.epochs),
        batch_size=view.get_int("batch_size", ref.batch_size),
        learning_rate=view.get_float("learning_rate", ref.learning_rate),
    )


def with_gamma(scenario: Scenario, gamma: float) -> Scenario:
    return replace(scenario, gamma=gamma)
