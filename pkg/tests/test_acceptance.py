"""Acceptance suite: every release gate with its pinned tolerance.

Each test prints one PASS/FAIL line (visible with ``pytest -s`` or in
failure output). Oracles are local to this module: finite differences,
naive loops, direct construction, and scipy's KS test. Run with

    pytest tests/test_acceptance.py -v -s
"""

import json
import time
from dataclasses import replace

import numpy as np
from scipy import stats

from wtslab import pipeline
from wtslab.cli import main as cli_main
from wtslab.corruption import (
    apply_noise,
    build_asymmetric_matrix,
    build_joint_matrix,
    build_symmetric_matrix,
    longtail_counts,
)
from wtslab.datasets import SyntheticSpec, generate_synthetic
from wtslab.evaluation import evaluate
from wtslab.losses import (
    ce_loss_and_grad,
    combined_loss,
    entropy_rows,
    la_gradient_difference,
    mixed_target,
    one_hot,
    softmax,
)
from wtslab.teacher import (
    TeacherHead,
    overlap_ratio,
    teacher_probs,
    text_predicted_labels,
)
from wtslab.training import TrainConfig, train

ACCEPT_SEEDS = [0, 1, 2, 3, 4]


def _report(number, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"{status} criterion {number:>2}: {name}  {detail}")
    assert ok, f"criterion {number} ({name}) failed: {detail}"


def _fd_gradient(fn, x, h=1e-5):
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        up, down = x.copy(), x.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (fn(up) - fn(down)) / (2 * h)
        it.iternext()
    return grad


def test_criterion_1_ce_gradient_identity():
    """Analytic CE gradient equals finite differences within 1e-6, under 1s."""
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        c = int(rng.integers(2, 11))
        z = rng.normal(scale=2.0, size=(1, c))
        p = rng.dirichlet(np.ones(c))[None, :]
        _, grad = ce_loss_and_grad(z, p)
        fd = _fd_gradient(lambda zz: ce_loss_and_grad(zz, p)[0], z)
        worst = max(worst, float(np.abs(grad - fd).max()))
    elapsed = time.perf_counter() - start
    _report(1, "ce-gradient-vs-finite-differences",
            worst < 1e-6 and elapsed < 1.0,
            f"max err {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_mixed_target_equivalence():
    """Blended-loss gradient equals CE against the mixed target within 1e-12;
    loss offset equals (1-a) * mean teacher entropy within 1e-10. Under 1s."""
    start = time.perf_counter()
    rng = np.random.default_rng(102)
    worst_grad, worst_offset = 0.0, 0.0
    for _ in range(100):
        c = int(rng.integers(2, 11))
        b = int(rng.integers(1, 9))
        z = rng.normal(scale=2.0, size=(b, c))
        p_t = rng.dirichlet(np.ones(c), size=b)
        onehot = one_hot(rng.integers(0, c, size=b), c)
        for a in (0.0, 0.25, 0.5, 0.75, 1.0):
            loss_comb, grad_comb, _ = combined_loss(z, onehot, p_t, a, base="ce")
            p_m = mixed_target(onehot, p_t, a)
            loss_mix, grad_mix = ce_loss_and_grad(z, p_m)
            worst_grad = max(worst_grad, float(np.abs(grad_comb - grad_mix).max()))
            offset = (1.0 - a) * float(entropy_rows(p_t).mean())
            worst_offset = max(worst_offset, abs((loss_mix - loss_comb) - offset))
    elapsed = time.perf_counter() - start
    _report(2, "mixed-target-equivalence",
            worst_grad < 1e-12 and worst_offset < 1e-10 and elapsed < 1.0,
            f"grad {worst_grad:.2e}, offset {worst_offset:.2e}, {elapsed:.2f}s")


def test_criterion_3_margin_sign_property():
    """With margins -log(pi) from an IF=100 exponential prior, the gradient
    gap is negative for the rarest class and positive for the most common
    class on every one of 1000 trials. Under 1s."""
    start = time.perf_counter()
    rng = np.random.default_rng(103)
    c = 10
    decay = 100.0 ** (-np.arange(c) / (c - 1))
    pi = decay / decay.sum()
    margins = -np.log(pi)
    violations = 0
    for _ in range(1000):
        z = rng.normal(scale=3.0, size=(1, c))
        d_g = la_gradient_difference(z, margins)[0]
        if not (d_g[np.argmin(pi)] < 0.0 and d_g[np.argmax(pi)] > 0.0):
            violations += 1
    elapsed = time.perf_counter() - start
    _report(3, "margin-sign-property",
            violations == 0 and elapsed < 1.0,
            f"{violations} violations, {elapsed:.2f}s")


def test_criterion_4_noise_matrices():
    """Rows sum to 1 within 1e-12 on 50 random configurations; per-row
    empirical flip rates over 100k draws deviate < 0.01 per entry; the
    symmetric C=2 gamma=0.4 matrix is exact."""
    rng = np.random.default_rng(104)
    worst_sum = 0.0
    worst_freq = 0.0
    for _ in range(50):
        c = int(rng.integers(2, 11))
        gamma = float(rng.uniform(0.0, 0.95))
        counts = rng.integers(1, 400, size=c)
        matrices = (
            build_joint_matrix(counts, gamma),
            build_symmetric_matrix(c, gamma),
            build_asymmetric_matrix(c, gamma),
        )
        for m in matrices:
            worst_sum = max(worst_sum, float(np.abs(m.rows.sum(axis=1) - 1.0).max()))
        # Sample one matrix kind per configuration to keep runtime modest.
        m = matrices[int(rng.integers(0, 3))]
        for i in range(c):
            out = apply_noise(np.full(100_000, i), m, seed=int(rng.integers(1 << 31)))
            freq = np.bincount(out.observed_labels, minlength=c) / 100_000
            worst_freq = max(worst_freq, float(np.abs(freq - m.rows[i]).max()))
    exact = np.array_equal(
        build_symmetric_matrix(2, 0.4).rows, np.array([[0.8, 0.2], [0.2, 0.8]])
    )
    _report(4, "noise-matrix-construction-and-sampling",
            worst_sum <= 1e-12 and worst_freq < 0.01 and exact,
            f"row-sum err {worst_sum:.2e}, freq err {worst_freq:.4f}, exact={exact}")


def test_criterion_5_longtail_counts():
    """IF=100 yields [500, ..., 5] with exact ratio 100; IF=10 lands within
    rounding of ratio 10."""
    c100 = longtail_counts(10, 100, 500)
    c10 = longtail_counts(10, 10, 500)
    ok = (
        c100[0] == 500 and c100[-1] == 5 and c100[0] / c100[-1] == 100.0
        and np.all(np.diff(c100) <= 0)
        and abs(c10[0] / c10[-1] - 10.0) <= 10.0 * (0.5 / 50 + 0.5 / 500)
    )
    _report(5, "longtail-construction", ok,
            f"IF=100 -> {c100.tolist()}, IF=10 ratio {c10[0] / c10[-1]:.3f}")


def _switch_dataset():
    ds = generate_synthetic(SyntheticSpec(5, 8, 512, 0.3, 0.9, seed=42))
    matrix = build_symmetric_matrix(5, 0.5)
    noisy = apply_noise(ds.true_labels, matrix, seed=43)
    return ds.with_observed_labels(noisy.observed_labels)


def test_criterion_6_beta_switch():
    """Forced switch: >= 1000 logged draws pass a KS test against the
    Beta(2, 2) CDF at statistic < 0.05. Disabled switch: parameters are
    bitwise identical to a wts_enabled=False run."""
    ds = _switch_dataset()
    forced = train(ds, TrainConfig(seed=44, epochs=50, batch_size=128, tau=1.01))
    values = forced.mixing_values
    ks = stats.kstest(values, stats.beta(2.0, 2.0).cdf).statistic
    all_fired = all(r.fired for r in forced.switch_log)

    sentinel = train(ds, TrainConfig(seed=44, epochs=5, batch_size=128, tau=-1.0))
    disabled = train(ds, TrainConfig(seed=44, epochs=5, batch_size=128, wts_enabled=False))
    identical = (
        np.array_equal(sentinel.probe.weights, disabled.probe.weights)
        and np.array_equal(sentinel.probe.bias, disabled.probe.bias)
        and sentinel.teacher.log_temperature == disabled.teacher.log_temperature
    )
    _report(6, "beta-switch-distribution-and-sentinels",
            len(values) >= 1000 and ks < 0.05 and all_fired and identical,
            f"n={len(values)}, KS {ks:.4f}, identical={identical}")


def test_criterion_7_overlap_and_argmax_invariance():
    """Across 1000 random batches and temperatures in [0.01, 100], predicted
    labels ignore temperature and the overlap ratio matches a naive loop."""
    rng = np.random.default_rng(107)
    ok = True
    for _ in range(1000):
        c = int(rng.integers(2, 9))
        b = int(rng.integers(1, 17))
        sims = rng.uniform(-1.0, 1.0, size=(b, c))
        head = TeacherHead(np.eye(c))
        head.log_temperature = float(np.log(rng.uniform(0.01, 100.0)))
        labels_sims = text_predicted_labels(sims)
        labels_probs = text_predicted_labels(teacher_probs(head, sims))
        if not np.array_equal(labels_sims, labels_probs):
            ok = False
            break
        observed = rng.integers(0, c, size=b)
        matches = 0
        for p, o in zip(labels_sims, observed):
            if p == o:
                matches += 1
        if overlap_ratio(labels_sims, observed) != matches / b:
            ok = False
            break
    _report(7, "temperature-invariance-and-overlap-oracle", ok)


def test_criterion_8_end_to_end_trend():
    """Reference scenario, 5 seeds: the teacher sits in the 65-75% band,
    CE+WTS beats CE by >= 2 points, LA+WTS beats LA by >= 1 point, within
    a 60 s budget."""
    start = time.perf_counter()
    scenario = pipeline.REFERENCE_SCENARIO
    teacher_accs = []
    for seed in ACCEPT_SEEDS:
        train_set, _ = pipeline.build_datasets(scenario, seed)
        head = TeacherHead(train_set.text_embeddings)
        teacher_accs.append(evaluate(head, train_set).overall_accuracy)
    trend = pipeline.reference_trend(ACCEPT_SEEDS, tau=0.5, scenario=scenario)
    elapsed = time.perf_counter() - start
    in_band = all(0.65 <= acc <= 0.75 for acc in teacher_accs)
    ce_gain = trend["ce+wts"] - trend["ce"]
    la_gain = trend["la+wts"] - trend["la"]
    _report(8, "end-to-end-trend",
            in_band and ce_gain >= 0.02 and la_gain >= 0.01 and elapsed < 60.0,
            f"teacher [{min(teacher_accs):.3f},{max(teacher_accs):.3f}], "
            f"CE {trend['ce']:.3f}->{trend['ce+wts']:.3f} (+{ce_gain:.3f}), "
            f"LA {trend['la']:.3f}->{trend['la+wts']:.3f} (+{la_gain:.3f}), "
            f"{elapsed:.1f}s")


def test_criterion_9_low_noise_no_harm():
    """Same scenario at gamma=0.1: LA+WTS accuracy varies < 2 points across
    tau in {0.3, 0.5, 0.7} and never drops more than 1 point below LA."""
    scenario = replace(pipeline.REFERENCE_SCENARIO, gamma=0.1)
    taus = (0.3, 0.5, 0.7)
    wts_means = {t: [] for t in taus}
    la_scores = []
    for seed in ACCEPT_SEEDS:
        datasets = pipeline.build_datasets(scenario, seed)
        for tau in taus:
            wts_means[tau].append(
                pipeline.run_cell(scenario, "la+wts", tau, seed, datasets)["overall"]
            )
        la_scores.append(pipeline.run_cell(scenario, "la", 0.5, seed, datasets)["overall"])
    means = {t: float(np.mean(v)) for t, v in wts_means.items()}
    la_mean = float(np.mean(la_scores))
    spread = max(means.values()) - min(means.values())
    floor_gap = min(means.values()) - la_mean
    _report(9, "low-noise-no-harm",
            spread < 0.02 and floor_gap >= -0.01,
            f"tau means {[round(means[t], 4) for t in taus]}, LA {la_mean:.4f}, "
            f"spread {spread:.4f}, floor gap {floor_gap:+.4f}")


def test_criterion_10_train_determinism(tmp_path):
    """Repeating a train CLI invocation reproduces checkpoint and metrics
    byte for byte."""
    train_path = tmp_path / "train.emb"
    test_path = tmp_path / "test.emb"
    assert cli_main([
        "synth", "--classes", "5", "--dim", "8", "--per-class", "80",
        "--spread", "0.3", "--teacher-quality", "0.8", "--seed", "11",
        "--out", str(train_path), "--test-out", str(test_path),
        "--test-per-class", "20",
    ]) == 0
    corrupted = tmp_path / "corrupted.emb"
    assert cli_main([
        "corrupt", "--data", str(train_path), "--out", str(corrupted),
        "--noise", "joint", "--gamma", "0.4", "--if", "5", "--seed", "12",
    ]) == 0
    ckpt = tmp_path / "probe.ckpt"
    metrics = tmp_path / "metrics.json"
    config = tmp_path / "train.cfg"
    config.write_text("\n".join([
        f"train_data = {corrupted}",
        f"test_data = {test_path}",
        f"checkpoint_out = {ckpt}",
        f"metrics_out = {metrics}",
        "seed = 13",
        "epochs = 5",
        "batch_size = 32",
        "learning_rate = 0.1",
        "base_loss = la",
        "tau = 0.5",
    ]) + "\n")
    assert cli_main(["train", "--config", str(config)]) == 0
    first = (ckpt.read_bytes(), metrics.read_bytes())
    assert cli_main(["train", "--config", str(config)]) == 0
    second = (ckpt.read_bytes(), metrics.read_bytes())
    identical = first == second
    sane = json.loads(metrics.read_text())["fire_rate"] >= 0.0
    _report(10, "train-invocation-determinism", identical and sane,
            f"checkpoint {len(first[0])} bytes, metrics {len(first[1])} bytes")
