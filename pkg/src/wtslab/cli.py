"""Command-line entry point.

Subcommands: synth, corrupt, train, eval, teacher-eval, check, sweep.
Every command requires explicit seeds where randomness is involved; no
wall-clock seeding exists anywhere. Errors surface as a single
diagnostic line on stderr and a nonzero exit code. Set WTS_LOG to
error, info, or debug to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import checks, corruption, evaluation, pipeline, teacher, training
from .config import ConfigError, ConfigView, load_config
from .datasets import (
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_per_class,
)

log = logging.getLogger("wtslab")


def _setup_logging() -> None:
    level_name = os.environ.get("WTS_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        raise ValueError(f"WTS_LOG must be one of {sorted(levels)}, got {level_name!r}")
    logging.basicConfig(level=levels[level_name], format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wtslab",
        description="Desk-scale lab for long-tailed noisy-label learning "
                    "with weak-teacher supervision.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic embedding dataset")
    p_synth.add_argument("--classes", type=int, required=True)
    p_synth.add_argument("--dim", type=int, required=True)
    p_synth.add_argument("--per-class", type=int, required=True,
                         help="samples per class before any subsampling")
    p_synth.add_argument("--spread", type=float, required=True,
                         help="Gaussian cluster spread around each centroid")
    p_synth.add_argument("--teacher-quality", type=float, required=True,
                         help="prototype-to-centroid alignment in (0, 1]")
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--test-out", default=None,
                         help="optional held-out split sharing the same prototypes")
    p_synth.add_argument("--test-per-class", type=int, default=0)
    p_synth.set_defaults(func=cmd_synth)

    p_corrupt = sub.add_parser("corrupt", help="long-tail subsample and corrupt labels")
    p_corrupt.add_argument("--data", required=True)
    p_corrupt.add_argument("--out", required=True)
    p_corrupt.add_argument("--noise", choices=corruption.NOISE_KINDS, required=True)
    p_corrupt.add_argument("--gamma", type=float, required=True)
    p_corrupt.add_argument("--if", dest="imbalance_factor", type=float, required=True,
                           help="imbalance factor: largest class over smallest")
    p_corrupt.add_argument("--seed", type=int, required=True)
    p_corrupt.add_argument("--mapping", choices=["cyclic"], default="cyclic",
                           help="asymmetric flip-target permutation")
    p_corrupt.add_argument("--n-max", type=int, default=None,
                           help="largest class size after subsampling "
                                "(default: size of class 0)")
    p_corrupt.add_argument("--labels-out", default=None,
                           help="also write the true/observed pairs as text")
    p_corrupt.set_defaults(func=cmd_corrupt)

    p_train = sub.add_parser("train", help="train the probe from a config file")
    p_train.add_argument("--config", required=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a probe checkpoint")
    p_eval.add_argument("--probe", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--groups-from", default=None,
                        help="dataset whose observed counts define head/medium/tail "
                             "(default: the eval data itself)")
    p_eval.add_argument("--out", default=None, help="report path (default: stdout)")
    p_eval.set_defaults(func=cmd_eval)

    p_teval = sub.add_parser("teacher-eval", help="zero-shot accuracy of the frozen teacher")
    p_teval.add_argument("--data", required=True)
    p_teval.add_argument("--groups-from", default=None)
    p_teval.add_argument("--out", default=None)
    p_teval.set_defaults(func=cmd_teacher_eval)

    p_check = sub.add_parser("check", help="run the loss-identity verification suite")
    p_check.set_defaults(func=cmd_check)

    p_sweep = sub.add_parser("sweep", help="run the method/tau/seed grid to CSV")
    p_sweep.add_argument("--config", required=True)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_classes=args.classes,
        dim=args.dim,
        samples_per_class=args.per_class,
        cluster_spread=args.spread,
        teacher_quality=args.teacher_quality,
        seed=args.seed,
    )
    dataset = generate_synthetic(spec)
    if args.test_out is not None:
        if args.test_per_class < 1:
            raise ValueError("--test-out requires --test-per-class >= 1")
        dataset, test = split_per_class(dataset, args.test_per_class)
        save_dataset(test, args.test_out)
        log.info("wrote %s (%d samples)", args.test_out, test.n_samples)
    save_dataset(dataset, args.out)
    log.info("wrote %s (%d samples, %d classes, dim %d)",
             args.out, dataset.n_samples, dataset.n_classes, dataset.dim)
    return 0


def cmd_corrupt(args) -> int:
    dataset = load_dataset(args.data)
    if dataset.true_labels is None:
        raise ValueError(f"{args.data}: corruption requires true labels")
    seq = np.random.SeedSequence(args.seed).spawn(2)
    subsample_seed, noise_seed = (int(s.generate_state(1)[0]) for s in seq)
    n_max = args.n_max
    if n_max is None:
        n_max = int(np.count_nonzero(dataset.true_labels == 0))
    selected, counts = corruption.subsample_longtail(
        dataset.true_labels, args.imbalance_factor, n_max,
        seed=subsample_seed, n_classes=dataset.n_classes,
    )
    subset = dataset.subset(selected)
    matrix = pipeline.make_matrix(args.noise, args.gamma, counts)
    assignment = corruption.apply_noise(subset.true_labels, matrix, seed=noise_seed)
    save_dataset(subset.with_observed_labels(assignment.observed_labels), args.out)
    if args.labels_out is not None:
        corruption.save_label_assignment(assignment, args.labels_out)
    flips = np.count_nonzero(assignment.observed_labels != assignment.true_labels)
    log.info("wrote %s: counts %s, %d/%d labels flipped",
             args.out, counts.tolist(), flips, len(selected))
    return 0


def _train_config_from_view(view: ConfigView) -> training.TrainConfig:
    return training.TrainConfig(
        seed=view.get_int("seed", required=True),
        epochs=view.get_int("epochs", 10),
        batch_size=view.get_int("batch_size", 128),
        learning_rate=view.get_float("learning_rate", 0.01),
        momentum=view.get_float("momentum", 0.9),
        weight_decay=view.get_float("weight_decay", 5e-4),
        tau=view.get_float("tau", 0.5),
        beta_alpha=view.get_float("beta_alpha", 2.0),
        beta_beta=view.get_float("beta_beta", 2.0),
        base_loss=view.get_str("base_loss", "ce").lower(),
        wts_enabled=view.get_bool("wts_enabled", True),
    )


def cmd_train(args) -> int:
    view = ConfigView(load_config(args.config), source=args.config)
    config = _train_config_from_view(view)
    train_path = view.get_str("train_data", required=True)
    dataset = load_dataset(train_path)
    test_path = view.get_str("test_data")
    eval_dataset = load_dataset(test_path) if test_path else None
    result = training.train(dataset, config, eval_dataset=eval_dataset)

    ckpt_path = view.get_str("checkpoint_out", required=True)
    training.save_probe(result.probe, result.teacher.log_temperature, ckpt_path)
    metrics_path = view.get_str("metrics_out", required=True)
    overlaps = [r.overlap for r in result.switch_log]
    fires = [r.fired for r in result.switch_log]
    payload = {
        "config": {
            "seed": config.seed, "epochs": config.epochs,
            "batch_size": config.batch_size, "learning_rate": config.learning_rate,
            "momentum": config.momentum, "weight_decay": config.weight_decay,
            "tau": config.tau, "beta_alpha": config.beta_alpha,
            "beta_beta": config.beta_beta, "base_loss": config.base_loss,
            "wts_enabled": config.wts_enabled,
        },
        "epochs": [
            {
                "epoch": m.epoch,
                "train_loss": m.train_loss,
                "mean_or": m.mean_overlap,
                "fire_rate": m.fire_rate,
                **(
                    {
                        "test_accuracy": m.test_metrics.overall_accuracy,
                        "groups": dict(m.test_metrics.group_accuracy),
                    }
                    if m.test_metrics is not None else {}
                ),
            }
            for m in result.epochs
        ],
        "mean_or": float(np.mean(overlaps)),
        "fire_rate": float(np.mean(fires)),
        "final_temperature": result.teacher.temperature,
    }
    Path(metrics_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s and %s", ckpt_path, metrics_path)
    return 0


def _resolve_group_map(args, dataset):
    source = load_dataset(args.groups_from) if args.groups_from else dataset
    counts = np.bincount(source.observed_labels, minlength=source.n_classes)
    return evaluation.group_split(counts)


def _emit_report(metrics: evaluation.RunMetrics, out: str | None) -> None:
    text = json.dumps(metrics.to_json_dict(), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_eval(args) -> int:
    probe, _ = training.load_probe(args.probe)
    dataset = load_dataset(args.data)
    metrics = evaluation.evaluate(probe, dataset, _resolve_group_map(args, dataset))
    _emit_report(metrics, args.out)
    return 0


def cmd_teacher_eval(args) -> int:
    dataset = load_dataset(args.data)
    head = teacher.TeacherHead(dataset.text_embeddings)
    metrics = evaluation.evaluate(head, dataset, _resolve_group_map(args, dataset))
    _emit_report(metrics, args.out)
    return 0


def cmd_check(args) -> int:
    results = checks.run_all_checks()
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_sweep(args) -> int:
    view = ConfigView(load_config(args.config), source=args.config)
    scenario = pipeline.scenario_from_config(view)
    seeds = view.get_list("seeds", int, required=True)
    taus = view.get_list("taus", float, required=True)
    out_path = view.get_str("out", required=True)
    rows, summary = pipeline.run_sweep(scenario, seeds, taus)
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(pipeline.SWEEP_COLUMNS))
        writer.writeheader()
        writer.writerows(rows)
    summary_path = view.get_str("summary_out")
    if summary_path and summary:
        with open(summary_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(summary[0].keys()))
            writer.writeheader()
            writer.writerows(summary)
    for entry in summary:
        print(
            f"{entry['method']:>7} tau={entry['tau']:<4} "
            f"overall {entry['overall_mean']:.4f} +/- {entry['overall_std']:.4f} "
            f"(head {entry['head_mean']:.4f}, tail {entry['tail_mean']:.4f}, "
            f"n={entry['n_seeds']})"
        )
    failed = sum(1 for r in rows if r["overall"] == "FAILED")
    if failed:
        print(f"{failed} cell(s) FAILED; see marker rows in {out_path}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ValueError, ConfigError, OSError, training.TrainingDivergedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
