"""End-to-end tests of the command-line interface."""

import csv
import json

import numpy as np
import pytest

from wtslab import checks
from wtslab.cli import main
from wtslab.datasets import load_dataset


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def synth_files(tmp_path):
    train = tmp_path / "train.emb"
    test = tmp_path / "test.emb"
    code = run_cli(
        "synth", "--classes", 5, "--dim", 8, "--per-class", 60,
        "--spread", 0.3, "--teacher-quality", 0.8, "--seed", 1,
        "--out", train, "--test-out", test, "--test-per-class", 20,
    )
    assert code == 0
    return train, test


class TestSynth:
    def test_writes_valid_files(self, synth_files):
        train, test = synth_files
        ds = load_dataset(train)
        assert ds.n_samples == 200 and ds.n_classes == 5
        held = load_dataset(test)
        assert held.n_samples == 100

    def test_seed_flag_required(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            run_cli("synth", "--classes", 3, "--dim", 4, "--per-class", 5,
                    "--spread", 0.3, "--teacher-quality", 0.8,
                    "--out", tmp_path / "x.emb")
        assert exc.value.code != 0
        assert "--seed" in capsys.readouterr().err


class TestCorrupt:
    def test_produces_longtail_noisy_file(self, synth_files, tmp_path):
        train, _ = synth_files
        out = tmp_path / "corrupted.emb"
        labels_out = tmp_path / "labels.txt"
        code = run_cli(
            "corrupt", "--data", train, "--out", out, "--noise", "symmetric",
            "--gamma", 0.4, "--if", 4, "--seed", 2, "--labels-out", labels_out,
        )
        assert code == 0
        ds = load_dataset(out)
        counts = np.bincount(ds.true_labels, minlength=5)
        assert counts[0] / counts[-1] == pytest.approx(4, abs=0.5)
        assert np.any(ds.observed_labels != ds.true_labels)
        header = labels_out.read_text().splitlines()[0].split()
        assert header[0] == "5" and int(header[1]) == ds.n_samples

    def test_input_file_not_mutated(self, synth_files, tmp_path):
        train, _ = synth_files
        before = train.read_bytes()
        run_cli("corrupt", "--data", train, "--out", tmp_path / "c.emb",
                "--noise", "joint", "--gamma", 0.3, "--if", 2, "--seed", 3)
        assert train.read_bytes() == before

    def test_requires_true_labels(self, synth_files, tmp_path, capsys):
        train, _ = synth_files
        ds = load_dataset(train)
        from wtslab.datasets import EmbeddingDataset, save_dataset

        stripped = tmp_path / "no_truth.emb"
        save_dataset(
            EmbeddingDataset(
                image_embeddings=ds.image_embeddings,
                observed_labels=ds.observed_labels,
                text_embeddings=ds.text_embeddings,
                class_names=ds.class_names,
            ),
            stripped,
        )
        code = run_cli("corrupt", "--data", stripped, "--out", tmp_path / "x.emb",
                       "--noise", "symmetric", "--gamma", 0.2, "--if", 2, "--seed", 1)
        assert code == 1
        assert "true labels" in capsys.readouterr().err


class TestTrainEval:
    def _write_train_config(self, tmp_path, train_path, test_path, **overrides):
        path = tmp_path / "train.cfg"
        values = {
            "train_data": train_path,
            "test_data": test_path,
            "checkpoint_out": tmp_path / "probe.ckpt",
            "metrics_out": tmp_path / "metrics.json",
            "seed": 4,
            "epochs": 3,
            "batch_size": 32,
            "learning_rate": 0.1,
            "base_loss": "la",
            "tau": 0.5,
        }
        values.update(overrides)
        path.write_text(
            "# training configuration\n"
            + "\n".join(f"{k} = {v}" for k, v in values.items())
            + "\n"
        )
        return path, values

    def test_full_pipeline(self, synth_files, tmp_path):
        train, test = synth_files
        corrupted = tmp_path / "corrupted.emb"
        run_cli("corrupt", "--data", train, "--out", corrupted, "--noise", "symmetric",
                "--gamma", 0.4, "--if", 4, "--seed", 2)
        config, values = self._write_train_config(tmp_path, corrupted, test)
        assert run_cli("train", "--config", config) == 0

        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert len(metrics["epochs"]) == 3
        assert "final_temperature" in metrics
        assert 0.0 <= metrics["fire_rate"] <= 1.0

        report = tmp_path / "report.json"
        code = run_cli("eval", "--probe", values["checkpoint_out"], "--data", test,
                       "--groups-from", corrupted, "--out", report)
        assert code == 0
        payload = json.loads(report.read_text())
        assert set(payload) == {"overall", "per_class", "groups", "confusion"}
        assert 0.0 <= payload["overall"] <= 1.0

    def test_determinism_of_artifacts(self, synth_files, tmp_path):
        train, test = synth_files
        config, values = self._write_train_config(tmp_path, train, test)
        run_cli("train", "--config", config)
        first_ckpt = values["checkpoint_out"].read_bytes()
        first_metrics = (tmp_path / "metrics.json").read_bytes()
        run_cli("train", "--config", config)
        assert values["checkpoint_out"].read_bytes() == first_ckpt
        assert (tmp_path / "metrics.json").read_bytes() == first_metrics

    def test_train_bad_magic(self, tmp_path, capsys):
        bogus = tmp_path / "bogus.emb"
        bogus.write_bytes(b"WRONG!!" + b"\x00" * 100)
        config, _ = self._write_train_config(tmp_path, bogus, None)
        # Drop the test_data line entirely.
        text = "\n".join(
            line for line in config.read_text().splitlines() if "test_data" not in line
        )
        config.write_text(text)
        assert run_cli("train", "--config", config) == 1
        assert "magic" in capsys.readouterr().err

    def test_train_missing_seed(self, synth_files, tmp_path, capsys):
        train, test = synth_files
        config, _ = self._write_train_config(tmp_path, train, test)
        text = "\n".join(
            line for line in config.read_text().splitlines() if not line.startswith("seed")
        )
        config.write_text(text)
        assert run_cli("train", "--config", config) == 1
        assert "seed" in capsys.readouterr().err

    def test_eval_without_true_labels(self, synth_files, tmp_path, capsys):
        train, test = synth_files
        config, values = self._write_train_config(tmp_path, train, test)
        run_cli("train", "--config", config)
        from wtslab.datasets import EmbeddingDataset, save_dataset

        ds = load_dataset(test)
        stripped = tmp_path / "no_truth.emb"
        save_dataset(
            EmbeddingDataset(
                image_embeddings=ds.image_embeddings,
                observed_labels=ds.observed_labels,
                text_embeddings=ds.text_embeddings,
                class_names=ds.class_names,
            ),
            stripped,
        )
        assert run_cli("eval", "--probe", values["checkpoint_out"], "--data", stripped) == 1
        assert "true labels" in capsys.readouterr().err


class TestTeacherEval:
    def test_reports_zero_shot_accuracy(self, synth_files, capsys):
        train, _ = synth_files
        assert run_cli("teacher-eval", "--data", train) == 0
        payload = json.loads(capsys.readouterr().out)
        assert 0.0 <= payload["overall"] <= 1.0
        assert set(payload["groups"]) == {"head", "medium", "tail"}


class TestCheck:
    def test_fresh_build_passes(self, capsys):
        assert run_cli("check") == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 6
        assert "FAIL" not in out

    def test_idempotent_output(self, capsys):
        run_cli("check")
        first = capsys.readouterr().out
        run_cli("check")
        assert capsys.readouterr().out == first

    def test_corrupted_gradient_detected(self, capsys, monkeypatch):
        """Deliberately break the analytic gradient; the suite must fail
        with a max-diff report."""
        from wtslab import losses

        true_fn = losses.ce_loss_and_grad

        def broken(logits, targets):
            loss, grad = true_fn(logits, targets)
            return loss, grad + 1e-3

        monkeypatch.setattr(checks.losses, "ce_loss_and_grad", broken)
        assert run_cli("check") == 1
        out = capsys.readouterr().out
        assert "FAIL" in out
        assert "max error" in out


class TestSweep:
    def test_row_cardinality_and_columns(self, tmp_path, capsys):
        config = tmp_path / "sweep.cfg"
        out_csv = tmp_path / "sweep.csv"
        summary_csv = tmp_path / "summary.csv"
        config.write_text(
            "\n".join([
                "n_classes = 4",
                "dim = 8",
                "samples_per_class = 60",
                "test_per_class = 20",
                "n_max = 40",
                "imbalance_factor = 4",
                "noise = symmetric",
                "gamma = 0.5",
                "cluster_spread = 0.3",
                "teacher_quality = 0.8",
                "epochs = 2",
                "batch_size = 32",
                "learning_rate = 0.1",
                "seeds = 0, 1",
                "taus = 0.5",
                f"out = {out_csv}",
                f"summary_out = {summary_csv}",
            ])
            + "\n"
        )
        assert run_cli("sweep", "--config", config) == 0
        with open(out_csv) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 1 * 4
        assert list(rows[0].keys()) == [
            "method", "tau", "gamma", "imbalance_factor", "seed",
            "overall", "head", "medium", "tail", "mean_or", "fire_rate",
        ]
        methods = {r["method"] for r in rows}
        assert methods == {"ce", "ce+wts", "la", "la+wts"}
        with open(summary_csv) as fh:
            summary = list(csv.DictReader(fh))
        assert len(summary) == 4
        assert "overall_mean" in summary[0]

    def test_requires_seeds(self, tmp_path, capsys):
        config = tmp_path / "sweep.cfg"
        config.write_text("taus = 0.5\nout = x.csv\n")
        assert run_cli("sweep", "--config", config) == 1
        assert "seeds" in capsys.readouterr().err


class TestLogging:
    def test_invalid_wts_log_rejected(self, monkeypatch, capsys):
        monkeypatch.setenv("WTS_LOG", "loud")
        assert run_cli("check") == 1
        assert "WTS_LOG" in capsys.readouterr().err
