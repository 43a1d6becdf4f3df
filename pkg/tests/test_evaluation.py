"""Tests for accuracy metrics and the head/medium/tail split."""

import numpy as np
import pytest

from wtslab.datasets import EmbeddingDataset
from wtslab.evaluation import (
    GROUPS,
    HEAD,
    MEDIUM,
    TAIL,
    confusion_matrix,
    evaluate,
    group_split,
    metrics_from_predictions,
)
from wtslab.losses import StudentProbe
from wtslab.teacher import TeacherHead


def dataset_with_truth(n=30, d=4, c=3, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingDataset(
        image_embeddings=rng.standard_normal((n, d)),
        observed_labels=rng.integers(0, c, size=n),
        text_embeddings=rng.standard_normal((c, d)),
        class_names=[str(k) for k in range(c)],
        true_labels=rng.integers(0, c, size=n),
    )


class TestGroupSplit:
    def test_nine_classes_even_split(self):
        counts = np.arange(9, 0, -1) * 10
        groups = group_split(counts)
        assert list(groups[:3]) == [HEAD] * 3
        assert list(groups[3:6]) == [MEDIUM] * 3
        assert list(groups[6:]) == [TAIL] * 3

    def test_ten_classes_ceil_floor(self):
        counts = np.arange(10, 0, -1) * 10
        groups = group_split(counts)
        assert np.count_nonzero(groups == HEAD) == 4
        assert np.count_nonzero(groups == MEDIUM) == 3
        assert np.count_nonzero(groups == TAIL) == 3

    def test_unordered_counts_ranked_by_frequency(self):
        groups = group_split([5, 500, 50])
        assert groups[1] == HEAD and groups[2] == MEDIUM and groups[0] == TAIL

    def test_equal_counts_tie_break_by_index(self):
        groups = group_split([7, 7, 7, 7, 7, 7])
        assert list(groups) == [HEAD, HEAD, MEDIUM, MEDIUM, TAIL, TAIL]

    def test_fewer_than_three_classes_all_head(self):
        assert list(group_split([10, 5])) == [HEAD, HEAD]


class TestConfusionMatrix:
    def test_hand_counted_three_class_case(self):
        true = [0, 0, 1, 1, 2, 2, 2, 0]
        pred = [0, 1, 1, 1, 2, 0, 2, 0]
        expected = [[2, 1, 0], [0, 2, 0], [1, 0, 2]]
        np.testing.assert_array_equal(confusion_matrix(pred, true, 3), expected)

    def test_total_preserved(self):
        rng = np.random.default_rng(1)
        true = rng.integers(0, 4, size=200)
        pred = rng.integers(0, 4, size=200)
        assert confusion_matrix(pred, true, 4).sum() == 200


class TestMetrics:
    def test_perfect_predictor(self):
        true = np.array([0, 1, 2, 0, 1, 2])
        m = metrics_from_predictions(true, true, 3, group_split([3, 2, 1]))
        assert m.overall_accuracy == 1.0
        np.testing.assert_array_equal(m.per_class_accuracy, [1.0, 1.0, 1.0])
        assert all(v == 1.0 for v in m.group_accuracy.values())
        np.testing.assert_array_equal(m.confusion, np.diag([2, 2, 2]))

    def test_constant_predictor(self):
        true = np.array([0] * 6 + [1] * 3 + [2] * 1)
        pred = np.zeros(10, dtype=int)
        m = metrics_from_predictions(pred, true, 3, group_split([6, 3, 1]))
        assert m.overall_accuracy == 0.6
        np.testing.assert_array_equal(m.per_class_accuracy, [1.0, 0.0, 0.0])

    def test_overall_equals_trace_over_total(self):
        rng = np.random.default_rng(2)
        true = rng.integers(0, 5, size=300)
        pred = rng.integers(0, 5, size=300)
        m = metrics_from_predictions(pred, true, 5, group_split(np.bincount(true)))
        assert m.overall_accuracy == pytest.approx(
            np.trace(m.confusion) / m.confusion.sum(), abs=1e-12
        )

    def test_weighted_group_mean_equals_overall(self):
        """Sample-weighted mean of the three group accuracies is the overall."""
        rng = np.random.default_rng(3)
        true = rng.integers(0, 7, size=500)
        pred = rng.integers(0, 7, size=500)
        group_map = group_split(rng.integers(1, 100, size=7))
        m = metrics_from_predictions(pred, true, 7, group_map)
        weights = {
            g: m.confusion.sum(axis=1)[np.asarray(group_map) == g].sum() for g in GROUPS
        }
        weighted = sum(m.group_accuracy[g] * weights[g] for g in GROUPS) / 500
        assert weighted == pytest.approx(m.overall_accuracy, abs=1e-12)


class TestEvaluate:
    def test_requires_true_labels(self):
        ds = dataset_with_truth()
        stripped = EmbeddingDataset(
            image_embeddings=ds.image_embeddings,
            observed_labels=ds.observed_labels,
            text_embeddings=ds.text_embeddings,
            class_names=ds.class_names,
        )
        with pytest.raises(ValueError, match="true labels"):
            evaluate(StudentProbe.zeros(3, 4), stripped)

    def test_probe_uses_raw_logits(self):
        ds = dataset_with_truth()
        probe = StudentProbe(np.random.default_rng(4).standard_normal((3, 4)), np.zeros(3))
        m = evaluate(probe, ds)
        expected = np.argmax(probe.logits(ds.image_embeddings), axis=1)
        manual = np.mean(expected == ds.true_labels)
        assert m.overall_accuracy == pytest.approx(manual, abs=1e-12)

    def test_teacher_scored_by_similarity(self):
        ds = dataset_with_truth()
        m = evaluate(TeacherHead(ds.text_embeddings), ds)
        assert 0.0 <= m.overall_accuracy <= 1.0

    def test_unknown_model_type_rejected(self):
        with pytest.raises(TypeError):
            evaluate(object(), dataset_with_truth())

    def test_json_dict_shape(self):
        ds = dataset_with_truth()
        m = evaluate(StudentProbe.zeros(3, 4), ds)
        d = m.to_json_dict()
        assert set(d) == {"overall", "per_class", "groups", "confusion"}
        assert set(d["groups"]) == {HEAD, MEDIUM, TAIL}
        assert len(d["per_class"]) == 3
        assert len(d["confusion"]) == 3
