"""Metrics: balanced accuracy, ROC/AUC, stratified splitting."""

import numpy as np
import pytest

from dermcbm import (
    ConfigurationError,
    LabelSpace,
    balanced_accuracy,
    balanced_accuracy_multiclass,
    multiclass_to_binary,
    roc_auc,
    stratified_kfold,
    stratified_split,
    stratified_subsample,
)


def _pair_counting_auc(scores, truth):
    """Mann-Whitney AUC: positive-over-negative pairs, ties counted half."""
    pos = scores[truth == 1]
    neg = scores[truth == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


class TestBalancedAccuracy:
    def test_perfect(self):
        assert balanced_accuracy(np.array([1, 0, 1]), np.array([1, 0, 1])) == 1.0

    def test_all_positive_on_balanced_truth(self):
        assert balanced_accuracy(np.ones(4, dtype=int), np.array([1, 1, 0, 0])) == 0.5

    def test_hand_counted_confusion(self):
        got = balanced_accuracy(np.array([1, 0, 1, 0]), np.array([1, 0, 0, 0]))
        assert got == pytest.approx(5.0 / 6.0, abs=1e-12)

    def test_single_class_truth_rejected(self):
        with pytest.raises(ConfigurationError, match="single class"):
            balanced_accuracy(np.array([1, 0]), np.array([1, 1]))

    def test_relabel_symmetry(self):
        rng = np.random.default_rng(70)
        for _ in range(50):
            pred = rng.integers(0, 2, size=20)
            truth = rng.integers(0, 2, size=20)
            if truth.min() == truth.max():
                truth[0] = 1 - truth[0]
            assert balanced_accuracy(pred, truth) == pytest.approx(
                balanced_accuracy(1 - pred, 1 - truth), abs=1e-12
            )

    def test_multiclass_mean_recall(self):
        pred = np.array([0, 0, 1, 2, 2, 2])
        truth = np.array([0, 1, 1, 2, 2, 0])
        # recalls: class0 1/2, class1 1/2, class2 2/2
        assert balanced_accuracy_multiclass(pred, truth) == pytest.approx(2.0 / 3.0)


class TestRocAuc:
    def test_perfect_ranking(self):
        auc, _ = roc_auc(np.array([0.0, 1.0, 0.0, 1.0]), np.array([0, 1, 0, 1]))
        assert auc == 1.0

    def test_constant_scores_give_half(self):
        auc, points = roc_auc(np.full(6, 0.5), np.array([0, 1, 0, 1, 0, 1]))
        assert auc == pytest.approx(0.5, abs=1e-12)
        assert points == ((0.0, 0.0), (1.0, 1.0))

    def test_pair_counting_oracle_thirty_points(self):
        rng = np.random.default_rng(71)
        scores = np.round(rng.standard_normal(30), 1)
        truth = rng.integers(0, 2, size=30)
        truth[0], truth[1] = 0, 1
        auc, _ = roc_auc(scores, truth)
        assert auc == pytest.approx(_pair_counting_auc(scores, truth), abs=1e-9)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(72)
        scores = rng.standard_normal(40)
        truth = rng.integers(0, 2, size=40)
        truth[0], truth[1] = 0, 1
        base, _ = roc_auc(scores, truth)
        for transform in (np.exp, np.tanh, lambda s: 3 * s + 7):
            got, _ = roc_auc(transform(scores), truth)
            assert got == pytest.approx(base, abs=1e-12)

    def test_roc_points_monotone_with_correct_endpoints(self):
        rng = np.random.default_rng(73)
        scores = np.round(rng.standard_normal(25), 1)
        truth = rng.integers(0, 2, size=25)
        truth[0], truth[1] = 0, 1
        _, points = roc_auc(scores, truth)
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (1.0, 1.0)
        fprs = [p[0] for p in points]
        tprs = [p[1] for p in points]
        assert all(a <= b for a, b in zip(fprs, fprs[1:]))
        assert all(a <= b for a, b in zip(tprs, tprs[1:]))

    def test_single_class_rejected(self):
        with pytest.raises(ConfigurationError, match="single class"):
            roc_auc(np.array([0.1, 0.2]), np.array([1, 1]))


class TestStratifiedKfold:
    def test_balanced_two_class_folds(self):
        labels = ["a"] * 5 + ["b"] * 5
        folds = stratified_kfold(labels, k=5, seed=0)
        for train, test in folds:
            test_labels = [labels[i] for i in test]
            assert test_labels.count("a") == 1
            assert test_labels.count("b") == 1

    def test_partition_law(self):
        rng = np.random.default_rng(74)
        labels = rng.choice(["x", "y", "z"], size=60)
        folds = stratified_kfold(labels, k=4, seed=1)
        all_test = np.concatenate([test for _, test in folds])
        assert sorted(all_test.tolist()) == list(range(60))
        for train, test in folds:
            assert set(train.tolist()).isdisjoint(test.tolist())
            assert sorted(np.concatenate([train, test]).tolist()) == list(range(60))

    def test_desk_scale_melanoma_counts(self):
        # 200 lesions, 40 melanoma: stratified folds hold exactly 8 each
        labels = ["melanoma"] * 40 + ["nevus"] * 160
        folds = stratified_kfold(labels, k=5, seed=2)
        for _, test in folds:
            assert sum(1 for i in test if labels[i] == "melanoma") == 8
            assert len(test) == 40

    def test_deterministic_in_seed(self):
        labels = ["a"] * 12 + ["b"] * 8
        one = stratified_kfold(labels, k=4, seed=5)
        two = stratified_kfold(labels, k=4, seed=5)
        other = stratified_kfold(labels, k=4, seed=6)
        for (tr1, te1), (tr2, te2) in zip(one, two):
            assert np.array_equal(tr1, tr2) and np.array_equal(te1, te2)
        assert any(
            not np.array_equal(te1, te3)
            for (_, te1), (_, te3) in zip(one, other)
        )

    def test_small_class_rejected(self):
        with pytest.raises(ConfigurationError, match="fewer than k"):
            stratified_kfold(["a", "a", "b"], k=2, seed=0)


class TestMulticlassToBinary:
    def test_positive_at_index_zero(self):
        space = LabelSpace(classes=("mel", "nev", "bkl"), positive_class="mel")
        assert np.array_equal(
            multiclass_to_binary(np.array([0, 1, 2]), space), [1, 0, 0]
        )

    def test_all_positive(self):
        space = LabelSpace(classes=("a", "b"), positive_class="b")
        assert np.array_equal(
            multiclass_to_binary(np.array([1, 1, 1]), space), [1, 1, 1]
        )

    def test_confusion_matrix_tally(self):
        space = LabelSpace(classes=("neg", "pos"), positive_class="pos")
        preds = np.array([1, 1, 0, 0, 1, 0])
        truth = np.array([1, 0, 1, 0, 1, 0])
        binary = multiclass_to_binary(preds, space)
        tp = int(((binary == 1) & (truth == 1)).sum())
        fp = int(((binary == 1) & (truth == 0)).sum())
        assert (tp, fp) == (2, 1)

    def test_invalid_index(self):
        space = LabelSpace(classes=("a", "b"), positive_class="a")
        with pytest.raises(ValueError, match="out of range"):
            multiclass_to_binary(np.array([2]), space)


class TestStratifiedSplit:
    def test_both_classes_on_both_sides(self):
        labels = ["a"] * 10 + ["b"] * 6
        train, val = stratified_split(labels, val_fraction=0.25, seed=0)
        for side in (train, val):
            side_labels = {labels[i] for i in side}
            assert side_labels == {"a", "b"}
        assert sorted(np.concatenate([train, val]).tolist()) == list(range(16))

    def test_fraction_respected(self):
        labels = ["a"] * 20 + ["b"] * 20
        train, val = stratified_split(labels, val_fraction=0.25, seed=1)
        assert len(val) == 10

    def test_deterministic(self):
        labels = ["a"] * 9 + ["b"] * 7
        assert np.array_equal(
            stratified_split(labels, 0.3, seed=4)[1],
            stratified_split(labels, 0.3, seed=4)[1],
        )

    def test_singleton_class_rejected(self):
        with pytest.raises(ConfigurationError, match="at least 2"):
            stratified_split(["a", "b", "b"], 0.5, seed=0)


class TestStratifiedSubsample:
    def test_full_size_is_identity(self):
        labels = ["a"] * 7 + ["b"] * 5
        assert np.array_equal(
            stratified_subsample(labels, 12, seed=3), np.arange(12)
        )

    def test_counts_proportional(self):
        labels = ["a"] * 30 + ["b"] * 10
        idx = stratified_subsample(labels, 20, seed=4)
        chosen = [labels[i] for i in idx]
        assert chosen.count("a") == 15
        assert chosen.count("b") == 5

    def test_every_class_survives(self):
        labels = ["a"] * 50 + ["b"] * 2
        idx = stratified_subsample(labels, 5, seed=5)
        assert "b" in {labels[i] for i in idx}

    def test_deterministic(self):
        labels = ["a"] * 12 + ["b"] * 8
        assert np.array_equal(
            stratified_subsample(labels, 10, seed=6),
            stratified_subsample(labels, 10, seed=6),
        )

    def test_oversize_rejected(self):
        with pytest.raises(ConfigurationError, match="exceeds"):
            stratified_subsample(["a", "b"], 3, seed=0)
