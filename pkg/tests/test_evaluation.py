import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedprov.errors import UndefinedMetricError, ValidationError
from fedprov.evaluation import (
    auc_pairwise_oracle,
    calibration_curve,
    confusion_at_threshold,
    downsample_majority,
    precision_recall_f1,
    roc_auc,
)
from fedprov.numerics import sigmoid
from fedprov.schema import LabeledMatrix

from conftest import random_matrix


class TestConfusion:
    def test_basic_tally(self):
        c = confusion_at_threshold(np.array([0.9, 0.2]), np.array([1, 0]))
        assert (c.tp, c.tn, c.fp, c.fn) == (1, 1, 0, 0)

    def test_exact_half_predicts_positive(self):
        c = confusion_at_threshold(np.array([0.5]), np.array([0]))
        assert c.fp == 1

    def test_all_negative_below_threshold(self):
        c = confusion_at_threshold(np.array([0.1, 0.2, 0.3]), np.zeros(3))
        assert (c.tn, c.tp, c.fp, c.fn) == (3, 0, 0, 0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            confusion_at_threshold(np.array([0.5, 0.5]), np.array([1]))


class TestPrecisionRecallF1:
    def test_hand_countable_case(self):
        c = confusion_at_threshold(np.array([0.9, 0.9, 0.1]), np.array([1, 0, 1]))
        row = precision_recall_f1(c)
        assert row.precision == 0.5
        assert row.recall == 0.5
        assert row.f1 == 0.5
        assert row.auc is None

    def test_perfect_prediction(self):
        probs = np.array([0.9, 0.8, 0.1])
        labels = np.array([1, 1, 0])
        row = precision_recall_f1(confusion_at_threshold(probs, labels))
        assert row.precision == row.recall == row.f1 == 1.0

    def test_degenerate_counts_give_zeros(self):
        c = confusion_at_threshold(np.array([0.1, 0.2]), np.array([1, 1]))
        row = precision_recall_f1(c)
        assert (row.precision, row.recall, row.f1) == (0.0, 0.0, 0.0)


class TestRocAuc:
    def test_perfect_ranking(self):
        assert roc_auc(np.array([0.9, 0.1]), np.array([1, 0])) == 1.0

    def test_one_concordant_one_discordant_pair(self):
        # pairs: (0.9 pos vs 0.8 neg) concordant, (0.3 pos vs 0.8 neg) discordant
        assert roc_auc(np.array([0.9, 0.8, 0.3]), np.array([1, 0, 1])) == 0.5

    def test_all_ties_count_half(self):
        assert roc_auc(np.full(6, 0.4), np.array([1, 0, 1, 0, 0, 1])) == 0.5

    def test_single_class_undefined(self):
        with pytest.raises(UndefinedMetricError):
            roc_auc(np.array([0.2, 0.8]), np.array([1, 1]))

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(0)
        probs = rng.random(40)
        labels = (rng.random(40) < 0.5).astype(float)
        base = roc_auc(probs, labels)
        assert roc_auc(sigmoid(5 * probs - 1), labels) == pytest.approx(base, abs=1e-12)
        assert roc_auc(probs**3, labels) == pytest.approx(base, abs=1e-12)

    def test_complement_symmetry(self):
        rng = np.random.default_rng(1)
        probs = rng.integers(0, 10, 30) / 10.0  # ties included
        labels = (rng.random(30) < 0.4).astype(float)
        assert roc_auc(1 - probs, 1 - labels) == pytest.approx(
            roc_auc(probs, labels), abs=1e-12
        )


class TestPairwiseOracle:
    def test_equals_trapezoid_on_200_random_instances(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            n = int(rng.integers(2, 51))
            # coarse grid forces ties
            probs = rng.integers(0, 8, n) / 7.0
            labels = np.zeros(n)
            labels[: max(1, int(rng.integers(1, n)))] = 1.0
            rng.shuffle(labels)
            if labels.min() == labels.max():
                labels[0] = 1.0 - labels[0]
            assert abs(roc_auc(probs, labels) - auc_pairwise_oracle(probs, labels)) <= 1e-12

    def test_tied_pair_is_half(self):
        assert auc_pairwise_oracle(np.array([0.5, 0.5]), np.array([1, 0])) == 0.5

    def test_reversed_perfect_ranking_is_zero(self):
        assert auc_pairwise_oracle(np.array([0.1, 0.9]), np.array([1, 0])) == 0.0

    @given(st.data())
    @settings(max_examples=50, deadline=None)
    def test_oracle_equivalence_property(self, data):
        n = data.draw(st.integers(2, 30))
        probs = np.array(data.draw(st.lists(
            st.sampled_from([0.0, 0.25, 0.5, 0.6, 1.0]), min_size=n, max_size=n)))
        labels = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)),
                          dtype=float)
        if labels.min() == labels.max():
            labels[0] = 1.0 - labels[0]
        assert abs(roc_auc(probs, labels) - auc_pairwise_oracle(probs, labels)) <= 1e-12


class TestCalibration:
    def test_constant_half_predictor_on_balanced_labels(self):
        probs = np.full(100, 0.5)
        labels = np.array([0, 1] * 50, dtype=float)
        curve = calibration_curve(probs, labels)
        occupied = [b for b in curve.bins if b.count]
        assert len(occupied) == 1
        assert occupied[0].mean_pred == 0.5
        assert occupied[0].obs_frac == 0.5
        assert curve.ece == pytest.approx(0.0, abs=1e-12)

    def test_miscalibrated_constant_predictor(self):
        curve = calibration_curve(np.full(50, 0.9), np.zeros(50))
        occupied = [b for b in curve.bins if b.count]
        assert occupied[0].obs_frac == 0.0
        assert curve.ece == pytest.approx(0.9, abs=1e-12)

    def test_bins_partition_unit_interval_and_counts_sum(self):
        rng = np.random.default_rng(5)
        probs = rng.random(200)
        labels = (rng.random(200) < probs).astype(float)
        curve = calibration_curve(probs, labels, n_bins=10)
        assert len(curve.bins) == 10
        assert curve.bins[0].lo == 0.0 and curve.bins[-1].hi == 1.0
        for a, b in zip(curve.bins, curve.bins[1:]):
            assert a.hi == b.lo
        assert sum(b.count for b in curve.bins) == 200

    def test_probability_one_lands_in_last_bin(self):
        curve = calibration_curve(np.array([1.0, 0.0]), np.array([1.0, 0.0]), n_bins=10)
        assert curve.bins[-1].count == 1
        assert curve.bins[0].count == 1

    def test_empty_bins_flagged_with_nan_means(self):
        curve = calibration_curve(np.array([0.05, 0.95]), np.array([0.0, 1.0]))
        assert np.isnan(curve.bins[4].mean_pred)
        assert curve.bins[4].count == 0

    def test_well_specified_logistic_fit_is_calibrated(self):
        # labels generated from a known logistic model; a fitted LR should
        # produce near-diagonal reliability
        from fedprov.models import default_logistic_config, lr_predict, train_logistic

        rng = np.random.default_rng(77)
        n = 8000
        x = np.zeros((n, 14))
        x[:, :4] = rng.normal(size=(n, 4))
        true_w = np.zeros(14)
        true_w[:4] = [1.0, -0.7, 0.5, 0.3]
        y = (rng.random(n) < sigmoid(x @ true_w - 0.4)).astype(float)
        model = train_logistic(LabeledMatrix(x=x, y=y), default_logistic_config(seed=3))
        curve = calibration_curve(np.asarray(lr_predict(model, x)), y)
        assert curve.ece < 0.05

    def test_validation(self):
        with pytest.raises(ValidationError):
            calibration_curve(np.array([0.5]), np.array([1.0]), n_bins=1)
        with pytest.raises(ValidationError):
            calibration_curve(np.array([]), np.array([]))
        with pytest.raises(ValidationError):
            calibration_curve(np.array([1.5]), np.array([1.0]))


class TestDownsample:
    def test_80_20_becomes_20_20(self):
        m = random_matrix(100, seed=2)
        m.y[:] = 0.0
        m.y[:20] = 1.0
        out = downsample_majority(m, seed=0)
        assert int(out.y.sum()) == 20
        assert out.n == 40

    def test_already_balanced_keeps_the_same_rows(self):
        m = random_matrix(40, seed=3)
        m.y[:] = 0.0
        m.y[:20] = 1.0
        out = downsample_majority(m, seed=1)
        assert out.n == 40
        original = {tuple(row) for row in m.x}
        assert {tuple(row) for row in out.x} == original

    def test_positives_can_be_the_majority(self):
        m = random_matrix(8, seed=4)
        m.y[:] = 1.0
        m.y[:3] = 0.0
        out = downsample_majority(m, seed=0)
        assert int(out.y.sum()) == 3 and out.n == 6

    def test_every_output_row_appears_in_the_input(self):
        m = random_matrix(60, seed=5, pos_rate=0.3)
        out = downsample_majority(m, seed=9)
        input_rows = {tuple(row) for row in m.x}
        assert all(tuple(row) in input_rows for row in out.x)

    def test_single_class_rejected(self):
        m = random_matrix(10, seed=6)
        m.y[:] = 1.0
        with pytest.raises(ValidationError):
            downsample_majority(m, seed=0)

    def test_deterministic_given_seed(self):
        m = random_matrix(50, seed=7, pos_rate=0.25)
        a = downsample_majority(m, seed=11)
        b = downsample_majority(m, seed=11)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
