import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdn.metrics import UndefinedMetricError, auc, gap_vs_oracle, mse
from fdn.rng import Rng, derive_seed
from reference import pairwise_auc, pairwise_auc_outer


class TestMse:
    def test_hand_value(self):
        assert mse(np.array([1.0, 2.0]), np.array([1.0, 4.0])) == 2.0

    def test_perfect(self):
        x = np.array([0.3, -1.5, 2.0])
        assert mse(x, x.copy()) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros(3), np.zeros(4))

    def test_empty_undefined(self):
        with pytest.raises(UndefinedMetricError):
            mse(np.zeros(0), np.zeros(0))

    def test_loop_oracle(self):
        rng = Rng(7)
        pred = np.array(rng.normals(40))
        labels = np.array(rng.normals(40))
        expected = sum((p - y) ** 2 for p, y in zip(pred, labels)) / 40
        assert mse(pred, labels) == pytest.approx(expected, rel=1e-12)


class TestAuc:
    def test_perfect_separation(self):
        assert auc(np.array([0.1, 0.9]), np.array([0, 1])) == 1.0

    def test_perfectly_wrong(self):
        assert auc(np.array([0.9, 0.1]), np.array([0, 1])) == 0.0

    def test_all_tied_scores(self):
        scores = np.full(10, 0.5)
        labels = np.array([0, 1] * 5)
        assert auc(scores, labels) == 0.5

    def test_half_tie(self):
        # one positive tied with one negative, one negative clearly below
        assert auc(np.array([1.0, 1.0, 0.0]), np.array([1, 0, 0])) == 0.75

    def test_single_class_undefined(self):
        with pytest.raises(UndefinedMetricError):
            auc(np.array([0.2, 0.4]), np.array([1, 1]))
        with pytest.raises(UndefinedMetricError):
            auc(np.array([0.2, 0.4]), np.array([0, 0]))

    def test_nonbinary_labels(self):
        with pytest.raises(ValueError):
            auc(np.array([0.2, 0.4]), np.array([0, 2]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            auc(np.zeros(3), np.array([0, 1]))

    def test_matches_pairwise_oracle_exactly(self):
        for trial in range(30):
            rng = Rng(derive_seed(99, trial))
            n = 2 + rng.randint_below(200)
            scores = np.round(np.array(rng.normals(n)), 1)  # force ties
            labels = np.array([rng.randint_below(2) for _ in range(n)])
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            assert auc(scores, labels) == pairwise_auc(scores, labels)

    def test_oracle_forms_agree(self):
        rng = Rng(5)
        scores = np.round(np.array(rng.normals(150)), 1)
        labels = np.array([rng.randint_below(2) for _ in range(150)])
        labels[0], labels[1] = 0, 1
        assert pairwise_auc(scores, labels) == pairwise_auc_outer(scores, labels)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_monotone_transform_invariance(self, seed):
        rng = Rng(seed)
        n = 3 + rng.randint_below(60)
        scores = np.round(np.array(rng.normals(n)), 1)
        labels = np.array([rng.randint_below(2) for _ in range(n)])
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        base = auc(scores, labels)
        assert auc(np.exp(scores), labels) == base
        assert auc(3.0 * scores + 10.0, labels) == base


class TestGap:
    def test_equal_is_zero(self):
        assert gap_vs_oracle(0.8, 0.8, "auc") == 0.0
        assert gap_vs_oracle(1.3, 1.3, "mse") == 0.0

    def test_mse_direction(self):
        # model mse above oracle -> negative gap (worse)
        assert gap_vs_oracle(1.01, 1.0, "mse") == pytest.approx(-1.0)
        assert gap_vs_oracle(0.9, 1.0, "mse") == pytest.approx(10.0)

    def test_auc_direction(self):
        # model auc above oracle -> positive gap (better)
        assert gap_vs_oracle(0.99, 0.9, "auc") == pytest.approx(10.0)
        assert gap_vs_oracle(0.81, 0.9, "auc") == pytest.approx(-10.0)

    def test_zero_oracle_undefined(self):
        with pytest.raises(UndefinedMetricError):
            gap_vs_oracle(0.5, 0.0, "mse")

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            gap_vs_oracle(0.5, 0.5, "accuracy")
