import numpy as np
import pytest

import reachmap as rm
from reachmap.evaluation import (ConvexHullClassifier, EvalReport,
                                 KnnClassifier, compute_iou, offset_sweep)
from reachmap.models import RbfSvmClassifier
from reachmap.sampling import SampleSet


class StubModel:
    """Decision value = x coordinate plus a fixed offset."""

    def __init__(self, offset=0.0):
        self.offset = offset

    def decision_function(self, X):
        return np.atleast_2d(X)[:, 0] + self.offset


def make_set(inputs, labels):
    return SampleSet(rm.R2, np.asarray(inputs, dtype=float),
                     np.asarray(labels, dtype=int), {})


class TestIouArithmetic:
    def test_known_counts(self):
        # predictions: +1 iff x >= 0.  25 true positives, 25 false
        # positives, 25 false negatives, 25 true negatives -> IoU 1/3.
        X = np.concatenate([np.full((25, 2), 1.0), np.full((25, 2), 1.0),
                            np.full((25, 2), -1.0), np.full((25, 2), -1.0)])
        y = np.concatenate([np.ones(25), -np.ones(25),
                            np.ones(25), -np.ones(25)])
        rep = compute_iou(StubModel(), make_set(X, y))
        assert (rep.tp, rep.fp, rep.fn, rep.tn) == (25, 25, 25, 25)
        assert rep.iou == pytest.approx(1 / 3)
        assert rep.counts_total == 100

    def test_perfect_classifier(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(200, 2))
        y = np.where(X[:, 0] >= 0, 1, -1)
        assert compute_iou(StubModel(), make_set(X, y)).iou == 1.0

    def test_order_invariance(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(300, 2))
        y = np.where(rng.uniform(size=300) < 0.5, 1, -1)
        a = compute_iou(StubModel(), make_set(X, y))
        perm = rng.permutation(300)
        b = compute_iou(StubModel(), make_set(X[perm], y[perm]))
        assert a.iou == b.iou
        assert (a.tp, a.fp, a.fn, a.tn) == (b.tp, b.fp, b.fn, b.tn)

    def test_empty_test_set_rejected(self):
        with pytest.raises(ValueError):
            compute_iou(StubModel(), make_set(np.zeros((0, 2)), []))


class TestOffsetOverride:
    def test_override_equals_retuned_model(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(500, 2))
        y = np.where(X[:, 0] + 0.3 >= 0, 1, -1)
        test = make_set(X, y)
        overridden = compute_iou(StubModel(offset=0.0), test,
                                 rho_override=0.3)
        retuned = compute_iou(StubModel(offset=0.3), test)
        assert overridden.iou == retuned.iou

    def test_extreme_offsets(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(400, 2))
        y = np.where(X[:, 0] >= 0, 1, -1)
        test = make_set(X, y)
        all_pos = compute_iou(StubModel(), test, rho_override=10.0)
        assert all_pos.fn == 0 and all_pos.tn == 0
        assert all_pos.iou == pytest.approx(np.mean(y == 1))
        none_pos = compute_iou(StubModel(), test, rho_override=-10.0)
        assert none_pos.tp == 0 and none_pos.fp == 0
        assert none_pos.iou == 0.0

    def test_sweep_matches_pointwise(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(200, 2))
        y = np.where(X[:, 0] >= 0.2, 1, -1)
        test = make_set(X, y)
        pairs = offset_sweep(StubModel(), test, [-0.5, 0.0, 0.5])
        for rho, iou in pairs:
            assert iou == compute_iou(StubModel(), test,
                                      rho_override=rho).iou

    def test_sweep_needs_two_values(self):
        with pytest.raises(ValueError):
            offset_sweep(StubModel(), make_set(np.zeros((1, 2)), [1]), [0.0])


class TestBaselines:
    def test_knn_k1_memorizes_training_labels(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(100, 2))
        y = np.where(rng.uniform(size=100) < 0.5, 1, -1)
        train = make_set(X, y)
        knn = KnnClassifier(train, k=1)
        assert np.array_equal(knn.predict(X), y)

    def test_knn_even_k_rejected(self):
        with pytest.raises(ValueError):
            KnnClassifier(make_set(np.zeros((4, 2)), [1, 1, -1, -1]), k=2)

    def test_hull_contains_centroid(self):
        rng = np.random.default_rng(6)
        pos = rng.uniform(-1, 1, size=(50, 2))
        X = np.vstack([pos, pos + 10.0])
        y = np.concatenate([np.ones(50), -np.ones(50)])
        hull = ConvexHullClassifier(make_set(X, y))
        assert hull.predict(pos.mean(axis=0))[0] == 1
        assert hull.predict((pos + 10.0).mean(axis=0))[0] == -1

    def test_hull_degenerate_rejected(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        y = np.ones(4)
        with pytest.raises(ValueError):
            ConvexHullClassifier(make_set(X, y))

    def test_baselines_offer_no_decision_values(self):
        train = make_set(np.random.default_rng(7).normal(size=(20, 2)),
                         [1, -1] * 10)
        knn = KnnClassifier(train, k=3)
        assert not hasattr(knn, "decision_function")
        assert not hasattr(knn, "gradient")
        with pytest.raises(ValueError):
            compute_iou(knn, train, rho_override=0.1)

    def test_hull_loses_to_trained_model(self, arm_svm, arm_ik_samples,
                                         oracle_grid_test):
        hull = ConvexHullClassifier(arm_ik_samples)
        hull_iou = compute_iou(hull, oracle_grid_test).iou
        svm_iou = compute_iou(arm_svm, oracle_grid_test).iou
        print(f"hull IoU {hull_iou:.4f} vs trained {svm_iou:.4f}")
        assert hull_iou < svm_iou


class TestReportFormatting:
    def test_csv_row_fields(self):
        rep = EvalReport(iou=0.5, tp=1, fp=1, fn=0, tn=2,
                         mean_inference_time=1e-5)
        assert rep.as_csv_row().split(",")[0] == "0.500000"
        assert len(rep.as_csv_row().split(",")) == 6
