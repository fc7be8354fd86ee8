"""Quantitative evaluation: IoU against labeled test sets, decision-offset
sweeps, and the label-only baseline classifiers (k-NN, convex hull).

Baselines emit labels, never decision values, so they cannot be wired
into gradient-based planning: they deliberately do not implement the
decision_function/gradient interface.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .sampling import SampleSet


@dataclass
class EvalReport:
    iou: float
    tp: int
    fp: int
    fn: int
    tn: int
    mean_inference_time: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def counts_total(self):
        return self.tp + self.fp + self.fn + self.tn

    def as_csv_row(self) -> str:
        return "%.6f,%d,%d,%d,%d,%.3g" % (self.iou, self.tp, self.fp,
                                          self.fn, self.tn,
                                          self.mean_inference_time)

    def __str__(self):
        return (f"IoU {self.iou:.4f}  tp={self.tp} fp={self.fp} "
                f"fn={self.fn} tn={self.tn}  "
                f"t={self.mean_inference_time * 1e6:.1f}us/sample")


def _predict_labels(model, X, rho_override=None):
    if hasattr(model, "decision_function"):
        values = np.asarray(model.decision_function(X))
        if rho_override is not None:
            values = values - model.offset + rho_override
        return np.where(values >= 0.0, 1, -1)
    if rho_override is not None:
        raise ValueError("offset override requires a decision-valued model")
    return np.asarray(model.predict(X))


def compute_iou(model, test: SampleSet, rho_override=None,
                measure_time=False) -> EvalReport:
    """IoU over the positive class: tp / (tp + fp + fn)."""
    if len(test) == 0:
        raise ValueError("empty test set")
    pred = _predict_labels(model, test.inputs, rho_override)
    actual = test.labels
    tp = int(np.sum((pred == 1) & (actual == 1)))
    fp = int(np.sum((pred == 1) & (actual == -1)))
    fn = int(np.sum((pred == -1) & (actual == 1)))
    tn = int(np.sum((pred == -1) & (actual == -1)))
    denom = tp + fp + fn
    iou = tp / denom if denom else 1.0
    t = float("nan")
    if measure_time and hasattr(model, "decision_function"):
        n = min(len(test), 10000)
        times = []
        for x in test.inputs[:n]:
            t0 = time.perf_counter()
            model.decision_function(x[None, :])
            times.append(time.perf_counter() - t0)
        t = float(np.median(times))
    meta = {"model": type(model).__name__, "rho": rho_override,
            "test_size": len(test)}
    return EvalReport(iou=iou, tp=tp, fp=fp, fn=fn, tn=tn,
                      mean_inference_time=t, meta=meta)


def offset_sweep(model, test: SampleSet, rho_values):
    """(rho, IoU) pairs for each candidate decision offset."""
    rho_values = list(rho_values)
    if len(rho_values) < 2:
        raise ValueError("need at least two offset values")
    return [(float(r), compute_iou(model, test, rho_override=r).iou)
            for r in rho_values]


class KnnClassifier:
    """Majority vote of the k nearest training samples (labels only)."""

    def __init__(self, train: SampleSet, k: int = 5):
        if k % 2 == 0:
            raise ValueError("k must be odd")
        self.k = k
        self.tree = cKDTree(train.inputs)
        self.labels = train.labels

    def predict(self, X):
        X = np.atleast_2d(X)
        _, idx = self.tree.query(X, k=self.k)
        idx = np.asarray(idx).reshape(len(X), self.k)
        return np.where(self.labels[idx].sum(axis=1) >= 0, 1, -1)


class ConvexHullClassifier:
    """Inclusion in the convex hull of the positive training samples.

    Only defined for R2/R3 point inputs.
    """

    def __init__(self, train: SampleSet):
        if train.space.kind not in ("R2", "R3"):
            raise ValueError("convex hull baseline only supports R2/R3")
        pos = train.inputs[train.labels == 1]
        dim = train.space.input_dim
        if len(pos) < dim + 1:
            raise ValueError("degenerate hull: need at least dim+1 positive points")
        try:
            self.hull = Delaunay(pos)
        except Exception as exc:  # coplanar/collinear point sets
            raise ValueError(f"degenerate hull: {exc}") from exc

    def predict(self, X):
        X = np.atleast_2d(X)
        return np.where(self.hull.find_simplex(X) >= 0, 1, -1)
