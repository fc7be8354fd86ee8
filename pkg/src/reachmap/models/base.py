"""Shared model machinery: RBF kernel evaluation with a bounded row cache,
the sign predicate for reachability, input mirroring, and JSON round trips.
"""

from __future__ import annotations

import json

import numpy as np

# Precompute the full kernel matrix only while it fits in about 1 GB;
# above that, rows are computed on demand behind a FIFO cache.
KERNEL_MATRIX_MAX_BYTES = 1.0e9


def rbf_kernel_matrix(A, B, gamma):
    """exp(-gamma * ||a - b||^2) for all pairs; (len(A), len(B))."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class KernelCache:
    """Row access to the training kernel matrix.

    Precomputes the full matrix when small enough, otherwise keeps a
    bounded FIFO of recently requested rows.
    """

    def __init__(self, X, gamma, max_bytes=KERNEL_MATRIX_MAX_BYTES):
        self.X = np.asarray(X, dtype=float)
        self.gamma = float(gamma)
        L = len(self.X)
        self._sq = np.sum(self.X * self.X, axis=1)
        if L * L * 8 <= max_bytes:
            self.full = rbf_kernel_matrix(self.X, self.X, gamma)
            self._cache = None
        else:
            self.full = None
            self._cache = {}
            self._order = []
            self._cap = max(16, int(max_bytes / (8 * L)))

    def row(self, i):
        if self.full is not None:
            return self.full[i]
        k = self._cache.get(i)
        if k is None:
            sq = self._sq[i] + self._sq - 2.0 * (self.X @ self.X[i])
            np.maximum(sq, 0.0, out=sq)
            k = np.exp(-self.gamma * sq)
            self._cache[i] = k
            self._order.append(i)
            if len(self._order) > self._cap:
                del self._cache[self._order.pop(0)]
        return k

    def diag(self):
        return np.ones(len(self.X))


def is_reachable(model, X):
    """The single sign predicate: predicted reachable iff decision >= 0."""
    return np.asarray(model.decision_function(X)) >= 0.0


class MirroredMap:
    """A reachability map evaluated on sign-flipped inputs.

    Used for footstep planning where the right-foot-from-left map is the
    left-foot-from-right map with the lateral and yaw input components
    negated.  Shares the underlying trained model.
    """

    def __init__(self, base, signs):
        self.base = base
        self.signs = np.asarray(signs, dtype=float)

    def decision_function(self, X):
        return self.base.decision_function(np.atleast_2d(X) * self.signs)

    def gradient(self, X):
        g = self.base.gradient(np.atleast_2d(X) * self.signs) * self.signs
        return g.reshape(np.shape(X))


def mirror_se2(base) -> MirroredMap:
    """Mirror an SE2-input map across the x axis: (x, y, c, s) -> (x, -y, c, -s)."""
    return MirroredMap(base, (1.0, -1.0, 1.0, -1.0))


def _fmt(v):
    return float("%.17g" % v)


def _array_out(a):
    a = np.asarray(a)
    if a.ndim == 1:
        return [_fmt(v) for v in a]
    return [[_fmt(v) for v in row] for row in a]


def save_model(model, path):
    """Serialize a trained model to JSON (17 significant digits)."""
    d = model.to_dict()
    d["parameters"] = {k: _array_out(v) if isinstance(v, np.ndarray) else v
                       for k, v in d["parameters"].items()}
    with open(path, "w") as f:
        json.dump(d, f, sort_keys=True, indent=1)
        f.write("\n")


def load_model(path):
    from .mlp import MlpClassifier
    from .svm import OneClassRbfSvm, RbfSvmClassifier
    with open(path) as f:
        d = json.load(f)
    kinds = {"rbf_svm": RbfSvmClassifier, "one_class_rbf_svm": OneClassRbfSvm,
             "mlp": MlpClassifier}
    kind = d.get("kind")
    if kind not in kinds:
        raise ValueError(f"unknown model kind: {kind!r}")
    return kinds[kind].from_dict(d)
