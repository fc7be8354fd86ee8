"""From-scratch MLP reachability classifier.

ReLU hidden layers, a single linear output whose sign encodes
reachability, softplus classification loss, and minibatch Adam.  Both
parameter gradients (training) and input gradients (planning) come from
reverse-mode differentiation.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_X_y, check_array


def softplus(z):
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0)


class MlpClassifier(BaseEstimator):
    def __init__(self, hidden=(64, 32), lr=1e-3, batch_size=256, epochs=500,
                 seed=0, offset=0.0):
        self.hidden = hidden
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.offset = offset
        self.weights_ = None

    def _check_fitted(self):
        if self.weights_ is None:
            raise NotFittedError("model is not fitted")

    def _init_params(self, n_in, rng):
        sizes = [n_in, *self.hidden, 1]
        self.weights_ = []
        self.biases_ = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            self.weights_.append(rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)))
            self.biases_.append(np.zeros(b))

    def _forward(self, X):
        """Returns the list of layer activations; the last entry is the
        (N, 1) linear output."""
        acts = [X]
        h = X
        for k, (W, b) in enumerate(zip(self.weights_, self.biases_)):
            h = h @ W + b
            if k < len(self.weights_) - 1:
                h = np.maximum(h, 0.0)
            acts.append(h)
        return acts

    def fit(self, X, y):
        X, y = check_X_y(np.asarray(X, dtype=float), np.asarray(y))
        labels = set(np.unique(y))
        if labels != {-1, 1}:
            raise ValueError(
                "MLP training needs both labels (+1 and -1); for "
                "positive-only data use the one-class SVM")
        y = y.astype(float)
        rng = np.random.default_rng(self.seed)
        self._init_params(X.shape[1], rng)
        mom = [np.zeros_like(w) for w in self.weights_ + self.biases_]
        vel = [np.zeros_like(w) for w in self.weights_ + self.biases_]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        step = 0
        n = len(X)
        self.loss_curve_ = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for s in range(0, n, self.batch_size):
                idx = order[s:s + self.batch_size]
                Xb, yb = X[idx], y[idx]
                acts = self._forward(Xb)
                f = acts[-1][:, 0]
                epoch_loss += float(np.sum(softplus(-yb * f)))
                # dL/df = -y * sigmoid(-y f), written overflow-safe
                e = np.exp(-np.abs(yb * f))
                sig = np.where(yb * f >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
                dout = (-yb * sig / len(idx))[:, None]
                grads_w, grads_b = [], []
                g = dout
                for k in range(len(self.weights_) - 1, -1, -1):
                    grads_w.append(acts[k].T @ g)
                    grads_b.append(g.sum(axis=0))
                    if k > 0:
                        g = (g @ self.weights_[k].T) * (acts[k] > 0)
                grads = grads_w[::-1] + grads_b[::-1]
                params = self.weights_ + self.biases_
                step += 1
                for p, gr, m, v in zip(params, grads, mom, vel):
                    m *= beta1
                    m += (1 - beta1) * gr
                    v *= beta2
                    v += (1 - beta2) * gr * gr
                    mhat = m / (1 - beta1 ** step)
                    vhat = v / (1 - beta2 ** step)
                    p -= self.lr * mhat / (np.sqrt(vhat) + eps)
            self.loss_curve_.append(epoch_loss / n)
        return self

    def decision_function(self, X):
        self._check_fitted()
        X = check_array(np.atleast_2d(np.asarray(X, dtype=float)))
        return self._forward(X)[-1][:, 0] + self.offset

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, 1, -1)

    def gradient(self, X):
        """d decision / d input via reverse-mode differentiation."""
        self._check_fitted()
        X1 = check_array(np.atleast_2d(np.asarray(X, dtype=float)))
        acts = self._forward(X1)
        g = np.ones((len(X1), 1))
        for k in range(len(self.weights_) - 1, -1, -1):
            g = g @ self.weights_[k].T
            if k > 0:
                g = g * (acts[k] > 0)
        return g.reshape(np.shape(X))

    def to_dict(self):
        return {
            "kind": "mlp",
            "hyperparameters": {"hidden": list(self.hidden), "lr": self.lr,
                                "batch_size": self.batch_size,
                                "epochs": self.epochs, "seed": self.seed},
            "offset": self.offset,
            "parameters": {
                **{f"W{k}": w for k, w in enumerate(self.weights_)},
                **{f"b{k}": b for k, b in enumerate(self.biases_)},
                "n_layers": len(self.weights_),
            },
        }

    @classmethod
    def from_dict(cls, d):
        h = d["hyperparameters"]
        m = cls(hidden=tuple(h["hidden"]), lr=h["lr"],
                batch_size=h["batch_size"], epochs=h["epochs"],
                seed=h["seed"], offset=d["offset"])
        p = d["parameters"]
        n = p["n_layers"]
        m.weights_ = [np.asarray(p[f"W{k}"], dtype=float) for k in range(n)]
        m.biases_ = [np.asarray(p[f"b{k}"], dtype=float) for k in range(n)]
        return m
