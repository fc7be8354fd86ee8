"""RBF-kernel SVM reachability maps trained by sequential minimal
optimization, plus the one-class variant for positive-only data.

The decision value is sum_i coef_i * exp(-gamma ||x - x_i||^2) + intercept
+ offset, with coef_i = alpha_i * y_i for the regular SVM and alpha_i for
the one-class SVM (whose intercept is -b).  The constant offset shifts
the decision boundary outward and is excluded from the gradient.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_X_y, check_array

from .base import KernelCache, rbf_kernel_matrix

_EVAL_CHUNK = 2048


class _FittedRbfMixin:
    """Batch decision values and analytic input gradients for a fitted
    RBF expansion."""

    def _check_fitted(self):
        if getattr(self, "support_inputs_", None) is None:
            raise NotFittedError("model is not fitted")

    def decision_function(self, X):
        self._check_fitted()
        X = check_array(np.atleast_2d(X))
        out = np.empty(len(X))
        for s in range(0, len(X), _EVAL_CHUNK):
            K = rbf_kernel_matrix(X[s:s + _EVAL_CHUNK], self.support_inputs_, self.gamma)
            out[s:s + _EVAL_CHUNK] = K @ self.coef_ + self.intercept_ + self.offset
        return out

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, 1, -1)

    def gradient(self, X):
        """d decision / d x, shape like X.  The offset does not contribute."""
        self._check_fitted()
        X1 = check_array(np.atleast_2d(X))
        out = np.empty_like(X1)
        for s in range(0, len(X1), _EVAL_CHUNK):
            chunk = X1[s:s + _EVAL_CHUNK]
            K = rbf_kernel_matrix(chunk, self.support_inputs_, self.gamma)
            W = K * self.coef_[None, :]
            out[s:s + _EVAL_CHUNK] = -2.0 * self.gamma * (
                W.sum(axis=1)[:, None] * chunk - W @ self.support_inputs_)
        return out.reshape(np.shape(X))

    def raw_decision(self, X):
        """Decision value without the constant offset."""
        return self.decision_function(X) - self.offset


class RbfSvmClassifier(_FittedRbfMixin, BaseEstimator):
    """Soft-margin RBF SVM trained with SMO (maximal-violating-pair
    working-set selection)."""

    def __init__(self, gamma=30.0, C=10.0, offset=0.1, tol=1e-3, max_iter=0):
        self.gamma = gamma
        self.C = C
        self.offset = offset
        self.tol = tol
        self.max_iter = max_iter  # 0 -> 400 * n_samples
        self.support_inputs_ = None

    def fit(self, X, y):
        X, y = check_X_y(np.asarray(X, dtype=float), np.asarray(y))
        if set(np.unique(y)) != {-1, 1}:
            raise ValueError(
                "regular SVM training needs both labels; use the one-class "
                "variant for positive-only data")
        if self.gamma <= 0 or self.C <= 0:
            raise ValueError("gamma and C must be positive")
        y = y.astype(float)
        L = len(y)
        C, tol = float(self.C), float(self.tol)
        cache = KernelCache(X, self.gamma)
        alpha = np.zeros(L)
        grad = -np.ones(L)  # d(1/2 a'Qa - e'a)/da with Q_ij = y_i y_j K_ij
        max_iter = self.max_iter or 400 * L
        pos = y > 0
        it = 0
        while True:
            # I_up: alpha can move "up" along +y; I_low: along -y
            up = (pos & (alpha < C - 1e-12)) | (~pos & (alpha > 1e-12))
            low = (pos & (alpha > 1e-12)) | (~pos & (alpha < C - 1e-12))
            viol = -y * grad
            i = int(np.argmax(np.where(up, viol, -np.inf)))
            j = int(np.argmin(np.where(low, viol, np.inf)))
            if viol[i] - viol[j] <= tol or it >= max_iter:
                break
            Ki, Kj = cache.row(i), cache.row(j)
            curv = max(Ki[i] + Kj[j] - 2.0 * Ki[j], 1e-12)
            t = (viol[i] - viol[j]) / curv
            # feasible step range from the box on alpha_i, alpha_j
            if y[i] > 0:
                t = min(t, C - alpha[i])
            else:
                t = min(t, alpha[i])
            if y[j] > 0:
                t = min(t, alpha[j])
            else:
                t = min(t, C - alpha[j])
            alpha[i] += y[i] * t
            alpha[j] -= y[j] * t
            grad += t * y * (Ki - Kj)
            it += 1
        self.n_iter_ = it
        # intercept from the KKT conditions: net_i = sum_j a_j y_j K_ij
        net = y * (grad + 1.0)
        free = (alpha > 1e-8) & (alpha < C - 1e-8)
        if np.any(free):
            b = float(np.mean(y[free] - net[free]))
        else:
            b_lo = np.max(np.where(up, y - net, -np.inf))
            b_hi = np.min(np.where(low, y - net, np.inf))
            b = 0.5 * (b_lo + b_hi)
        sv = alpha > 1e-10
        self.support_inputs_ = X[sv].copy()
        self.dual_coef_ = alpha[sv] * y[sv]
        self.coef_ = self.dual_coef_
        self.alpha_ = alpha[sv]
        self.support_labels_ = y[sv].astype(int)
        self.intercept_ = b
        return self

    def dual_objective(self):
        """Value of the maximized dual at the fitted alpha (for oracle checks)."""
        self._check_fitted()
        K = rbf_kernel_matrix(self.support_inputs_, self.support_inputs_, self.gamma)
        a_y = self.dual_coef_
        return float(np.sum(self.alpha_) - 0.5 * a_y @ K @ a_y)

    def to_dict(self):
        return {
            "kind": "rbf_svm",
            "hyperparameters": {"gamma": self.gamma, "C": self.C,
                                "tol": self.tol},
            "offset": self.offset,
            "parameters": {
                "support_inputs": self.support_inputs_,
                "coef": self.coef_,
                "alpha": self.alpha_,
                "support_labels": self.support_labels_.tolist(),
                "intercept": self.intercept_,
            },
        }

    @classmethod
    def from_dict(cls, d):
        h = d["hyperparameters"]
        m = cls(gamma=h["gamma"], C=h["C"], offset=d["offset"], tol=h["tol"])
        p = d["parameters"]
        m.support_inputs_ = np.asarray(p["support_inputs"], dtype=float)
        m.coef_ = np.asarray(p["coef"], dtype=float)
        m.dual_coef_ = m.coef_
        m.alpha_ = np.asarray(p["alpha"], dtype=float)
        m.support_labels_ = np.asarray(p["support_labels"], dtype=int)
        m.intercept_ = float(p["intercept"])
        return m


class OneClassRbfSvm(_FittedRbfMixin, BaseEstimator):
    """nu-parameterized one-class SVM on positive samples only, trained by
    SMO on the one-class dual (0 <= alpha_i <= 1/(nu L), sum alpha = 1)."""

    def __init__(self, gamma=30.0, nu=0.05, offset=0.1, tol=3e-7, max_iter=0):
        self.gamma = gamma
        self.nu = nu
        self.offset = offset
        self.tol = tol
        self.max_iter = max_iter
        self.support_inputs_ = None

    def fit(self, X, y=None):
        X = check_array(np.asarray(X, dtype=float))
        if y is not None:
            y = np.asarray(y)
            if np.any(y != 1):
                raise ValueError("one-class SVM training requires all labels +1")
        if not 0.0 < self.nu <= 1.0:
            raise ValueError("nu must be in (0, 1]")
        L = len(X)
        ub = 1.0 / (self.nu * L)
        cache = KernelCache(X, self.gamma)
        alpha = np.zeros(L)
        n_full = int(np.floor(self.nu * L))
        alpha[:n_full] = ub
        if n_full < L:
            alpha[n_full] = 1.0 - n_full * ub
        # grad = K alpha
        grad = np.zeros(L)
        for idx in np.nonzero(alpha)[0]:
            grad += alpha[idx] * cache.row(idx)
        tol = float(self.tol)
        max_iter = self.max_iter or 400 * L
        it = 0
        while True:
            gi = np.where(alpha < ub - 1e-15, grad, np.inf)
            gj = np.where(alpha > 1e-15, grad, -np.inf)
            i = int(np.argmin(gi))
            j = int(np.argmax(gj))
            if grad[j] - grad[i] <= tol or it >= max_iter:
                break
            Ki, Kj = cache.row(i), cache.row(j)
            curv = max(Ki[i] + Kj[j] - 2.0 * Ki[j], 1e-12)
            t = (grad[j] - grad[i]) / curv
            t = min(t, ub - alpha[i], alpha[j])
            alpha[i] += t
            alpha[j] -= t
            grad += t * (Ki - Kj)
            it += 1
        self.n_iter_ = it
        free = (alpha > 1e-10) & (alpha < ub - 1e-10)
        if np.any(free):
            b = float(np.mean(grad[free]))
        else:
            b = 0.5 * (np.min(np.where(alpha > 1e-15, grad, np.inf))
                       + np.max(np.where(alpha < ub - 1e-15, grad, -np.inf)))
        sv = alpha > 1e-12
        # store coefficients rescaled by nu*L (alpha summing to nu*L, upper
        # bound 1), the customary decision-value scale at which a constant
        # offset like 0.1 is meaningful; the dual solution is identical
        scale = self.nu * L
        self.support_inputs_ = X[sv].copy()
        self.alpha_ = alpha[sv] * scale
        self.coef_ = self.alpha_
        self.intercept_ = -b * scale
        self.upper_bound_ = ub * scale
        return self

    def to_dict(self):
        return {
            "kind": "one_class_rbf_svm",
            "hyperparameters": {"gamma": self.gamma, "nu": self.nu,
                                "tol": self.tol},
            "offset": self.offset,
            "parameters": {
                "support_inputs": self.support_inputs_,
                "alpha": self.alpha_,
                "intercept": self.intercept_,
            },
        }

    @classmethod
    def from_dict(cls, d):
        h = d["hyperparameters"]
        m = cls(gamma=h["gamma"], nu=h["nu"], offset=d["offset"], tol=h["tol"])
        p = d["parameters"]
        m.support_inputs_ = np.asarray(p["support_inputs"], dtype=float)
        m.alpha_ = np.asarray(p["alpha"], dtype=float)
        m.coef_ = m.alpha_
        m.intercept_ = float(p["intercept"])
        return m
