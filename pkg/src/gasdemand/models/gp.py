"""Gaussian process regression with an RBF kernel and exact Cholesky posterior."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from ._base import BaseForecaster, register
from ._rowwise import contiguous, matvec, rbf_cross
from .svr import rbf_kernel

__all__ = ["GPForecaster"]

JITTER = 1e-8


@register("gp")
class GPForecaster(BaseForecaster):
    """Zero-mean GP prior ``signal_var * exp(-gamma ||x - x'||^2)`` plus white noise.

    With ``normalize_y=True`` the target is centered and scaled to unit
    variance before fitting and predictions are mapped back.
    """

    def __init__(self, gamma=None, signal_var=1.0, noise_var=0.1, normalize_y=True, standardize=True):
        self.gamma = gamma
        self.signal_var = signal_var
        self.noise_var = noise_var
        self.normalize_y = normalize_y
        self.standardize = standardize

    def _k(self, A, B):
        return self.signal_var * rbf_kernel(A, B, self.gamma_)

    def fit(self, X, y):
        if not self.noise_var > 0:
            raise ValueError(f"noise_var must be > 0, got {self.noise_var}")
        if not self.signal_var > 0:
            raise ValueError(f"signal_var must be > 0, got {self.signal_var}")
        X, y = self._validate_fit(X, y)
        Xs = self._scale(X)
        self.gamma_ = 1.0 / X.shape[1] if self.gamma is None else float(self.gamma)
        if self.normalize_y:
            self.y_mean_ = float(y.mean())
            sd = float(y.std())
            self.y_scale_ = sd if sd > 0 else 1.0
        else:
            self.y_mean_, self.y_scale_ = 0.0, 1.0
        yn = (y - self.y_mean_) / self.y_scale_
        K = self._k(Xs, Xs)
        K[np.diag_indices_from(K)] += self.noise_var
        try:
            L = scipy.linalg.cholesky(K, lower=True)
        except np.linalg.LinAlgError:
            K[np.diag_indices_from(K)] += JITTER
            try:
                L = scipy.linalg.cholesky(K, lower=True)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError(
                    f"GP covariance not positive definite even with jitter {JITTER}") from exc
        self.train_X_ = Xs
        self.chol_ = L
        self.dual_coef_ = scipy.linalg.cho_solve((L, True), yn)
        self.log_marginal_likelihood_ = float(
            -0.5 * yn @ self.dual_coef_ - np.log(np.diag(L)).sum() - 0.5 * yn.size * np.log(2 * np.pi))
        return self

    def predict(self, X, return_var=False):
        X = self._scale(self._validate_predict(X))
        Ks = self.signal_var * rbf_cross(contiguous(X), contiguous(self.train_X_), float(self.gamma_))
        mean = matvec(Ks, contiguous(self.dual_coef_)) * self.y_scale_ + self.y_mean_
        if not return_var:
            return mean
        V = scipy.linalg.solve_triangular(self.chol_, Ks.T, lower=True)
        var = self.signal_var - (V * V).sum(axis=0)
        return mean, var * self.y_scale_**2
