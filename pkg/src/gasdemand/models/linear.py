"""Penalized linear regression: ridge, lasso and elastic net.

All three minimize ``||y - X b||^2 + penalty(b)`` with an unpenalized
intercept, on centered (and by default standardized) features:

* ridge:        ``lam * ||b||_2^2``
* lasso:        ``lam * ||b||_1``
* elastic net:  ``lam * (alpha * ||b||_2^2 + (1 - alpha) * ||b||_1)``

Note the elastic-net mixing convention: ``alpha`` weights the *squared*
L2 norm, so ``alpha=1`` is ridge and ``alpha=0`` is lasso. This is the
reverse of scikit-learn's ``l1_ratio``.
"""

from __future__ import annotations

import warnings

import numba
import numpy as np
import scipy.linalg
from sklearn.exceptions import ConvergenceWarning

from ._base import BaseForecaster, register
from ._rowwise import contiguous, matvec

__all__ = [
    "RidgeForecaster",
    "LassoForecaster",
    "ElasticNetForecaster",
    "elastic_net_objective",
    "elastic_net_kkt_residual",
]


class _LinearForecaster(BaseForecaster):
    def _center(self, X, y):
        Xs = self._scale(X)
        self.xs_mean_ = Xs.mean(axis=0)
        self.y_mean_ = float(y.mean())
        return Xs - self.xs_mean_, y - self.y_mean_

    def _set_intercept(self):
        self.intercept_ = self.y_mean_ - float(self.xs_mean_ @ self.coef_)

    def predict(self, X):
        X = self._validate_predict(X)
        return matvec(contiguous(self._scale(X)), contiguous(self.coef_)) + self.intercept_


@register("ridge")
class RidgeForecaster(_LinearForecaster):
    """Ridge regression solved through its normal equations.

    ``coef_`` lives in the standardized feature space; ``intercept_`` is
    the unpenalized offset in that space.
    """

    def __init__(self, lam=1.0, standardize=True):
        self.lam = lam
        self.standardize = standardize

    def fit(self, X, y):
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        X, y = self._validate_fit(X, y)
        Xc, yc = self._center(X, y)
        A = Xc.T @ Xc
        A[np.diag_indices_from(A)] += self.lam
        self.coef_ = scipy.linalg.solve(A, Xc.T @ yc, assume_a="pos")
        self._set_intercept()
        return self


@numba.njit(cache=True)
def _cd_elastic_net(G, c, l1, l2, beta, tol, max_sweeps):
    """Cyclic coordinate descent on ``b'Gb - 2c'b + l2*||b||^2 + l1*||b||_1``.

    ``G = X'X`` and ``c = X'y``. Returns (beta, sweeps, max_change).
    """
    p = G.shape[0]
    # grad_j of the quadratic part without the diagonal term: c_j - sum_k G_jk b_k
    Gb = G @ beta
    max_change = 0.0
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in range(p):
            bj = beta[j]
            rho = c[j] - Gb[j] + G[j, j] * bj
            denom = G[j, j] + l2
            if denom <= 0.0:
                new = 0.0
            elif rho > 0.5 * l1:
                new = (rho - 0.5 * l1) / denom
            elif rho < -0.5 * l1:
                new = (rho + 0.5 * l1) / denom
            else:
                new = 0.0
            d = new - bj
            if d != 0.0:
                beta[j] = new
                for k in range(p):
                    Gb[k] += G[k, j] * d
                ad = abs(d)
                if ad > max_change:
                    max_change = ad
        if max_change < tol:
            return beta, sweep + 1, max_change
    return beta, max_sweeps, max_change


def _polish(G, c, l1, l2, beta, max_rounds=50):
    """Active-set refinement of a coordinate-descent iterate.

    Solves the stationarity equations on the current support with signs
    fixed, dropping coordinates whose sign flips and adding coordinates
    that violate the optimality conditions off the support. Returns
    ``None`` if this does not settle (e.g. exactly collinear columns).
    """
    p = beta.size
    active = beta != 0
    sign = np.sign(beta)
    out = np.zeros(p)
    for _ in range(max_rounds):
        idx = np.flatnonzero(active)
        out = np.zeros(p)
        if idx.size:
            A = G[np.ix_(idx, idx)] + l2 * np.eye(idx.size)
            if np.linalg.cond(A) > 1e12:
                return None
            out[idx] = scipy.linalg.solve(A, c[idx] - 0.5 * l1 * sign[idx], assume_a="sym")
            flipped = idx[np.sign(out[idx]) != sign[idx]]
            if flipped.size:
                active[flipped] = False
                sign[flipped] = 0.0
                continue
        grad = c - G @ out - l2 * out
        viol = ~active & (np.abs(grad) > 0.5 * l1 * (1 + 1e-9) + 1e-12)
        if not viol.any():
            return out
        j = int(np.argmax(np.where(viol, np.abs(grad), -np.inf)))
        active[j] = True
        sign[j] = np.sign(grad[j])
    return None


def elastic_net_objective(X, y, beta, lam, alpha):
    """``||y - X b||^2 + lam * (alpha ||b||^2 + (1 - alpha) ||b||_1)`` (no intercept)."""
    r = y - X @ beta
    return float(r @ r + lam * (alpha * beta @ beta + (1.0 - alpha) * np.abs(beta).sum()))


def elastic_net_kkt_residual(X, y, beta, lam, alpha):
    """Largest violation of the subgradient optimality conditions."""
    grad = -2.0 * X.T @ (y - X @ beta) + 2.0 * lam * alpha * beta
    l1 = lam * (1.0 - alpha)
    nz = beta != 0
    res = np.where(nz, np.abs(grad + l1 * np.sign(beta)), np.maximum(np.abs(grad) - l1, 0.0))
    return float(res.max()) if res.size else 0.0


@register("elastic_net")
class ElasticNetForecaster(_LinearForecaster):
    """Elastic net by cyclic coordinate descent.

    Parameters
    ----------
    lam : float
        Overall penalty strength, > 0.
    alpha : float
        Weight of the squared-L2 term in [0, 1]; ``1 - alpha`` weights L1.
    tol : float
        Stop when the largest coordinate update of a sweep is below ``tol``.
    max_sweeps : int
        Sweep cap; hitting it emits a ``ConvergenceWarning`` that reports the
        KKT residual.
    """

    def __init__(self, lam=1.0, alpha=0.5, standardize=True, tol=1e-8, max_sweeps=10_000):
        self.lam = lam
        self.alpha = alpha
        self.standardize = standardize
        self.tol = tol
        self.max_sweeps = max_sweeps

    def _mix(self):
        return self.alpha

    def fit(self, X, y):
        alpha = self._mix()
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {alpha}")
        X, y = self._validate_fit(X, y)
        Xc, yc = self._center(X, y)
        G = Xc.T @ Xc
        c = Xc.T @ yc
        beta = np.zeros(X.shape[1])
        beta, sweeps, change = _cd_elastic_net(
            G, c, self.lam * (1.0 - alpha), self.lam * alpha, beta, self.tol, self.max_sweeps)
        kkt = elastic_net_kkt_residual(Xc, yc, beta, self.lam, alpha)
        if change >= self.tol:
            # Slow coordinate descent on near-collinear columns: try the
            # active-set solution implied by the current support and signs.
            polished = _polish(G, c, self.lam * (1.0 - alpha), self.lam * alpha, beta)
            if polished is not None:
                pk = elastic_net_kkt_residual(Xc, yc, polished, self.lam, alpha)
                if pk < kkt:
                    beta, kkt = polished, pk
                    change = 0.0 if pk <= 1e-6 else change
        self.coef_ = beta
        self.n_iter_ = int(sweeps)
        self.kkt_residual_ = kkt
        if change >= self.tol:
            warnings.warn(
                f"coordinate descent stopped after {sweeps} sweeps (last change {change:.3g}, "
                f"KKT residual {self.kkt_residual_:.3g})",
                ConvergenceWarning,
                stacklevel=2,
            )
        self._set_intercept()
        return self


@register("lasso")
class LassoForecaster(ElasticNetForecaster):
    """Lasso: the ``alpha=0`` end of :class:`ElasticNetForecaster`."""

    def __init__(self, lam=1.0, standardize=True, tol=1e-8, max_sweeps=10_000):
        self.lam = lam
        self.standardize = standardize
        self.tol = tol
        self.max_sweeps = max_sweeps

    def _mix(self):
        return 0.0
