"""Epsilon-insensitive support vector regression with an SMO dual solver.

The dual is written over ``2n`` variables ``a = [alpha; alpha*]`` with
labels ``z = [+1...; -1...]``::

    min  0.5 a'Qa + p'a    s.t.  z'a = 0,  0 <= a <= c
    Q_ij = z_i z_j K(x_i, x_j),   p = [eps - y; eps + y]

Each step updates the maximal violating pair chosen with second-order
information; the prediction is ``sum_i (alpha_i - alpha*_i) K(x_i, x) + b``.
"""

from __future__ import annotations

import warnings

import numba
import numpy as np
from sklearn.exceptions import ConvergenceWarning

from ._base import BaseForecaster, register
from ._rowwise import contiguous, linear_cross, matvec, rbf_cross

__all__ = ["SVRForecaster", "rbf_kernel", "linear_kernel", "smo_solve"]

TAU = 1e-12


def linear_kernel(A, B):
    return A @ B.T


def rbf_kernel(A, B, gamma):
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


@numba.njit(cache=True)
def _smo(K, y, c, eps, tol, max_iter):
    n = y.shape[0]
    m = 2 * n
    a = np.zeros(m)
    z = np.empty(m)
    G = np.empty(m)
    for t in range(n):
        z[t] = 1.0
        z[t + n] = -1.0
        G[t] = eps - y[t]
        G[t + n] = eps + y[t]
    obj = 0.0
    trace = np.empty(max_iter + 1)
    trace[0] = 0.0
    it = 0
    gap = np.inf
    while it < max_iter:
        # working set selection (second order)
        gmax = -np.inf
        i = -1
        for t in range(m):
            if (z[t] > 0 and a[t] < c) or (z[t] < 0 and a[t] > 0):
                v = -z[t] * G[t]
                if v >= gmax:
                    if v > gmax or i < 0:
                        gmax = v
                        i = t
        gmin = np.inf
        j = -1
        best = np.inf
        if i >= 0:
            ii = i % n
            for t in range(m):
                if (z[t] > 0 and a[t] > 0) or (z[t] < 0 and a[t] < c):
                    v = -z[t] * G[t]
                    if v < gmin:
                        gmin = v
                    b = gmax - v
                    if b > 0.0:
                        tt = t % n
                        quad = K[ii, ii] + K[tt, tt] - 2.0 * K[ii, tt]
                        if quad <= 0.0:
                            quad = TAU
                        score = -(b * b) / quad
                        if score < best:
                            best = score
                            j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            break

        ii = i % n
        jj = j % n
        Qii = K[ii, ii]
        Qjj = K[jj, jj]
        Qij = z[i] * z[j] * K[ii, jj]
        old_ai = a[i]
        old_aj = a[j]
        if z[i] != z[j]:
            quad = Qii + Qjj + 2.0 * Qij
            if quad <= 0.0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0:
                if a[i] > c:
                    a[i] = c
                    a[j] = c - diff
            else:
                if a[j] > c:
                    a[j] = c
                    a[i] = c + diff
        else:
            quad = Qii + Qjj - 2.0 * Qij
            if quad <= 0.0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if s > c:
                if a[i] > c:
                    a[i] = c
                    a[j] = s - c
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = s
            if s > c:
                if a[j] > c:
                    a[j] = c
                    a[i] = s - c
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = s
        di = a[i] - old_ai
        dj = a[j] - old_aj
        obj += G[i] * di + G[j] * dj + 0.5 * (Qii * di * di + 2.0 * Qij * di * dj + Qjj * dj * dj)
        zi = z[i]
        zj = z[j]
        for t in range(m):
            tt = t % n
            G[t] += z[t] * (zi * K[tt, ii] * di + zj * K[tt, jj] * dj)
        it += 1
        trace[it] = obj

    # offset: average over free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    s = 0.0
    nfree = 0
    for t in range(m):
        yg = z[t] * G[t]
        if a[t] >= c:
            if z[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[t] <= 0:
            if z[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            s += yg
    if nfree > 0:
        rho = s / nfree
    else:
        rho = 0.5 * (ub + lb)
    return a, -rho, it, gap, trace[: it + 1]


def smo_solve(K, y, c, eps, tol=1e-3, max_iter=100_000):
    """Solve the epsilon-SVR dual for a precomputed kernel matrix.

    Returns ``(alpha, alpha_star, intercept, n_iter, gap, objective_trace)``
    where ``gap`` is the final maximal KKT violation ``m(a) - M(a)``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    a, b, it, gap, trace = _smo(K, y, float(c), float(eps), float(tol), int(max_iter))
    n = y.shape[0]
    return a[:n], a[n:], float(b), int(it), float(gap), trace


@register("svr")
class SVRForecaster(BaseForecaster):
    """Kernel SVR with epsilon-insensitive loss.

    Parameters
    ----------
    c : float
        Box constraint on the dual variables (> 0).
    epsilon : float
        Half-width of the insensitive tube, in target units (>= 0).
    kernel : {"rbf", "linear"}
    gamma : float or None
        RBF width, ``exp(-gamma ||x - x'||^2)``; ``None`` means ``1 / n_features``.
    tol : float
        Stopping tolerance on the maximal KKT violation.
    max_iter : int
        Pair-update cap; hitting it emits a ``ConvergenceWarning``.
    """

    def __init__(self, c=1.0, epsilon=0.1, kernel="rbf", gamma=None, standardize=True,
                 tol=1e-3, max_iter=100_000):
        self.c = c
        self.epsilon = epsilon
        self.kernel = kernel
        self.gamma = gamma
        self.standardize = standardize
        self.tol = tol
        self.max_iter = max_iter

    def _gamma(self, n_features):
        return 1.0 / n_features if self.gamma is None else float(self.gamma)

    def _kernel(self, A, B):
        if self.kernel == "linear":
            return linear_kernel(A, B)
        if self.kernel == "rbf":
            return rbf_kernel(A, B, self.gamma_)
        raise ValueError(f"unknown kernel {self.kernel!r}")

    def fit(self, X, y):
        if not self.c > 0:
            raise ValueError(f"c must be > 0, got {self.c}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        X, y = self._validate_fit(X, y)
        Xs = self._scale(X)
        self.gamma_ = self._gamma(X.shape[1])
        K = self._kernel(Xs, Xs)
        alpha, alpha_star, b, it, gap, trace = smo_solve(K, y, self.c, self.epsilon, self.tol, self.max_iter)
        self.alpha_ = alpha
        self.alpha_star_ = alpha_star
        coef = alpha - alpha_star
        sv = coef != 0.0
        self.support_ = np.flatnonzero(sv)
        self.support_vectors_ = Xs[sv]
        self.dual_coef_ = coef[sv]
        self.intercept_ = b
        self.n_iter_ = it
        self.kkt_gap_ = gap
        self.objective_trace_ = trace
        if gap >= self.tol:
            warnings.warn(
                f"SMO stopped after {it} iterations with KKT violation {gap:.3g} (tol {self.tol})",
                ConvergenceWarning,
                stacklevel=2,
            )
        return self

    def predict(self, X):
        X = self._validate_predict(X)
        if self.dual_coef_.size == 0:
            return np.full(X.shape[0], self.intercept_)
        Xs, S = contiguous(self._scale(X)), contiguous(self.support_vectors_)
        if self.kernel == "linear":
            K = linear_cross(Xs, S)
        else:
            K = rbf_cross(Xs, S, float(self.gamma_))
        return matvec(K, contiguous(self.dual_coef_)) + self.intercept_
