"""Prediction kernels whose output for a row depends only on that row.

BLAS routines may block rows differently depending on their position, so
two identical query rows can come back a few ulps apart. These loops keep
a fixed summation order per row.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def matvec(X, w):
    n, p = X.shape
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(p):
            s += X[i, j] * w[j]
        out[i] = s
    return out


@numba.njit(cache=True)
def linear_cross(A, B):
    n, m, p = A.shape[0], B.shape[0], A.shape[1]
    K = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(p):
                s += A[i, k] * B[j, k]
            K[i, j] = s
    return K


@numba.njit(cache=True)
def rbf_cross(A, B, gamma):
    n, m, p = A.shape[0], B.shape[0], A.shape[1]
    K = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(p):
                d = A[i, k] - B[j, k]
                s += d * d
            K[i, j] = np.exp(-gamma * s)
    return K


def contiguous(X):
    return np.ascontiguousarray(X, dtype=np.float64)
