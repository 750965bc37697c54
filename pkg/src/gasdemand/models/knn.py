"""k-nearest-neighbour regression on standardized features."""

from __future__ import annotations

import numpy as np

from ._base import BaseForecaster, register

__all__ = ["KNNForecaster"]


@register("knn")
class KNNForecaster(BaseForecaster):
    """Mean target of the ``k`` closest training rows (Euclidean distance).

    Distance ties are broken by training-row order.
    """

    def __init__(self, k=5, standardize=True):
        self.k = k
        self.standardize = standardize

    def fit(self, X, y):
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        X, y = self._validate_fit(X, y)
        self.train_X_ = self._scale(X)
        self.train_y_ = y.copy()
        return self

    def kneighbors(self, X):
        X = self._scale(self._validate_predict(X))
        k = min(int(self.k), self.train_X_.shape[0])
        T = self.train_X_
        d2 = (X * X).sum(axis=1)[:, None] + (T * T).sum(axis=1)[None, :] - 2.0 * (X @ T.T)
        np.maximum(d2, 0.0, out=d2)
        return np.argsort(d2, axis=1, kind="stable")[:, :k]

    def predict(self, X):
        idx = self.kneighbors(X)
        return self.train_y_[idx].mean(axis=1)
