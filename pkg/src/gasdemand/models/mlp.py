"""Feed-forward tanh network trained by mini-batch gradient descent.

Parameters of all layers are packed in a single flat vector; layer ``l``
stores its ``(n_in, n_out)`` weight matrix row-major followed by its bias.
The output layer is linear and the loss is the mean squared error.
"""

from __future__ import annotations

import numba
import numpy as np

from ._base import BaseForecaster, register

__all__ = ["MLPForecaster", "layer_offsets", "loss_and_grad", "forward"]


def layer_offsets(sizes):
    """Start offsets of each layer's weights and bias inside the flat vector."""
    sizes = np.asarray(sizes, dtype=np.int64)
    w_off = np.empty(len(sizes) - 1, dtype=np.int64)
    b_off = np.empty(len(sizes) - 1, dtype=np.int64)
    pos = 0
    for l in range(len(sizes) - 1):
        w_off[l] = pos
        pos += sizes[l] * sizes[l + 1]
        b_off[l] = pos
        pos += sizes[l + 1]
    return sizes, w_off, b_off, pos


@numba.njit(cache=True)
def _forward(params, X, sizes, w_off, b_off):
    acts = [X]
    h = X
    n_layers = sizes.shape[0] - 1
    for l in range(n_layers):
        n_in = sizes[l]
        n_out = sizes[l + 1]
        W = params[w_off[l]:w_off[l] + n_in * n_out].reshape((n_in, n_out))
        b = params[b_off[l]:b_off[l] + n_out]
        z = np.dot(h, W) + b
        if l < n_layers - 1:
            z = np.tanh(z)
        acts.append(z)
        h = z
    return acts


@numba.njit(cache=True)
def _loss_grad(params, X, y, sizes, w_off, b_off, grad):
    acts = _forward(params, X, sizes, w_off, b_off)
    n = X.shape[0]
    n_layers = sizes.shape[0] - 1
    out = acts[n_layers][:, 0]
    r = out - y
    loss = (r * r).sum() / n
    delta = (2.0 / n) * r.reshape((n, 1))
    for l in range(n_layers - 1, -1, -1):
        n_in = sizes[l]
        n_out = sizes[l + 1]
        h = acts[l]
        gW = np.dot(h.T, delta)
        grad[w_off[l]:w_off[l] + n_in * n_out] = gW.ravel()
        grad[b_off[l]:b_off[l] + n_out] = delta.sum(axis=0)
        if l > 0:
            W = params[w_off[l]:w_off[l] + n_in * n_out].reshape((n_in, n_out))
            delta = np.dot(delta, W.T) * (1.0 - h * h)
    return loss


@numba.njit(cache=True)
def _train(params, X, y, sizes, w_off, b_off, perms, batch, lr):
    n = X.shape[0]
    epochs = perms.shape[0]
    grad = np.zeros_like(params)
    curve = np.empty(epochs)
    for e in range(epochs):
        perm = perms[e]
        for start in range(0, n, batch):
            stop = min(start + batch, n)
            idx = perm[start:stop]
            _loss_grad(params, X[idx], y[idx], sizes, w_off, b_off, grad)
            params -= lr * grad
        acts = _forward(params, X, sizes, w_off, b_off)
        r = acts[sizes.shape[0] - 1][:, 0] - y
        curve[e] = (r * r).sum() / n
        if not np.isfinite(curve[e]):
            return params, curve[: e + 1], False
    return params, curve, True


@numba.njit(cache=True)
def _forward_rows(params, X, sizes, w_off, b_off):
    """Network output with a fixed per-row summation order (no BLAS)."""
    n = X.shape[0]
    n_layers = sizes.shape[0] - 1
    width = sizes.max()
    out = np.empty(n)
    h = np.empty(width)
    z = np.empty(width)
    for r in range(n):
        for k in range(sizes[0]):
            h[k] = X[r, k]
        for l in range(n_layers):
            n_in = sizes[l]
            n_out = sizes[l + 1]
            for o in range(n_out):
                s = params[b_off[l] + o]
                for k in range(n_in):
                    s += h[k] * params[w_off[l] + k * n_out + o]
                z[o] = np.tanh(s) if l < n_layers - 1 else s
            for o in range(n_out):
                h[o] = z[o]
        out[r] = h[0]
    return out


def forward(params, X, sizes):
    sizes, w_off, b_off, _ = layer_offsets(sizes)
    return _forward_rows(np.ascontiguousarray(params, dtype=np.float64),
                         np.ascontiguousarray(X, dtype=np.float64), sizes, w_off, b_off)


def loss_and_grad(params, X, y, sizes):
    """Mean squared error of the network and its gradient w.r.t. ``params``."""
    sizes, w_off, b_off, _ = layer_offsets(sizes)
    grad = np.zeros(len(params))
    loss = _loss_grad(np.ascontiguousarray(params, dtype=np.float64),
                      np.ascontiguousarray(X, dtype=np.float64),
                      np.ascontiguousarray(y, dtype=np.float64), sizes, w_off, b_off, grad)
    return float(loss), grad


class TrainingDivergedError(FloatingPointError):
    pass


@register("mlp")
class MLPForecaster(BaseForecaster):
    """Single-output tanh network; inputs and target are standardized internally.

    Parameters
    ----------
    hidden_sizes : tuple of int
    learning_rate : float
    epochs : int
    batch_size : int
    seed : int
        Seeds weight initialization and per-epoch shuffling.
    """

    def __init__(self, hidden_sizes=(16,), learning_rate=1e-2, epochs=500, batch_size=32, seed=0,
                 standardize=True):
        self.hidden_sizes = hidden_sizes
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.standardize = standardize

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        n, p = X.shape
        Xs = np.ascontiguousarray(self._scale(X))
        self.y_mean_ = float(y.mean())
        sd = float(y.std())
        self.y_scale_ = sd if sd > 0 else 1.0
        yn = (y - self.y_mean_) / self.y_scale_

        self.layer_sizes_ = np.array([p, *map(int, self.hidden_sizes), 1], dtype=np.int64)
        sizes, w_off, b_off, n_params = layer_offsets(self.layer_sizes_)
        rng = np.random.default_rng(np.random.SeedSequence(int(self.seed)))
        params = np.zeros(n_params)
        for l in range(len(sizes) - 1):
            limit = np.sqrt(6.0 / (sizes[l] + sizes[l + 1]))
            params[w_off[l]:b_off[l]] = rng.uniform(-limit, limit, size=sizes[l] * sizes[l + 1])
        perms = np.stack([rng.permutation(n) for _ in range(int(self.epochs))]) if self.epochs else \
            np.empty((0, n), dtype=np.int64)
        params, curve, ok = _train(params, Xs, yn, sizes, w_off, b_off, perms.astype(np.int64),
                                   int(self.batch_size), float(self.learning_rate))
        if not ok:
            raise TrainingDivergedError(
                f"MLP training diverged at epoch {len(curve)} (loss {curve[-1]!r}); lower the learning rate")
        self.params_ = params
        self.loss_curve_ = curve
        return self

    def predict(self, X):
        X = self._scale(self._validate_predict(X))
        return forward(self.params_, X, self.layer_sizes_) * self.y_scale_ + self.y_mean_
