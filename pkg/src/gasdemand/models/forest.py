"""Random forest regression on greedy variance-reduction CARTs.

Each tree sees a bootstrap resample of the rows (data bagging) and draws
``mtry`` candidate features at every split (feature bagging). Trees are
stored as flat node arrays so a fitted forest serializes to JSON.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from ._base import BaseForecaster, register

__all__ = ["RandomForestForecaster", "grow_tree", "predict_tree"]

LEAF = -1


@numba.njit(cache=True)
def _splitmix64(state):
    state[0] = (state[0] + np.uint64(0x9E3779B97F4A7C15))
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _sample_features(p, mtry, state, out):
    """Partial Fisher-Yates: first ``mtry`` entries of a random permutation, sorted."""
    perm = np.arange(p)
    for k in range(mtry):
        r = k + np.int64(_splitmix64(state) % np.uint64(p - k))
        tmp = perm[k]
        perm[k] = perm[r]
        perm[r] = tmp
    out[:mtry] = np.sort(perm[:mtry])


@numba.njit(cache=True)
def grow_tree(X, y, rows, max_depth, min_leaf, mtry, seed):
    """Grow one CART on ``X[rows]``.

    Splits maximize the reduction of the sum of squared errors. Among
    equally good splits the lowest feature index, then the lowest
    threshold, wins. ``max_depth < 0`` means unlimited.

    Returns ``(feature, threshold, left, right, value)`` node arrays;
    ``feature == -1`` marks a leaf.
    """
    n = rows.shape[0]
    p = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    feats = np.empty(p, dtype=np.int64)
    idx = rows.copy()
    buf_x = np.empty(n)
    buf_y = np.empty(n)

    # stack of (node, lo, hi, depth)
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        depth = stack[top, 3]
        m = hi - lo
        s = 0.0
        ymin = np.inf
        ymax = -np.inf
        for k in range(lo, hi):
            v = y[idx[k]]
            s += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        value[node] = s / m
        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth) or ymax <= ymin:
            continue

        _sample_features(p, mtry, state, feats)
        best_gain = 0.0
        best_f = -1
        best_t = 0.0
        base = s * s / m
        for q in range(mtry):
            f = feats[q]
            for k in range(m):
                buf_x[k] = X[idx[lo + k], f]
            order = np.argsort(buf_x[:m], kind="mergesort")
            for k in range(m):
                buf_y[k] = y[idx[lo + order[k]]]
            sl = 0.0
            for k in range(m - 1):
                sl += buf_y[k]
                nl = k + 1
                if nl < min_leaf or m - nl < min_leaf:
                    continue
                xa = buf_x[order[k]]
                xb = buf_x[order[k + 1]]
                if xb <= xa:
                    continue
                sr = s - sl
                gain = sl * sl / nl + sr * sr / (m - nl) - base
                if gain > best_gain * (1.0 + 1e-12) + 1e-300:
                    best_gain = gain
                    best_f = f
                    thr = 0.5 * (xa + xb)
                    if thr >= xb:
                        thr = xa
                    best_t = thr
        if best_f < 0:
            continue

        # partition idx[lo:hi] by the chosen split (stable)
        nl = 0
        for k in range(lo, hi):
            if X[idx[k], best_f] <= best_t:
                nl += 1
        tmp = np.empty(m, dtype=np.int64)
        a = 0
        b = nl
        for k in range(lo, hi):
            r = idx[k]
            if X[r, best_f] <= best_t:
                tmp[a] = r
                a += 1
            else:
                tmp[b] = r
                b += 1
        for k in range(m):
            idx[lo + k] = tmp[k]

        feature[node] = best_f
        threshold[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # push right first so the left subtree is expanded first
        stack[top, 0] = n_nodes + 1
        stack[top, 1] = lo + nl
        stack[top, 2] = hi
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = n_nodes
        stack[top, 1] = lo
        stack[top, 2] = lo + nl
        stack[top, 3] = depth + 1
        top += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@numba.njit(cache=True)
def predict_tree(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@numba.njit(cache=True)
def _predict_forest(X, offsets, feature, threshold, left, right, value):
    n_trees = offsets.shape[0] - 1
    out = np.zeros(X.shape[0])
    for k in range(n_trees):
        a = offsets[k]
        b = offsets[k + 1]
        out += predict_tree(X, feature[a:b], threshold[a:b], left[a:b], right[a:b], value[a:b])
    return out / n_trees


def resolve_mtry(mtry, p: int) -> int:
    if mtry is None or mtry == "third":
        return max(1, math.ceil(p / 3))
    if mtry == "sqrt":
        return max(1, math.ceil(math.sqrt(p)))
    if isinstance(mtry, float) and 0 < mtry <= 1:
        return max(1, math.ceil(mtry * p))
    m = int(mtry)
    if not 1 <= m <= p:
        raise ValueError(f"mtry must be in [1, {p}], got {mtry}")
    return m


@register("random_forest")
class RandomForestForecaster(BaseForecaster):
    """Bagged regression trees.

    Parameters
    ----------
    n_trees : int
    max_depth : int or None
        ``None`` grows trees until leaves are pure or hit ``min_leaf``.
    min_leaf : int
        Minimum number of samples per leaf.
    mtry : int, float, "third", "sqrt" or None
        Candidate features per split; ``None``/"third" is ``ceil(p / 3)``.
    bootstrap : bool
        Resample rows with replacement for each tree.
    seed : int
        Seed of all randomness (row resampling and feature draws).
    """

    def __init__(self, n_trees=200, max_depth=None, min_leaf=5, mtry=None, bootstrap=True, seed=0,
                 standardize=False):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.bootstrap = bootstrap
        self.seed = seed
        self.standardize = standardize

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        n, p = X.shape
        if n < 2:
            raise ValueError("random forest needs at least 2 samples")
        if self.n_trees < 1 or self.min_leaf < 1:
            raise ValueError("n_trees and min_leaf must be >= 1")
        mtry = resolve_mtry(self.mtry, p)
        depth = -1 if self.max_depth is None else int(self.max_depth)
        Xs = np.ascontiguousarray(self._scale(X))
        rng = np.random.default_rng(np.random.SeedSequence(int(self.seed)))
        parts = []
        for _ in range(self.n_trees):
            if self.bootstrap:
                rows = np.sort(rng.integers(0, n, size=n))
            else:
                rows = np.arange(n)
            tree_seed = int(rng.integers(0, 2**63 - 1))
            parts.append(grow_tree(Xs, y, rows, depth, int(self.min_leaf), mtry, tree_seed))
        sizes = [len(t[0]) for t in parts]
        self.tree_offsets_ = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.tree_feature_ = np.concatenate([t[0] for t in parts])
        self.tree_threshold_ = np.concatenate([t[1] for t in parts])
        self.tree_left_ = np.concatenate([t[2] for t in parts])
        self.tree_right_ = np.concatenate([t[3] for t in parts])
        self.tree_value_ = np.concatenate([t[4] for t in parts])
        self.mtry_ = mtry
        return self

    def predict(self, X):
        X = np.ascontiguousarray(self._scale(self._validate_predict(X)))
        return _predict_forest(X, self.tree_offsets_, self.tree_feature_, self.tree_threshold_,
                               self.tree_left_, self.tree_right_, self.tree_value_)
