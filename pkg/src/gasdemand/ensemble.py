"""Aggregation of base-model forecasts.

Every aggregator takes a forecast panel ``F`` (``n x M``, column ``i`` holds
base model ``i``) and, when it has something to learn, the matching target
observed on the validation period.
"""

from __future__ import annotations

import datetime as dt
import io
import os
from dataclasses import dataclass, field

import numpy as np
from sklearn.utils.validation import check_is_fitted, validate_data

from .models._base import BaseForecaster, register
from .models.svr import SVRForecaster

__all__ = [
    "ForecastPanel",
    "EnsembleWeights",
    "SimplexConvergenceError",
    "project_simplex",
    "simple_average",
    "fit_weighted_average",
    "fit_subset_average",
    "prune_trace",
    "SimpleAverage",
    "WeightedAverage",
    "SubsetAverage",
    "SVRStack",
    "ENSEMBLE_MODELS",
]

ENSEMBLE_MODELS = ("simple_average", "subset_average", "weighted_average", "svr_stack")


class SimplexConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ForecastPanel:
    """Base forecasts aligned on one date index; ``target`` is optional."""

    dates: tuple
    forecasts: np.ndarray
    model_names: tuple
    target: np.ndarray | None = None

    def __post_init__(self):
        F = np.asarray(self.forecasts, dtype=np.float64)
        if F.ndim != 2 or F.shape != (len(self.dates), len(self.model_names)) or F.shape[1] < 1:
            raise ValueError("panel must be n x M with M >= 1 and one row per date")
        if not np.all(np.isfinite(F)):
            raise ValueError("panel contains non-finite forecasts")
        object.__setattr__(self, "forecasts", F)
        if self.target is not None:
            y = np.asarray(self.target, dtype=np.float64)
            if y.shape != (F.shape[0],) or not np.all(np.isfinite(y)):
                raise ValueError("target must be finite and aligned with the panel rows")
            object.__setattr__(self, "target", y)

    def to_csv(self, dest=None) -> str:
        """CSV with header ``date,<model names...>,target``."""
        buf = io.StringIO()
        buf.write(",".join(("date",) + tuple(self.model_names) + ("target",)) + "\n")
        for r, d in enumerate(self.dates):
            tgt = "" if self.target is None else repr(float(self.target[r]))
            buf.write(d.isoformat() + "," + ",".join(repr(float(v)) for v in self.forecasts[r]) + f",{tgt}\n")
        text = buf.getvalue()
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        elif dest is not None:
            dest.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "ForecastPanel":
        if isinstance(source, (str, os.PathLike)):
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        else:
            text = source.read()
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split(",")
        if header[0] != "date" or header[-1] != "target" or len(header) < 3:
            raise ValueError("panel header must be date,<models...>,target")
        names = tuple(header[1:-1])
        dates, rows, target = [], [], []
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) != len(header):
                raise ValueError(f"bad panel row {ln!r}")
            dates.append(dt.date.fromisoformat(parts[0]))
            rows.append([float(v) for v in parts[1:-1]])
            target.append(parts[-1])
        y = None if all(t == "" for t in target) else np.array([float(t) for t in target])
        return cls(tuple(dates), np.array(rows, dtype=np.float64).reshape(len(dates), len(names)), names, y)


@dataclass(frozen=True)
class EnsembleWeights:
    """Simplex weights over the panel columns."""

    w: np.ndarray
    subset_size: int | None = None
    trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "w", w)


def simple_average(F) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] < 1:
        raise ValueError("panel must be a 2-D array with at least one column")
    return F.mean(axis=1)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{w : w >= 0, sum(w) = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def fit_weighted_average(F, y, tol=1e-8, max_iter=100_000) -> EnsembleWeights:
    """Simplex-constrained least squares ``min ||y - F w||^2`` by projected gradient.

    Starts from uniform weights and stops once a projected-gradient step
    from the current weights moves them by less than ``tol`` (sup norm).
    """
    F = np.asarray(F, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, M = F.shape
    if M == 1:
        return EnsembleWeights(np.ones(1))
    # On the simplex F w - y == D w - (y - a) with the common mode a removed,
    # which leaves the same minimizers and a much better conditioned Gram.
    a = F.mean(axis=1)
    D = F - a[:, None]
    G = D.T @ D
    c = D.T @ (y - a)
    L = 2.0 * np.linalg.eigvalsh(G)[-1]
    w = np.full(M, 1.0 / M)
    if L <= 0:
        return EnsembleWeights(w)
    step = 1.0 / L
    # Accelerated projected gradient with gradient-based restart; stationarity
    # is measured on the plain projected-gradient map at the current iterate.
    v = w.copy()
    t = 1.0
    change = np.inf
    for _ in range(max_iter):
        w_new = project_simplex(v - step * 2.0 * (G @ v - c))
        if (v - w_new) @ (w_new - w) > 0:
            t = 1.0
            v = w
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        v = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t = w_new, t_new
        change = np.abs(project_simplex(w - step * 2.0 * (G @ w - c)) - w).max()
        if change < tol:
            break
    else:
        raise SimplexConvergenceError(
            f"projected gradient did not reach stationarity {tol} in {max_iter} iterations (residual {change:.3g})")
    w = np.maximum(w, 0.0)
    return EnsembleWeights(w / w.sum())


def _correlation(F):
    Z = F - F.mean(axis=0)
    sd = np.sqrt((Z * Z).sum(axis=0))
    ok = sd > 0
    Z[:, ok] /= sd[ok]
    Z[:, ~ok] = 0.0
    return Z.T @ Z


def prune_trace(F, y, subset_size):
    """Run correlation pruning and return ``(survivors, steps)``.

    Each step is ``(i, j, dropped)``: the most correlated surviving pair and
    the member with the larger MAE (the higher index on a tie).
    """
    F = np.asarray(F, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    M = F.shape[1]
    if not 1 <= subset_size <= M:
        raise ValueError(f"subset size must be in [1, {M}], got {subset_size}")
    mae = np.abs(F - y[:, None]).mean(axis=0)
    corr = _correlation(F)
    alive = list(range(M))
    steps = []
    while len(alive) > subset_size:
        best = None
        for a_pos, i in enumerate(alive):
            for j in alive[a_pos + 1:]:
                if best is None or corr[i, j] > best[0]:
                    best = (corr[i, j], i, j)
        _, i, j = best
        dropped = i if mae[i] > mae[j] else j
        alive.remove(dropped)
        steps.append((i, j, dropped))
    return alive, steps


def fit_subset_average(F, y, subset_size: int) -> EnsembleWeights:
    """Uniform weights over the columns left after correlation pruning."""
    F = np.asarray(F, dtype=np.float64)
    alive, steps = prune_trace(F, y, subset_size)
    w = np.zeros(F.shape[1])
    w[alive] = 1.0 / len(alive)
    return EnsembleWeights(w, subset_size, tuple(steps))


class _Aggregator(BaseForecaster):
    def _check_fit(self, F, y):
        return validate_data(self, F, y, dtype=np.float64, y_numeric=True)

    def _check_predict(self, F):
        check_is_fitted(self)
        return validate_data(self, F, dtype=np.float64, reset=False)

    def predict(self, F):
        return self._check_predict(F) @ self.weights_


@register("simple_average")
class SimpleAverage(_Aggregator):
    def fit(self, F, y=None):
        F = validate_data(self, F, dtype=np.float64)
        self.weights_ = np.full(F.shape[1], 1.0 / F.shape[1])
        return self

    def predict(self, F):
        return simple_average(self._check_predict(F))


@register("weighted_average")
class WeightedAverage(_Aggregator):
    def __init__(self, tol=1e-8, max_iter=100_000):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, F, y):
        F, y = self._check_fit(F, y)
        self.weights_ = fit_weighted_average(F, y, self.tol, self.max_iter).w
        return self


@register("subset_average")
class SubsetAverage(_Aggregator):
    """Average over a correlation-pruned subset of the base forecasts.

    ``subset_size="auto"`` picks the size among ``2..M-1`` by fitting on the
    first 75% of rows (nine months of a validation year) and scoring MAE on
    the rest; the smallest size wins ties. The pruning is then refit on all
    rows.
    """

    def __init__(self, subset_size="auto", fit_fraction=0.75):
        self.subset_size = subset_size
        self.fit_fraction = fit_fraction

    def _tune(self, F, y):
        M = F.shape[1]
        candidates = list(range(2, M)) or [M]
        cut = int(round(self.fit_fraction * F.shape[0]))
        if cut < 1 or cut >= F.shape[0]:
            return candidates[-1], {}
        scores = {}
        for m in candidates:
            w = fit_subset_average(F[:cut], y[:cut], m).w
            scores[m] = float(np.abs(F[cut:] @ w - y[cut:]).mean())
        best = min(candidates, key=lambda m: (scores[m], m))
        return best, scores

    def fit(self, F, y):
        F, y = self._check_fit(F, y)
        if self.subset_size == "auto":
            size, self.tuning_scores_ = self._tune(F, y)
        else:
            size = int(self.subset_size)
        fitted = fit_subset_average(F, y, size)
        self.subset_size_ = size
        self.weights_ = fitted.w
        self.members_ = np.flatnonzero(fitted.w)
        self.prune_steps_ = np.array(fitted.trace, dtype=np.int64).reshape(-1, 3)
        return self

    def predict(self, F):
        # A plain mean over the survivors, so the full-size subset is
        # bitwise identical to the simple average.
        return simple_average(self._check_predict(F)[:, self.members_])


@register("svr_stack")
class SVRStack(SVRForecaster):
    """SVR fitted on the base forecasts as features (linear kernel by default)."""

    def __init__(self, c=1.0, epsilon=0.1, kernel="linear", gamma=None, standardize=True,
                 tol=1e-3, max_iter=100_000):
        super().__init__(c=c, epsilon=epsilon, kernel=kernel, gamma=gamma, standardize=standardize,
                         tol=tol, max_iter=max_iter)
