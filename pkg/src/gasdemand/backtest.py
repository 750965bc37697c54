"""Rolling yearly backtest.

For each series and test year: tune base models by contiguous-block CV on
the training years, fit them on train to forecast the validation year,
fit the aggregators on that validation panel, refit base models on train +
validation, forecast the test year and aggregate. MAEs are reported per
series, model and year, plus a national (``GD``) row that sums the three
components.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import io
import itertools
import json
import logging
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning
from threadpoolctl import threadpool_limits

from .dataset import DailySeries, DateInterval, SeriesKind, load_series, make_split, merge_train_validation
from .ensemble import ENSEMBLE_MODELS, ForecastPanel
from .features import FeatureMatrix, build_matrix, usable_range
from .models import BASE_MODELS, make_forecaster, save_model

log = logging.getLogger(__name__)

__all__ = [
    "BacktestConfig",
    "BacktestReport",
    "ConfigError",
    "CvPlan",
    "GridSearchResult",
    "PipelineError",
    "LeakageError",
    "compose_national",
    "default_grids",
    "derive_seed",
    "expand_grid",
    "grid_search_cv",
    "mae",
    "run_backtest",
]

REPORT_HEADER = ("series", "model", "test_year", "mae_mscm")
NATIONAL = "GD"
SERIES_ORDER = (SeriesKind.RGD, SeriesKind.IGD, SeriesKind.TGD)


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    """A stage of the backtest failed; the message names series/year/model."""


class LeakageError(AssertionError):
    pass


def mae(y, y_hat) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size < 1:
        raise ValueError("mae of empty vectors")
    return float(np.abs(y - y_hat).mean())


def derive_seed(*keys) -> int:
    """Stable 63-bit seed from a tuple of keys (independent of scheduling)."""
    digest = hashlib.sha256(repr(tuple(str(k) for k in keys)).encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


# -- cross validation ---------------------------------------------------------


@dataclass(frozen=True)
class CvPlan:
    """Contiguous, chronologically ordered ``[start, stop)`` row blocks."""

    folds: tuple

    @classmethod
    def contiguous(cls, n_samples: int, n_folds: int = 5) -> "CvPlan":
        if n_samples < n_folds:
            raise ValueError(f"cannot split {n_samples} samples into {n_folds} folds")
        sizes = np.full(n_folds, n_samples // n_folds)
        sizes[: n_samples % n_folds] += 1
        stops = np.cumsum(sizes)
        starts = stops - sizes
        return cls(tuple((int(a), int(b)) for a, b in zip(starts, stops)))

    @property
    def n_samples(self) -> int:
        return self.folds[-1][1]

    def split(self):
        idx = np.arange(self.n_samples)
        for a, b in self.folds:
            yield np.concatenate([idx[:a], idx[b:]]), idx[a:b]


@dataclass
class GridSearchResult:
    best_index: int
    best_estimator: object
    scores: np.ndarray
    fold_scores: np.ndarray

    @property
    def best_score(self) -> float:
        return float(self.scores[self.best_index])


def _with_seed(estimator, seed):
    if seed is not None and "seed" in estimator.get_params(deep=False):
        return clone(estimator).set_params(seed=seed)
    return clone(estimator)


def grid_search_cv(grid, X, y, plan: CvPlan, seed_for_fold=None) -> GridSearchResult:
    """Pick the grid entry with the lowest mean out-of-fold MAE.

    ``grid`` is an ordered list of unfitted estimators; ties go to the
    earliest entry. An entry whose fit raises on any fold is disqualified.
    A one-entry grid is returned without fitting.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(grid) == 1:
        return GridSearchResult(0, clone(grid[0]), np.array([np.nan]), np.full((1, len(plan.folds)), np.nan))
    fold_scores = np.full((len(grid), len(plan.folds)), np.nan)
    for g, spec in enumerate(grid):
        for f, (tr, te) in enumerate(plan.split()):
            model = _with_seed(spec, None if seed_for_fold is None else seed_for_fold(f))
            try:
                model.fit(X[tr], y[tr])
                pred = model.predict(X[te])
            except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
                log.info("grid entry %d disqualified on fold %d: %s", g, f, exc)
                fold_scores[g, :] = np.nan
                break
            if not np.all(np.isfinite(pred)):
                fold_scores[g, :] = np.nan
                break
            fold_scores[g, f] = mae(y[te], pred)
    ok = ~np.isnan(fold_scores).any(axis=1)
    if not ok.any():
        raise PipelineError("every grid entry failed during cross validation")
    scores = np.full(len(grid), np.inf)
    scores[ok] = fold_scores[ok].mean(axis=1)
    best = int(np.argmin(scores))
    return GridSearchResult(best, clone(grid[best]), np.where(ok, scores, np.nan), fold_scores)


# -- grids --------------------------------------------------------------------

_LAMBDAS = [1e3, 1e2, 1e1, 1e0, 1e-1, 1e-2, 1e-3]


def default_grids() -> dict:
    """Hyperparameter grids, strongest regularization first.

    ``epsilon_std`` is a multiple of the training-target standard deviation
    and ``gamma_p`` is divided by the number of features.
    """
    return {
        "ridge": {"lam": _LAMBDAS},
        "lasso": {"lam": _LAMBDAS},
        "elastic_net": {"lam": _LAMBDAS, "alpha": [1.0, 0.75, 0.5, 0.25, 0.0]},
        "svr": {"c": [0.1, 1.0, 10.0, 100.0], "epsilon_std": [0.1, 0.05, 0.01], "gamma_p": [0.01, 0.1, 1.0]},
        "gp": {"gamma_p": [0.01, 0.1, 1.0], "noise_var": [0.1, 0.01]},
        "knn": {"k": [20, 10, 5, 3]},
        "random_forest": {"n_trees": [200], "max_depth": [6, 10, None], "mtry": ["third", "sqrt"]},
        "mlp": {"hidden_sizes": [[16]], "learning_rate": [1e-2], "epochs": [500], "batch_size": [32]},
        "svr_stack": {"c": [0.1, 1.0, 10.0, 100.0], "epsilon_std": [0.1, 0.05, 0.01]},
    }


def expand_grid(name: str, grid: dict, y, n_features: int) -> list:
    """Cartesian product of ``grid`` as a list of unfitted estimators."""
    y_std = float(np.std(y))
    keys = list(grid)
    out = []
    for values in itertools.product(*(grid[k] for k in keys)):
        params = {}
        for k, v in zip(keys, values):
            if k == "epsilon_std":
                params["epsilon"] = float(v) * y_std
            elif k == "gamma_p":
                params["gamma"] = float(v) / n_features
            elif k == "hidden_sizes":
                params[k] = tuple(int(h) for h in v)
            else:
                params[k] = v
        out.append(make_forecaster(name, **params))
    return out


# -- configuration ------------------------------------------------------------


@dataclass
class BacktestConfig:
    series_paths: dict
    test_years: list
    models: list = field(default_factory=lambda: list(BASE_MODELS))
    grids: dict = field(default_factory=dict)
    seed: int = 0
    ensembles: list = field(default_factory=lambda: list(ENSEMBLE_MODELS))
    output_dir: str | None = None
    cv_folds: int = 5
    forecast_model: str = "weighted_average"

    def __post_init__(self):
        try:
            self.series_paths = {SeriesKind(k): v for k, v in self.series_paths.items()}
        except (ValueError, AttributeError) as exc:
            raise ConfigError(f"series_paths must map RGD/IGD/TGD to CSV paths: {exc}") from None
        if not self.series_paths:
            raise ConfigError("series_paths is empty")
        if not self.test_years or not all(isinstance(y, int) for y in self.test_years):
            raise ConfigError("test_years must be a non-empty list of integers")
        unknown = [m for m in self.models if m not in BASE_MODELS]
        if unknown:
            raise ConfigError(f"unknown base model(s): {unknown}; known: {list(BASE_MODELS)}")
        unknown = [m for m in self.ensembles if m not in ENSEMBLE_MODELS]
        if unknown:
            raise ConfigError(f"unknown ensemble(s): {unknown}; known: {list(ENSEMBLE_MODELS)}")
        if self.ensembles and len(self.models) < 1:
            raise ConfigError("ensembles need at least one base model")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        bad = [k for k in self.grids if k not in default_grids()]
        if bad:
            raise ConfigError(f"grids given for unknown model(s): {bad}")
        if self.forecast_model not in list(self.models) + list(self.ensembles):
            raise ConfigError(f"forecast_model {self.forecast_model!r} is not among the configured models")

    def grid(self, name: str) -> dict:
        return self.grids.get(name, default_grids()[name])

    @classmethod
    def from_dict(cls, blob: dict, base_dir: str | None = None) -> "BacktestConfig":
        if not isinstance(blob, dict):
            raise ConfigError("config must be a JSON object")
        for required in ("series_paths", "test_years", "seed"):
            if required not in blob:
                raise ConfigError(f"missing required field '{required}'")
        allowed = {"series_paths", "test_years", "models", "grids", "seed", "ensembles", "output_dir",
                   "cv_folds", "forecast_model"}
        unknown = sorted(set(blob) - allowed)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        blob = dict(blob)
        if base_dir is not None and isinstance(blob["series_paths"], dict):
            blob["series_paths"] = {k: v if os.path.isabs(v) else os.path.normpath(os.path.join(base_dir, v))
                                    for k, v in blob["series_paths"].items()}
            if isinstance(blob.get("output_dir"), str) and not os.path.isabs(blob["output_dir"]):
                blob["output_dir"] = os.path.normpath(os.path.join(base_dir, blob["output_dir"]))
        return cls(**blob)

    @classmethod
    def from_json(cls, path) -> "BacktestConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                blob = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(blob, base_dir=os.path.dirname(os.path.abspath(path)))

    def load_series(self) -> dict:
        return {k: load_series(self.series_paths[k], k) for k in SERIES_ORDER if k in self.series_paths}


# -- report -------------------------------------------------------------------


@dataclass
class YearResult:
    """Everything one (series, test year) unit produces."""

    kind: SeriesKind
    test_year: int
    test_dates: tuple
    actual: np.ndarray
    forecasts: dict
    specs: dict
    validation_panel: ForecastPanel
    test_panel: ForecastPanel
    fitted: dict


@dataclass
class BacktestReport:
    model_names: list
    test_years: list
    results: dict  # (series, model, year) -> (dates, actual, forecast)

    def mae(self, series: str, model: str, year: int) -> float:
        _, actual, forecast = self.results[(series, model, year)]
        return mae(actual, forecast)

    def rows(self):
        series_names = [s.value for s in SERIES_ORDER] + [NATIONAL]
        for s in series_names:
            for m in self.model_names:
                for y in self.test_years:
                    if (s, m, y) in self.results:
                        yield s, m, y, self.mae(s, m, y)

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(REPORT_HEADER) + "\n")
        for s, m, y, v in self.rows():
            buf.write(f"{s},{m},{y},{v!r}\n")
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def average(self, series: str, model: str) -> float:
        vals = [self.mae(series, model, y) for y in self.test_years if (series, model, y) in self.results]
        return float(np.mean(vals)) if vals else math.nan

    def series_names(self):
        present = {k[0] for k in self.results}
        return [s for s in [k.value for k in SERIES_ORDER] + [NATIONAL] if s in present]

    def table(self, series: str) -> str:
        """Rows = models, columns = test years + average."""
        years = list(self.test_years)
        head = f"{series:<18}" + "".join(f"{y:>9}" for y in years) + f"{'Average':>9}"
        lines = [head]
        for m in self.model_names:
            if not any((series, m, y) in self.results for y in years):
                continue
            cells = [self.mae(series, m, y) if (series, m, y) in self.results else math.nan for y in years]
            lines.append(f"{m:<18}" + "".join(f"{v:9.3f}" for v in cells) + f"{self.average(series, m):9.3f}")
        return "\n".join(lines)

    def forecasts_csv(self, series: str, model: str) -> str:
        buf = io.StringIO()
        buf.write("date,test_year,actual,forecast\n")
        for y in self.test_years:
            if (series, model, y) not in self.results:
                continue
            dates, actual, forecast = self.results[(series, model, y)]
            for d, a, f in zip(dates, actual, forecast):
                buf.write(f"{d.isoformat()},{y},{float(a)!r},{float(f)!r}\n")
        return buf.getvalue()


def compose_national(components: dict):
    """Sum aligned component forecasts and actuals.

    ``components`` maps series kind to ``(dates, actual, forecast)``.
    Returns ``(dates, actual, forecast, mae)`` of the national total.
    """
    items = list(components.values())
    if not items:
        raise ValueError("no components to compose")
    dates = tuple(items[0][0])
    for d, _, _ in items[1:]:
        if tuple(d) != dates:
            raise ValueError("component forecasts are not aligned on the same dates")
    actual = np.sum([np.asarray(a, dtype=np.float64) for _, a, _ in items], axis=0)
    forecast = np.sum([np.asarray(f, dtype=np.float64) for _, _, f in items], axis=0)
    return dates, actual, forecast, mae(actual, forecast)


# -- pipeline -----------------------------------------------------------------


def _guard(fit_dates, forbidden: DateInterval, what: str):
    if fit_dates and max(fit_dates) >= forbidden.start:
        raise LeakageError(f"{what}: fit data reaches {max(fit_dates)}, not before {forbidden.start}")


def _select(fm: FeatureMatrix, interval: DateInterval):
    sub = fm.rows_in(interval)
    if sub.n_samples == 0:
        raise PipelineError(f"no feature rows in {interval}")
    return sub


def _tuned_fit(name, grid_spec, X, y, cv_folds, seed_key):
    grid = expand_grid(name, grid_spec, y, X.shape[1])
    plan = CvPlan.contiguous(len(y), cv_folds)
    result = grid_search_cv(grid, X, y, plan, seed_for_fold=lambda f: derive_seed(*seed_key, "fold", f))
    return result.best_estimator, result


def run_year(series: DailySeries, test_year: int, config: BacktestConfig) -> YearResult:
    kind = series.kind.value
    with threadpool_limits(limits=1), warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        try:
            plan = make_split(series, test_year)
        except ValueError as exc:
            raise PipelineError(f"{kind} {test_year}: make_split: {exc}") from exc
        fm = build_matrix(series, usable_range(series, series.coverage))
        try:
            train = _select(fm, plan.train_range)
            val = _select(fm, plan.validation_range)
            union = _select(fm, merge_train_validation(plan))
            test = _select(fm, plan.test_range)
        except (PipelineError, ValueError) as exc:
            raise PipelineError(f"{kind} {test_year}: {exc}") from exc

        val_cols, test_cols, specs, fitted = [], [], {}, {}
        for name in config.models:
            ctx = f"{kind} {test_year} {name}"
            key = (config.seed, kind, test_year, name)
            try:
                _guard(train.dates, plan.validation_range, ctx)
                spec, _ = _tuned_fit(name, config.grid(name), train.values, train.target, config.cv_folds, key)
                spec_params = spec.get_params(deep=False)
                m_train = _with_seed(spec, derive_seed(*key, "train")).fit(train.values, train.target)
                val_cols.append(m_train.predict(val.values))
                _guard(union.dates, plan.test_range, ctx)
                m_union = _with_seed(spec, derive_seed(*key, "union")).fit(union.values, union.target)
                test_cols.append(m_union.predict(test.values))
            except LeakageError:
                raise
            except Exception as exc:
                raise PipelineError(f"{ctx}: {type(exc).__name__}: {exc}") from exc
            specs[name] = spec_params
            fitted[name] = m_union

        names = tuple(config.models)
        val_panel = ForecastPanel(val.dates, np.column_stack(val_cols), names, val.target)
        test_panel = ForecastPanel(test.dates, np.column_stack(test_cols), names, test.target)
        forecasts = {name: test_panel.forecasts[:, i] for i, name in enumerate(names)}

        for name in config.ensembles:
            ctx = f"{kind} {test_year} {name}"
            key = (config.seed, kind, test_year, name)
            try:
                _guard(val.dates, plan.test_range, ctx)
                F, yv = val_panel.forecasts, val_panel.target
                if name == "svr_stack":
                    spec, _ = _tuned_fit(name, config.grid(name), F, yv, config.cv_folds, key)
                else:
                    spec = make_forecaster(name)
                agg = spec.fit(F, yv)
                forecasts[name] = agg.predict(test_panel.forecasts)
            except Exception as exc:
                raise PipelineError(f"{ctx}: {type(exc).__name__}: {exc}") from exc
            specs[name] = agg.get_params(deep=False)
            fitted[name] = agg

    return YearResult(series.kind, test_year, test.dates, test.target, forecasts, specs, val_panel, test_panel,
                      fitted)


def run_backtest(config: BacktestConfig, series: dict | None = None, jobs: int = 1,
                 output_dir: str | None = None) -> BacktestReport:
    """Run every (series, test year) unit and assemble the report.

    Units run in parallel with ``jobs`` workers; all seeds derive from the
    config seed and the unit's identity, so the report does not depend on
    ``jobs``. When ``output_dir`` is set, the report, per-model forecasts,
    ensemble panels and the last test year's fitted models are written there.
    """
    if series is None:
        series = config.load_series()
    units = [(k, y) for k in SERIES_ORDER if k in series for y in sorted(config.test_years)]
    results = Parallel(n_jobs=jobs)(delayed(run_year)(series[k], y, config) for k, y in units)

    model_names = list(config.models) + list(config.ensembles)
    table = {}
    by_key = {}
    for res in results:
        by_key[(res.kind, res.test_year)] = res
        for name, fc in res.forecasts.items():
            table[(res.kind.value, name, res.test_year)] = (res.test_dates, res.actual, fc)
    for name in model_names:
        for year in sorted(config.test_years):
            comps = {k: table.get((k.value, name, year)) for k in SERIES_ORDER}
            if all(v is not None for v in comps.values()):
                try:
                    dates, actual, forecast, _ = compose_national(comps)
                except ValueError as exc:
                    raise PipelineError(f"{NATIONAL} {year} {name}: {exc}") from exc
                table[(NATIONAL, name, year)] = (dates, actual, forecast)
    report = BacktestReport(model_names, sorted(config.test_years), table)

    out = output_dir or config.output_dir
    if out:
        write_outputs(report, by_key, config, out)
    return report


def write_outputs(report: BacktestReport, by_key: dict, config: BacktestConfig, out: str) -> None:
    os.makedirs(out, exist_ok=True)
    report.to_csv(os.path.join(out, "report.csv"))
    for s in report.series_names():
        fdir = os.path.join(out, "forecasts", s)
        os.makedirs(fdir, exist_ok=True)
        for m in report.model_names:
            text = report.forecasts_csv(s, m)
            if text.count("\n") > 1:
                with open(os.path.join(fdir, f"{m}.csv"), "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
    pdir = os.path.join(out, "panels")
    os.makedirs(pdir, exist_ok=True)
    for (kind, year), res in sorted(by_key.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        res.validation_panel.to_csv(os.path.join(pdir, f"{kind.value}_{year}_validation.csv"))
        res.test_panel.to_csv(os.path.join(pdir, f"{kind.value}_{year}_test.csv"))
    last = max(report.test_years)
    manifest = {"test_year": last, "base_models": list(config.models), "ensembles": list(config.ensembles),
                "series": {}}
    for kind in SERIES_ORDER:
        res = by_key.get((kind, last))
        if res is None:
            continue
        mdir = os.path.join(out, "models", kind.value)
        os.makedirs(mdir, exist_ok=True)
        for name, model in res.fitted.items():
            save_model(model, os.path.join(mdir, f"{name}.json"))
        manifest["series"][kind.value] = {"specs": _jsonable(res.specs)}
    with open(os.path.join(out, "models", "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
