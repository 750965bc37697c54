"""Design matrix for day-ahead demand forecasting.

Each row describes one target day ``t`` with demand lags (``t-1``, ``t-7``,
``sim(t)``, ``sim(t-1)``), forecasted temperature and its degree-day
transform at ``t``, ``t-1``, ``t-7``, ``sim(t)``, weekday dummies (Monday is
the reference level) and holiday / day-after-holiday / bridge indicators.
"""

from __future__ import annotations

import datetime as dt
import io
import os
from dataclasses import dataclass

import numpy as np

from .calendar import DayClass, classify_day, similar_day
from .dataset import DailySeries, DateInterval, SeriesKind

__all__ = [
    "HDD_THRESHOLD",
    "HCDD_THRESHOLD",
    "FeatureMatrix",
    "MissingHistoryError",
    "hdd",
    "hcdd",
    "feature_names",
    "lag_dates",
    "first_feature_date",
    "usable_range",
    "build_matrix",
]

HDD_THRESHOLD = 18.0
HCDD_THRESHOLD = 16.0

WEEKDAY_COLUMNS = ("dow_tue", "dow_wed", "dow_thu", "dow_fri", "dow_sat", "dow_sun")
INDICATOR_COLUMNS = ("holiday", "day_after_holiday", "bridge")
_LAG_SUFFIXES = ("lag1", "lag7", "sim", "sim_lag1")
_WEATHER_SUFFIXES = ("t", "lag1", "lag7", "sim")


class MissingHistoryError(ValueError):
    pass


def hdd(temperature):
    """Heating degree days, ``max(18 - T, 0)``."""
    out = np.maximum(HDD_THRESHOLD - np.asarray(temperature, dtype=np.float64), 0.0)
    return out if out.ndim else float(out)


def hcdd(temperature):
    """Heating and cooling degree days, ``|16 - T|``."""
    out = np.abs(HCDD_THRESHOLD - np.asarray(temperature, dtype=np.float64))
    return out if out.ndim else float(out)


def _degree_day(kind: SeriesKind):
    return (hcdd, "hcdd") if SeriesKind(kind) is SeriesKind.TGD else (hdd, "hdd")


def feature_names(kind: SeriesKind | str) -> tuple[str, ...]:
    _, dd_name = _degree_day(kind)
    return (
        tuple(f"demand_{s}" for s in _LAG_SUFFIXES)
        + tuple(f"temp_{s}" for s in _WEATHER_SUFFIXES)
        + tuple(f"{dd_name}_{s}" for s in _WEATHER_SUFFIXES)
        + WEEKDAY_COLUMNS
        + INDICATOR_COLUMNS
    )


def lag_dates(t: dt.date) -> dict[str, dt.date]:
    """Reference dates used by the row of day ``t``."""
    one = dt.timedelta(days=1)
    return {
        "t": t,
        "lag1": t - one,
        "lag7": t - 7 * one,
        "sim": similar_day(t),
        "sim_lag1": similar_day(t - one),
    }


def first_feature_date(series: DailySeries) -> dt.date:
    """Earliest date of ``series`` whose lags all fall inside the series."""
    for t in series.dates:
        if min(lag_dates(t).values()) >= series.start:
            return t
    raise MissingHistoryError(f"series {series.coverage} is too short to build any feature row")


def usable_range(series: DailySeries, interval: DateInterval) -> DateInterval:
    """``interval`` with its start moved past the lag warm-up period."""
    start = max(interval.start, first_feature_date(series))
    if start > interval.end:
        raise MissingHistoryError(f"no feature rows with full history in {interval}")
    return DateInterval(start, interval.end)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """``values`` is ``n x p``; ``target`` is demand on each row's date."""

    kind: SeriesKind
    dates: tuple
    column_names: tuple
    values: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        if self.values.shape != (n, len(self.column_names)) or self.target.shape != (n,):
            raise ValueError("row count, date count and target length must agree")
        if len(set(self.column_names)) != len(self.column_names):
            raise ValueError("column names must be unique")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.target))):
            raise ValueError("feature matrix contains non-finite entries")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def rows_in(self, interval: DateInterval) -> "FeatureMatrix":
        mask = np.array([d in interval for d in self.dates], dtype=bool)
        idx = np.flatnonzero(mask)
        return FeatureMatrix(
            self.kind,
            tuple(self.dates[i] for i in idx),
            self.column_names,
            self.values[idx],
            self.target[idx],
        )

    def to_csv(self, dest=None) -> str:
        """CSV dump with header ``date,<columns...>,target``."""
        buf = io.StringIO()
        buf.write(",".join(("date",) + tuple(self.column_names) + ("target",)) + "\n")
        for d, row, y in zip(self.dates, self.values, self.target):
            buf.write(d.isoformat() + "," + ",".join(repr(float(v)) for v in row) + f",{float(y)!r}\n")
        text = buf.getvalue()
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        elif dest is not None:
            dest.write(text)
        return text


def build_matrix(series: DailySeries, interval: DateInterval | None = None) -> FeatureMatrix:
    """Feature rows for every date of ``interval`` (default: all usable dates).

    Raises :class:`MissingHistoryError` if any lag of any requested date
    falls outside the series.
    """
    if interval is None:
        interval = usable_range(series, series.coverage)
    if interval.end > series.end:
        raise MissingHistoryError(f"{interval} extends past series end {series.end}")
    dates = tuple(interval)
    keys = ("t",) + _LAG_SUFFIXES
    idx = np.empty((len(dates), len(keys)), dtype=np.int64)
    cls = []
    for r, t in enumerate(dates):
        refs = lag_dates(t)
        for c, key in enumerate(keys):
            i = (refs[key] - series.start).days
            if i < 0:
                raise MissingHistoryError(
                    f"{t.isoformat()}: {key} reference {refs[key].isoformat()} precedes series start "
                    f"{series.start.isoformat()}")
            idx[r, c] = i
        cls.append(classify_day(t))

    t_i, lag1_i, lag7_i, sim_i, simlag1_i = idx.T
    demand, temp = series.demand, series.temperature
    dd_func, _ = _degree_day(series.kind)
    weather_idx = (t_i, lag1_i, lag7_i, sim_i)
    temps = [temp[i] for i in weather_idx]

    weekday = np.array([t.weekday() for t in dates])
    dow = (weekday[:, None] == np.arange(1, 7)[None, :]).astype(np.float64)
    indicators = np.array(
        [[c is DayClass.HOLIDAY, c is DayClass.DAY_AFTER_HOLIDAY, c is DayClass.BRIDGE] for c in cls],
        dtype=np.float64,
    ).reshape(len(dates), 3)

    values = np.column_stack(
        [demand[i] for i in (lag1_i, lag7_i, sim_i, simlag1_i)]
        + temps
        + [dd_func(tt) for tt in temps]
        + [dow, indicators]
    )
    return FeatureMatrix(series.kind, dates, feature_names(series.kind), values, demand[t_i].copy())


def build_row(series: DailySeries, t: dt.date) -> FeatureMatrix:
    """Single-row matrix for day ``t``."""
    return build_matrix(series, DateInterval(t, t))
