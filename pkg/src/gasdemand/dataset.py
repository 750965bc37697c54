"""Daily demand/temperature series: CSV ingestion, validation and yearly splits."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterator, Union

import numpy as np

__all__ = [
    "CSV_HEADER",
    "DateInterval",
    "DailySeries",
    "SeriesKind",
    "SeriesFormatError",
    "SplitPlan",
    "InsufficientHistoryError",
    "load_series",
    "dump_series",
    "make_split",
    "merge_train_validation",
]

CSV_HEADER = ("date", "temperature_c", "demand_mscm")
TEMPERATURE_RANGE = (-30.0, 50.0)


class SeriesKind(str, enum.Enum):
    RGD = "RGD"
    IGD = "IGD"
    TGD = "TGD"


class SeriesFormatError(ValueError):
    """Malformed, duplicated, gapped or out-of-range series input."""


class InsufficientHistoryError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class DateInterval:
    """Closed interval of calendar days ``start..end``."""

    start: dt.date
    end: dt.date

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"empty interval {self.start}..{self.end}")

    def __len__(self) -> int:
        return (self.end - self.start).days + 1

    def __contains__(self, d: dt.date) -> bool:
        return self.start <= d <= self.end

    def __iter__(self) -> Iterator[dt.date]:
        one = dt.timedelta(days=1)
        d = self.start
        while d <= self.end:
            yield d
            d += one

    def __str__(self) -> str:
        return f"{self.start.isoformat()}..{self.end.isoformat()}"

    @classmethod
    def year(cls, year: int) -> "DateInterval":
        return cls(dt.date(year, 1, 1), dt.date(year, 12, 31))

    def overlaps(self, other: "DateInterval") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True, eq=False)
class DailySeries:
    """Contiguous, date-ordered daily observations of one demand component.

    ``temperature`` holds the forecasted mean temperature (degrees C) and
    ``demand`` the gas demand in MSCM. Arrays are read-only.
    """

    kind: SeriesKind
    start: dt.date
    temperature: np.ndarray
    demand: np.ndarray
    _dates: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", SeriesKind(self.kind))
        temp = np.array(self.temperature, dtype=np.float64)
        dem = np.array(self.demand, dtype=np.float64)
        if temp.ndim != 1 or temp.shape != dem.shape:
            raise SeriesFormatError("temperature and demand must be 1-D and of equal length")
        if temp.size == 0:
            raise SeriesFormatError("series is empty")
        if not (np.all(np.isfinite(temp)) and np.all(np.isfinite(dem))):
            raise SeriesFormatError("series contains non-finite values")
        if np.any(dem < 0):
            raise SeriesFormatError("negative demand")
        lo, hi = TEMPERATURE_RANGE
        if np.any((temp < lo) | (temp > hi)):
            raise SeriesFormatError(f"temperature outside [{lo}, {hi}]")
        temp.flags.writeable = False
        dem.flags.writeable = False
        object.__setattr__(self, "temperature", temp)
        object.__setattr__(self, "demand", dem)
        one = dt.timedelta(days=1)
        object.__setattr__(self, "_dates", tuple(self.start + i * one for i in range(temp.size)))

    def __len__(self) -> int:
        return self.demand.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DailySeries):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.start == other.start
            and np.array_equal(self.temperature, other.temperature)
            and np.array_equal(self.demand, other.demand)
        )

    @property
    def dates(self) -> tuple:
        return self._dates

    @property
    def end(self) -> dt.date:
        return self._dates[-1]

    @property
    def coverage(self) -> DateInterval:
        return DateInterval(self.start, self.end)

    def index_of(self, d: dt.date) -> int:
        """Row index of ``d``; ``KeyError`` if outside the series."""
        i = (d - self.start).days
        if not 0 <= i < len(self):
            raise KeyError(d)
        return i

    def window(self, interval: DateInterval) -> "DailySeries":
        if not (interval.start in self.coverage and interval.end in self.coverage):
            raise KeyError(f"{interval} not covered by series {self.coverage}")
        i, j = self.index_of(interval.start), self.index_of(interval.end) + 1
        return DailySeries(self.kind, interval.start, self.temperature[i:j], self.demand[i:j])


Source = Union[str, os.PathLike, IO[bytes], IO[str]]


def _read_text(source: Source) -> str:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SeriesFormatError(f"input is not valid UTF-8: {exc}") from exc
    return raw.lstrip("\ufeff")


def _parse_float(text: str, what: str, lineno: int) -> float:
    try:
        if "_" in text:
            raise ValueError
        value = float(text)
    except ValueError:
        raise SeriesFormatError(f"line {lineno}: cannot parse {what} {text!r}") from None
    if not math.isfinite(value):
        raise SeriesFormatError(f"line {lineno}: non-finite {what} {text!r}")
    return value


def load_series(source: Source, kind: SeriesKind | str) -> DailySeries:
    """Parse a ``date,temperature_c,demand_mscm`` CSV into a validated series.

    Rows may come in any order; they are sorted by date. Duplicate dates,
    gaps in daily coverage and malformed or out-of-range values raise
    :class:`SeriesFormatError`.
    """
    kind = SeriesKind(kind)
    reader = csv.reader(io.StringIO(_read_text(source)))
    try:
        header = next(reader)
    except StopIteration:
        raise SeriesFormatError("empty input, header required") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise SeriesFormatError(f"line 1: header must be {','.join(CSV_HEADER)!r}, got {','.join(header)!r}")

    rows: dict[dt.date, tuple[float, float]] = {}
    lo, hi = TEMPERATURE_RANGE
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise SeriesFormatError(f"line {lineno}: expected 3 fields, got {len(row)}")
        date_text = row[0].strip()
        try:
            if len(date_text) != 10:
                raise ValueError
            date = dt.date.fromisoformat(date_text)
        except ValueError:
            raise SeriesFormatError(f"line {lineno}: bad date {date_text!r}, expected YYYY-MM-DD") from None
        temp = _parse_float(row[1].strip(), "temperature_c", lineno)
        demand = _parse_float(row[2].strip(), "demand_mscm", lineno)
        if not lo <= temp <= hi:
            raise SeriesFormatError(f"line {lineno}: temperature {temp} outside [{lo}, {hi}]")
        if demand < 0:
            raise SeriesFormatError(f"line {lineno}: negative demand {demand}")
        if date in rows:
            raise SeriesFormatError(f"line {lineno}: duplicate date {date.isoformat()}")
        rows[date] = (temp, demand)

    if not rows:
        raise SeriesFormatError("no data rows")
    dates = sorted(rows)
    for prev, cur in zip(dates, dates[1:]):
        if (cur - prev).days != 1:
            missing_from = prev + dt.timedelta(days=1)
            missing_to = cur - dt.timedelta(days=1)
            raise SeriesFormatError(f"gap in coverage: {missing_from.isoformat()}..{missing_to.isoformat()} missing")
    values = np.array([rows[d] for d in dates], dtype=np.float64)
    return DailySeries(kind, dates[0], values[:, 0], values[:, 1])


def dump_series(series: DailySeries, dest: Source | None = None) -> str:
    """Serialize ``series`` to CSV; writes to ``dest`` if given and returns the text.

    Floats are written with ``repr`` so that :func:`load_series` restores
    them bit-for-bit.
    """
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for d, t, y in zip(series.dates, series.temperature, series.demand):
        buf.write(f"{d.isoformat()},{float(t)!r},{float(y)!r}\n")
    text = buf.getvalue()
    if dest is not None:
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            try:
                dest.write(text)
            except TypeError:
                dest.write(text.encode("utf-8"))
    return text


@dataclass(frozen=True)
class SplitPlan:
    """Train / validation / test partition for one test year."""

    test_year: int
    train_range: DateInterval
    validation_range: DateInterval
    test_range: DateInterval

    def __post_init__(self):
        if not (self.train_range.end < self.validation_range.start
                and self.validation_range.end < self.test_range.start):
            raise ValueError("split ranges must be disjoint and chronologically ordered")


def make_split(series: DailySeries, test_year: int) -> SplitPlan:
    """Test on ``test_year``, validate on the year before, train on everything earlier.

    The series must cover the full test year and at least one full training
    year (three full years in total).
    """
    test = DateInterval.year(test_year)
    validation = DateInterval.year(test_year - 1)
    cov = series.coverage
    if test.end not in cov or test.start not in cov:
        raise InsufficientHistoryError(
            f"test year {test_year} is not fully covered by series {cov}")
    train_end = validation.start - dt.timedelta(days=1)
    if cov.start > train_end:
        raise InsufficientHistoryError(
            f"test year {test_year}: train would be empty (series starts {cov.start.isoformat()})")
    if cov.start > dt.date(test_year - 2, 1, 1):
        raise InsufficientHistoryError(
            f"test year {test_year}: need a full training year before {validation.start.isoformat()}, "
            f"series starts {cov.start.isoformat()}")
    return SplitPlan(test_year, DateInterval(cov.start, train_end), validation, test)


def merge_train_validation(plan: SplitPlan) -> DateInterval:
    """Single interval covering training and validation data."""
    return DateInterval(plan.train_range.start, plan.validation_range.end)
