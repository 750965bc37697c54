"""Italian civil/religious calendar.

Holidays, Easter, day classification and the similar-day mapping used to
build year-over-year lag features. Dates are plain :class:`datetime.date`
objects (proleptic Gregorian).
"""

from __future__ import annotations

import datetime as dt
import enum
from functools import lru_cache

__all__ = [
    "DayClass",
    "FIXED_HOLIDAYS",
    "easter_date",
    "holiday_names",
    "is_holiday",
    "is_working_day",
    "classify_day",
    "similar_day",
    "yearday",
]

ONE_DAY = dt.timedelta(days=1)

# name -> (month, day)
FIXED_HOLIDAYS: dict[str, tuple[int, int]] = {
    "new_year": (1, 1),
    "epiphany": (1, 6),
    "liberation_day": (4, 25),
    "labour_day": (5, 1),
    "republic_day": (6, 2),
    "assumption": (8, 15),
    "all_saints": (11, 1),
    "immaculate_conception": (12, 8),
    "christmas": (12, 25),
    "st_stephen": (12, 26),
}

# name -> offset in days from Easter Sunday
MOVABLE_HOLIDAYS: dict[str, int] = {
    "easter": 0,
    "easter_monday": 1,
}


class DayClass(enum.Enum):
    ORDINARY = "ordinary"
    HOLIDAY = "holiday"
    BRIDGE = "bridge"
    DAY_AFTER_HOLIDAY = "day_after_holiday"
    WEEKEND = "weekend"


@lru_cache(maxsize=None)
def easter_date(year: int) -> dt.date:
    """Gregorian Easter Sunday (anonymous Gregorian computus).

    Valid for 1583 <= year <= 4099.
    """
    if not isinstance(year, int) or isinstance(year, bool):
        raise TypeError(f"year must be an int, got {type(year).__name__}")
    if not 1583 <= year <= 4099:
        raise ValueError(f"year {year} outside supported range 1583..4099")
    a = year % 19
    b, c = divmod(year, 100)
    d, e = divmod(b, 4)
    f = (b + 8) // 25
    g = (b - f + 1) // 3
    h = (19 * a + b - d - g + 15) % 30
    i, k = divmod(c, 4)
    l = (32 + 2 * e + 2 * i - h - k) % 7
    m = (a + 11 * h + 22 * l) // 451
    month, day = divmod(h + l - 7 * m + 114, 31)
    return dt.date(year, month, day + 1)


@lru_cache(maxsize=None)
def _holidays_of_year(year: int) -> dict[dt.date, tuple[str, ...]]:
    out: dict[dt.date, list[str]] = {}
    for name, (month, day) in FIXED_HOLIDAYS.items():
        out.setdefault(dt.date(year, month, day), []).append(name)
    easter = easter_date(year)
    for name, offset in MOVABLE_HOLIDAYS.items():
        out.setdefault(easter + dt.timedelta(days=offset), []).append(name)
    return {d: tuple(names) for d, names in out.items()}


def _holiday_in_year(name: str, year: int) -> dt.date:
    if name in FIXED_HOLIDAYS:
        month, day = FIXED_HOLIDAYS[name]
        return dt.date(year, month, day)
    return easter_date(year) + dt.timedelta(days=MOVABLE_HOLIDAYS[name])


def holiday_names(d: dt.date) -> tuple[str, ...]:
    """Names of the holidays falling on ``d`` (fixed ones first); empty if none."""
    return _holidays_of_year(d.year).get(d, ())


def is_holiday(d: dt.date) -> bool:
    return d in _holidays_of_year(d.year)


def is_working_day(d: dt.date) -> bool:
    """Not Saturday, not Sunday, not a holiday."""
    return d.weekday() < 5 and not is_holiday(d)


def classify_day(d: dt.date) -> DayClass:
    if is_holiday(d):
        return DayClass.HOLIDAY
    if d.weekday() >= 5:
        return DayClass.WEEKEND
    prev, nxt = d - ONE_DAY, d + ONE_DAY
    if not is_working_day(prev) and not is_working_day(nxt):
        return DayClass.BRIDGE
    if is_holiday(prev):
        return DayClass.DAY_AFTER_HOLIDAY
    return DayClass.ORDINARY


def yearday(d: dt.date) -> int:
    """Day number within the year, 1 for January 1."""
    return d.timetuple().tm_yday


@lru_cache(maxsize=65536)
def similar_day(t: dt.date) -> dt.date:
    """Similar day of ``t`` in the previous year.

    A holiday maps to the same named holiday one year earlier. Any other
    day maps to the non-holiday day of the previous year with the same
    weekday and the closest day-of-year; equidistant candidates resolve to
    the earlier date.
    """
    prev_year = t.year - 1
    names = holiday_names(t)
    if names:
        return _holiday_in_year(names[0], prev_year)

    target = yearday(t)
    jan1 = dt.date(prev_year, 1, 1)
    n_days = (dt.date(prev_year + 1, 1, 1) - jan1).days
    weekday = t.weekday()
    # Walk outwards from the same day-of-year, earlier side first.
    for delta in range(n_days + target):
        for yd in (target - delta, target + delta) if delta else (target,):
            if not 1 <= yd <= n_days:
                continue
            tau = jan1 + dt.timedelta(days=yd - 1)
            if tau.weekday() == weekday and not is_holiday(tau):
                return tau
    raise ValueError(f"no similar day exists for {t.isoformat()} in {prev_year}")
