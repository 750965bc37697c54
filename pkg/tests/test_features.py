import datetime as dt

import numpy as np
import pytest

from gasdemand.calendar import DayClass, classify_day, similar_day
from gasdemand.dataset import DateInterval, SeriesKind
from gasdemand.features import (
    MissingHistoryError,
    build_matrix,
    build_row,
    feature_names,
    first_feature_date,
    hcdd,
    hdd,
    lag_dates,
    usable_range,
)

from conftest import make_series

D = dt.date
ONE = dt.timedelta(days=1)


@pytest.mark.parametrize("t,expected", [(18, 0), (10, 8), (25, 0), (-5, 23)])
def test_hdd(t, expected):
    assert hdd(t) == expected


@pytest.mark.parametrize("t,expected", [(16, 0), (6, 10), (26, 10)])
def test_hcdd(t, expected):
    assert hcdd(t) == expected


def test_degree_days_vectorized_sweep():
    T = np.linspace(-30, 50, 10_000)
    np.testing.assert_array_equal(hdd(T), np.maximum(18.0 - T, 0.0))
    np.testing.assert_array_equal(hcdd(T), np.abs(16.0 - T))


def test_feature_names():
    names = feature_names("IGD")
    assert len(names) == 21
    assert names[:4] == ("demand_lag1", "demand_lag7", "demand_sim", "demand_sim_lag1")
    assert "hdd_t" in names and "hcdd_t" not in names
    assert "hcdd_sim" in feature_names(SeriesKind.TGD)
    assert names[-3:] == ("holiday", "day_after_holiday", "bridge")


def test_lag_dates_sim_lag1_is_similar_day_of_previous_day():
    t = D(2018, 3, 14)
    lags = lag_dates(t)
    assert lags["sim_lag1"] == similar_day(t - ONE)
    assert lags["lag7"] == D(2018, 3, 7)


@pytest.fixture(scope="module")
def short_series():
    start = D(2015, 1, 1)
    n = (D(2017, 12, 31) - start).days + 1
    rng = np.random.default_rng(5)
    return make_series("IGD", start, rng.uniform(10, 100, n), rng.uniform(-5, 30, n))


def test_matrix_shape_and_lookup_oracle(short_series):
    s = short_series
    fm = build_matrix(s)
    assert fm.n_features == 21
    assert fm.dates[0] == first_feature_date(s)
    idx = {d: i for i, d in enumerate(s.dates)}
    for r, t in enumerate(fm.dates):
        refs = lag_dates(t)
        row = fm.values[r]
        assert row[0] == s.demand[idx[refs["lag1"]]]
        assert row[1] == s.demand[idx[refs["lag7"]]]
        assert row[2] == s.demand[idx[refs["sim"]]]
        assert row[3] == s.demand[idx[refs["sim_lag1"]]]
        for c, key in enumerate(("t", "lag1", "lag7", "sim")):
            temp = s.temperature[idx[refs[key]]]
            assert row[4 + c] == temp
            assert row[8 + c] == max(18.0 - temp, 0.0)
        assert fm.target[r] == s.demand[idx[t]]


def test_indicator_columns(short_series):
    fm = build_matrix(short_series)
    dow = fm.values[:, 12:18]
    flags = fm.values[:, 18:21]
    for r, t in enumerate(fm.dates):
        assert dow[r].sum() == (0 if t.weekday() == 0 else 1)
        assert flags[r].sum() <= 1
        c = classify_day(t)
        assert flags[r, 0] == (c is DayClass.HOLIDAY)
        assert flags[r, 1] == (c is DayClass.DAY_AFTER_HOLIDAY)
        assert flags[r, 2] == (c is DayClass.BRIDGE)


def test_monday_holiday_row(short_series):
    # Easter Monday 2017-04-17
    row = build_row(short_series, D(2017, 4, 17))
    assert np.all(row.values[0, 12:18] == 0)
    assert row.column("holiday")[0] == 1


def test_tgd_hcdd_zero_at_comfort_temperature():
    start = D(2015, 1, 1)
    n = 3 * 365 + 1
    s = make_series("TGD", start, np.full(n, 50.0), np.full(n, 16.0))
    fm = build_matrix(s)
    for name in ("hcdd_t", "hcdd_lag1", "hcdd_lag7", "hcdd_sim"):
        assert np.all(fm.column(name) == 0)


def test_hdd_zero_where_warm(short_series):
    fm = build_matrix(short_series)
    for key in ("t", "lag1", "lag7", "sim"):
        warm = fm.column(f"temp_{key}") >= 18
        assert np.all(fm.column(f"hdd_{key}")[warm] == 0)


def test_missing_history(short_series):
    with pytest.raises(MissingHistoryError):
        build_row(short_series, D(2015, 1, 5))
    with pytest.raises(MissingHistoryError):
        build_matrix(short_series, DateInterval(D(2017, 12, 1), D(2018, 1, 2)))


def test_first_feature_date_and_usable_range(short_series):
    first = first_feature_date(short_series)
    assert min(lag_dates(first).values()) >= short_series.start
    assert min(lag_dates(first - ONE).values()) < short_series.start
    # roughly a year of warm-up
    assert 364 <= (first - short_series.start).days <= 372
    assert usable_range(short_series, short_series.coverage).start == first


def test_rows_in_and_order_independence(short_series):
    fm = build_matrix(short_series)
    iv = DateInterval(D(2017, 3, 1), D(2017, 3, 31))
    sub = fm.rows_in(iv)
    direct = build_matrix(short_series, iv)
    np.testing.assert_array_equal(sub.values, direct.values)
    pieces = [build_row(short_series, t).values[0] for t in reversed(list(iv))]
    np.testing.assert_array_equal(np.array(pieces[::-1]), direct.values)


def test_to_csv_header(short_series):
    text = build_matrix(short_series, DateInterval(D(2017, 1, 1), D(2017, 1, 2))).to_csv()
    lines = text.splitlines()
    assert lines[0] == "date," + ",".join(feature_names("IGD")) + ",target"
    assert len(lines) == 3 and lines[1].startswith("2017-01-01,")
