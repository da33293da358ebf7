import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rain, week
from mesgencov.aggregate import (
    add_months,
    assign_weeks_to_months,
    daily_index,
    month_ordinal,
    monthly_concentration,
    n_months,
    to_yyyymm,
    week_precip,
)
from mesgencov.ingest import DailyPrecipRecord

JAN = dt.date(1983, 1, 3)


def series(weekly, daily, window=(198301, 198301), chem="SO4"):
    return monthly_concentration(weekly, daily, "NY52", chem, window)


class TestMonthArithmetic:
    def test_helpers(self):
        assert to_yyyymm(dt.date(1986, 12, 31)) == 198612
        assert add_months(198611, 3) == 198702
        assert add_months(198301, -1) == 198212
        assert n_months(198301, 198612) == 48
        assert month_ordinal(198302) - month_ordinal(198301) == 1

    def test_invalid_yyyymm(self):
        with pytest.raises(ValueError):
            to_yyyymm(198313)


class TestFormula:
    def test_single_week(self):
        w = [week("NY52", JAN, SO4=2.0)]
        d = rain("NY52", JAN, [1, 1, 2])
        assert series(w, d).values[0] == 2.0

    def test_missing_week_excluded_from_volume(self):
        # 8 mg over 4 L with a second, concentration-missing week over 10 L
        w = [week("NY52", JAN, SO4=2.0), week("NY52", JAN + dt.timedelta(days=7), SO4=None)]
        d = rain("NY52", JAN, [4, 0, 0, 0, 0, 0, 0, 10])
        y = series(w, d).values[0]
        assert y == 2.0
        assert y != 8.0 / 14.0

    def test_two_weeks_weighted(self):
        w = [week("NY52", JAN, SO4=1.0), week("NY52", JAN + dt.timedelta(days=7), SO4=4.0)]
        d = rain("NY52", JAN, [2, 0, 0, 0, 0, 0, 0, 1])
        assert series(w, d).values[0] == 2.0

    def test_zero_precip_month_is_missing(self):
        w = [week("NY52", JAN, SO4=3.0)]
        d = rain("NY52", JAN, [0] * 7)
        assert np.isnan(series(w, d).values[0])

    def test_no_weeks_is_missing(self):
        s = series([], [], window=(198301, 198303))
        assert s.T == 3 and s.missing.all()

    def test_missing_daily_precip_counts_as_zero(self):
        w = [week("NY52", JAN, SO4=1.0), week("NY52", JAN + dt.timedelta(days=7), SO4=4.0)]
        d = rain("NY52", JAN, [2, None, None, 0, 0, 0, 0, 1])
        assert series(w, d).values[0] == 2.0

    def test_days_are_half_open(self):
        rec = week("NY52", JAN, SO4=1.0)
        d = daily_index(rain("NY52", JAN, [1, 1, 1, 1, 1, 1, 1, 100]))["NY52"]
        assert week_precip(rec, d) == 7.0

    def test_other_sites_ignored(self):
        w = [week("NY52", JAN, SO4=2.0), week("TN11", JAN, SO4=50.0)]
        d = rain("NY52", JAN, [1]) + rain("TN11", JAN, [1])
        assert series(w, d).values[0] == 2.0

    def test_weeks_outside_window_ignored(self):
        w = [week("NY52", JAN, SO4=2.0), week("NY52", dt.date(1983, 3, 7), SO4=9.0)]
        d = rain("NY52", JAN, [1]) + rain("NY52", dt.date(1983, 3, 7), [1])
        s = series(w, d, window=(198301, 198302))
        assert s.values[0] == 2.0 and np.isnan(s.values[1])

    def test_accepts_precomputed_day_map(self):
        w = [week("NY52", JAN, SO4=2.0)]
        d = rain("NY52", JAN, [1, 3])
        assert series(w, daily_index(d)["NY52"]).values[0] == series(w, d).values[0]


class TestMonthAssignment:
    def test_straddling_week_goes_to_yrmonth(self):
        rec = week("AB32", dt.datetime(2016, 9, 28, 16), yrmonth=201610, SO4=1.0)
        assert assign_weeks_to_months([rec]) == {201610: [rec]}

    def test_empty(self):
        assert assign_weeks_to_months([]) == {}

    def test_straddling_week_feeds_october(self):
        rec = week("NY52", dt.datetime(1983, 1, 28, 9), yrmonth=198302, SO4=5.0)
        d = rain("NY52", dt.date(1983, 1, 28), [1] * 7)
        s = series([rec], d, window=(198301, 198302))
        assert np.isnan(s.values[0]) and s.values[1] == 5.0


@st.composite
def month_fixture(draw):
    n = draw(st.integers(1, 4))
    weeks, daily = [], []
    for i in range(n):
        on = JAN + dt.timedelta(days=7 * i)
        c = draw(st.one_of(st.none(), st.floats(0.01, 100)))
        weeks.append(week("NY52", on, SO4=c))
        daily += rain("NY52", on, draw(st.lists(st.floats(0, 50), min_size=7, max_size=7)))
    return weeks, daily


@settings(max_examples=200, deadline=None)
@given(month_fixture(), st.floats(1e-3, 1e3))
def test_scale_equivariance_property(fx, lam):
    weeks, daily = fx
    scaled = [DailyPrecipRecord(r.site, r.day, r.precip * lam) for r in daily]
    a, b = series(weeks, daily).values[0], series(weeks, scaled).values[0]
    if np.isnan(a):
        assert np.isnan(b)
    else:
        assert b == pytest.approx(a, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(month_fixture())
def test_convexity_property(fx):
    weeks, daily = fx
    y = series(weeks, daily).values[0]
    days = daily_index(daily)["NY52"]
    contributing = [w.conc["SO4"] for w in weeks if w.conc["SO4"] is not None and week_precip(w, days) > 0]
    if not contributing:
        assert np.isnan(y)
    else:
        assert min(contributing) * (1 - 1e-12) <= y <= max(contributing) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(month_fixture())
def test_dropping_missing_week_precip_changes_nothing(fx):
    weeks, daily = fx
    skip = set()
    for w in weeks:
        if w.conc["SO4"] is None:
            skip |= {w.date_on.date() + dt.timedelta(days=i) for i in range(7)}
    kept = [r for r in daily if r.day not in skip]
    a, b = series(weeks, daily).values[0], series(weeks, kept).values[0]
    assert (np.isnan(a) and np.isnan(b)) or a == b
