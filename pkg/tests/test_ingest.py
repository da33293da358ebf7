import datetime as dt
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mesgencov.exceptions import DataError
from mesgencov.ingest import (
    CHEMICALS,
    DailyPrecipRecord,
    SiteMeta,
    WeeklyConcRecord,
    canonical_chemical,
    format_mdy,
    load_daily,
    load_site_meta,
    load_weekly,
    parse_timestamp,
    validate_site_id,
    write_daily,
    write_weekly,
)

WEEKLY_HEADER = "siteID,dateon,dateoff,yrmonth,ph,SO4\n"


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestSiteAndChemical:
    @pytest.mark.parametrize("code", ["NY52", "AB32", "TN00"])
    def test_valid(self, code):
        assert validate_site_id(f" {code} ") == code

    @pytest.mark.parametrize("code", ["ny52", "NY5", "NY520", "N152", "1Y52", ""])
    def test_invalid(self, code):
        with pytest.raises(DataError):
            validate_site_id(code)

    def test_chemical_case_insensitive(self):
        assert canonical_chemical("so4") == "SO4"
        assert canonical_chemical("PH") == "ph"
        assert set(CHEMICALS) == {"Ca", "Mg", "K", "Na", "NH4", "NO3", "Cl", "SO4", "ph", "H"}

    def test_unknown_chemical(self):
        with pytest.raises(DataError, match="unknown chemical"):
            canonical_chemical("Pb")


class TestTimestamps:
    def test_data_format(self):
        assert parse_timestamp("2016-09-28 16:00") == dt.datetime(2016, 9, 28, 16, 0)
        assert parse_timestamp("2016-09-28 16:00:30") == dt.datetime(2016, 9, 28, 16, 0, 30)

    @pytest.mark.parametrize(
        "text, year", [("01/01/83 00:00", 1983), ("12/31/86 00:00", 1986), ("01/01/05 00:00", 2005), ("3/4/69 1:05", 2069)]
    )
    def test_two_digit_years(self, text, year):
        assert parse_timestamp(text).year == year

    def test_mdy_round_trip(self):
        ts = dt.datetime(1986, 12, 31, 0, 0)
        assert format_mdy(ts) == "12/31/86 00:00"
        assert parse_timestamp(format_mdy(ts)) == ts

    @pytest.mark.parametrize("bad", ["yesterday", "13/01/83 00:00", "2016-02-30 00:00"])
    def test_malformed(self, bad):
        with pytest.raises(ValueError):
            parse_timestamp(bad)


class TestLoadWeekly:
    def test_snapshot_row(self, tmp_path):
        p = write(tmp_path / "w.csv", WEEKLY_HEADER + "AB32,2016-09-28 16:00,2016-10-05 16:55,201610,6.56,0.41\n")
        (rec,) = load_weekly(p)
        assert rec.site == "AB32"
        assert rec.conc["ph"] == 6.56
        assert rec.yrmonth == 201610
        assert rec.date_off == dt.datetime(2016, 10, 5, 16, 55)

    @pytest.mark.parametrize("sentinel", ["-9.00", "-9", "-7.5", "NA", ""])
    def test_missing_values(self, tmp_path, sentinel):
        p = write(tmp_path / "w.csv", WEEKLY_HEADER + f"AB32,2016-10-05 16:55,2016-10-12 15:00,201610,{sentinel},0.3\n")
        (rec,) = load_weekly(p)
        assert rec.conc["ph"] is None
        assert rec.conc["SO4"] == 0.3

    def test_zero_concentration_is_missing(self, tmp_path):
        p = write(tmp_path / "w.csv", WEEKLY_HEADER + "AB32,2016-10-05 16:55,2016-10-12 15:00,201610,5.0,0\n")
        assert load_weekly(p)[0].conc["SO4"] is None

    def test_header_only(self, tmp_path):
        assert load_weekly(write(tmp_path / "w.csv", WEEKLY_HEADER)) == []

    def test_sorted_by_site_then_date(self, tmp_path):
        rows = [
            "NY52,1983-01-11 09:00,1983-01-18 09:00,198301,5,1",
            "AL10,1983-01-04 09:00,1983-01-11 09:00,198301,5,1",
            "NY52,1983-01-04 09:00,1983-01-11 09:00,198301,5,1",
        ]
        recs = load_weekly(write(tmp_path / "w.csv", WEEKLY_HEADER + "\n".join(rows) + "\n"))
        assert [(r.site, r.date_on.day) for r in recs] == [("AL10", 4), ("NY52", 4), ("NY52", 11)]

    def test_malformed_timestamp_names_row(self, tmp_path):
        p = write(tmp_path / "w.csv", WEEKLY_HEADER + "AB32,2016-09-28 16:00,2016-10-05 16:55,201610,6.5,1\nAB32,garbage,2016-10-12,201610,6,1\n")
        with pytest.raises(DataError, match="row 3"):
            load_weekly(p)

    def test_duplicate_rejected(self, tmp_path):
        row = "AB32,2016-09-28 16:00,2016-10-05 16:55,201610,6.5,1\n"
        with pytest.raises(DataError, match="duplicate"):
            load_weekly(write(tmp_path / "w.csv", WEEKLY_HEADER + row + row))

    def test_dateon_after_dateoff(self, tmp_path):
        p = write(tmp_path / "w.csv", WEEKLY_HEADER + "AB32,2016-10-05 16:55,2016-09-28 16:00,201610,6.5,1\n")
        with pytest.raises(DataError, match="not before"):
            load_weekly(p)

    def test_yrmonth_outside_week(self, tmp_path):
        p = write(tmp_path / "w.csv", WEEKLY_HEADER + "AB32,2016-09-28 16:00,2016-10-05 16:55,201612,6.5,1\n")
        with pytest.raises(DataError, match="yrmonth"):
            load_weekly(p)

    def test_unknown_column_warns_and_is_ignored(self, tmp_path):
        p = write(tmp_path / "w.csv", "siteID,dateon,dateoff,yrmonth,SO4,labno\nAB32,2016-10-05 16:55,2016-10-12 15:00,201610,1.5,X17\n")
        with pytest.warns(UserWarning, match="labno"):
            (rec,) = load_weekly(p)
        assert dict(rec.conc) == {"SO4": 1.5}

    def test_missing_required_column(self, tmp_path):
        with pytest.raises(DataError, match="yrmonth"):
            load_weekly(write(tmp_path / "w.csv", "siteID,dateon,dateoff,SO4\n"))

    def test_shuffled_rows_same_records(self, tmp_path, small_fixture):
        write_weekly(small_fixture.weekly, tmp_path / "a.csv", chemicals=["SO4", "NO3"])
        lines = (tmp_path / "a.csv").read_text().splitlines()
        body = lines[1:]
        random.Random(4).shuffle(body)
        (tmp_path / "b.csv").write_text("\n".join([lines[0]] + body) + "\n")
        assert load_weekly(tmp_path / "a.csv") == load_weekly(tmp_path / "b.csv")


class TestLoadDaily:
    def test_rows(self, tmp_path):
        p = write(tmp_path / "d.csv", "siteID,date,precip\nNY52,1983-01-04,-9\nNY52,1983-01-03,2.5\n")
        a, b = load_daily(p)
        assert (a.day, a.precip) == (dt.date(1983, 1, 3), 2.5)
        assert (b.day, b.precip) == (dt.date(1983, 1, 4), None)

    def test_zero_precip_kept(self, tmp_path):
        (rec,) = load_daily(write(tmp_path / "d.csv", "siteID,date,precip\nNY52,1983-01-03,0\n"))
        assert rec.precip == 0.0

    def test_duplicate_day(self, tmp_path):
        with pytest.raises(DataError, match="duplicate"):
            load_daily(write(tmp_path / "d.csv", "siteID,date,precip\nNY52,1983-01-03,1\nNY52,1983-01-03,2\n"))

    def test_bad_value_names_row(self, tmp_path):
        with pytest.raises(DataError, match="row 2"):
            load_daily(write(tmp_path / "d.csv", "siteID,date,precip\nNY52,1983-01-03,lots\n"))


class TestSiteMeta:
    def test_load(self, tmp_path):
        meta = load_site_meta(write(tmp_path / "s.csv", "site,latitude,longitude\nNY52,43.97,-74.22\n"))
        assert meta == {"NY52": SiteMeta("NY52", 43.97, -74.22)}

    def test_empty(self, tmp_path):
        assert load_site_meta(write(tmp_path / "s.csv", "")) == {}

    def test_latitude_out_of_range(self, tmp_path):
        with pytest.raises(DataError, match="latitude"):
            load_site_meta(write(tmp_path / "s.csv", "site,latitude,longitude\nXX99,95.0,0.0\n"))

    def test_duplicate(self, tmp_path):
        with pytest.raises(DataError, match="duplicate"):
            load_site_meta(write(tmp_path / "s.csv", "site,latitude,longitude\nNY52,1,1\nNY52,2,2\n"))

    def test_longitude_checked_on_construction(self):
        with pytest.raises(DataError):
            SiteMeta("NY52", 0.0, 181.0)


conc_value = st.one_of(st.none(), st.floats(min_value=1e-6, max_value=1e4, allow_nan=False))


@st.composite
def weekly_records(draw):
    n = draw(st.integers(0, 12))
    recs = []
    starts = sorted(draw(st.sets(st.integers(0, 3000), min_size=n, max_size=n)))
    site = draw(st.sampled_from(["NY52", "TN11", "IL63"]))
    for s in starts:
        on = dt.datetime(1983, 1, 1, 9) + dt.timedelta(days=s, minutes=draw(st.integers(0, 600)))
        off = on + dt.timedelta(days=7)
        recs.append(WeeklyConcRecord(site, on, off, on.year * 100 + on.month, {"SO4": draw(conc_value), "ph": draw(conc_value)}))
    return recs


@settings(max_examples=40, deadline=None)
@given(weekly_records())
def test_weekly_round_trip(tmp_path_factory, recs):
    p = tmp_path_factory.mktemp("rt") / "w.csv"
    write_weekly(recs, p, chemicals=["ph", "SO4"])
    back = load_weekly(p)
    assert back == sorted(recs, key=lambda r: (r.site, r.date_on))
    for r in back:
        assert all(v is None or v > 0 for v in r.conc.values())


@settings(max_examples=30, deadline=None)
@given(st.lists(st.one_of(st.none(), st.floats(min_value=0, max_value=500, allow_nan=False)), max_size=20))
def test_daily_round_trip(tmp_path_factory, amounts):
    recs = [DailyPrecipRecord("NY52", dt.date(1983, 1, 1) + dt.timedelta(days=i), a) for i, a in enumerate(amounts)]
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    write_daily(recs, p)
    assert load_daily(p) == recs
