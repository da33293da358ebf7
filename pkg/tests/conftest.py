import datetime as dt

import numpy as np
import pytest

from mesgencov.fit import ModelSpec
from mesgencov.ingest import DailyPrecipRecord, SiteMeta, WeeklyConcRecord
from mesgencov.synth import generate_fixture


def week(site, on, days=7, yrmonth=None, **conc):
    """Weekly record starting at ``on`` (a date or datetime) lasting ``days`` days."""
    if isinstance(on, dt.date) and not isinstance(on, dt.datetime):
        on = dt.datetime.combine(on, dt.time(9))
    off = on + dt.timedelta(days=days)
    if yrmonth is None:
        yrmonth = on.year * 100 + on.month
    return WeeklyConcRecord(site, on, off, yrmonth, dict(conc))


def rain(site, start, amounts):
    """Daily records for consecutive days starting at ``start``."""
    return [DailyPrecipRecord(site, start + dt.timedelta(days=i), a) for i, a in enumerate(amounts)]


@pytest.fixture(scope="session")
def small_fixture():
    """Six sites, four years, 5% missing weeks."""
    return generate_fixture(seed=11, n_sites=6, n_months=48, missing_rate=0.05)


@pytest.fixture(scope="session")
def small_data_dir(tmp_path_factory, small_fixture):
    d = tmp_path_factory.mktemp("fixture")
    small_fixture.write(d)
    return d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_spec():
    return ModelSpec(1, 1)


@pytest.fixture
def line_meta():
    """Four sites on the equator at roughly 0, 1, 10 and 11 km."""
    deg = 180.0 / (np.pi * 6371.0)
    return {
        "AA01": SiteMeta("AA01", 0.0, 0.0),
        "AA02": SiteMeta("AA02", 0.0, 1.0 * deg),
        "AA03": SiteMeta("AA03", 0.0, 10.0 * deg),
        "AA04": SiteMeta("AA04", 0.0, 11.0 * deg),
    }


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts, one line per criterion, at the end of the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
