"""Precipitation-weighted monthly concentrations from weekly samples."""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

from .ingest import DailyPrecipRecord, WeeklyConcRecord

MonthLike = Union[int, dt.date, dt.datetime]


def to_yyyymm(value: MonthLike) -> int:
    if isinstance(value, (dt.date, dt.datetime)):
        return value.year * 100 + value.month
    value = int(value)
    if not 1 <= value % 100 <= 12:
        raise ValueError(f"not a YYYYMM value: {value}")
    return value


def month_ordinal(yyyymm: int) -> int:
    return (yyyymm // 100) * 12 + (yyyymm % 100 - 1)


def add_months(yyyymm: int, n: int) -> int:
    o = month_ordinal(yyyymm) + n
    return (o // 12) * 100 + o % 12 + 1


def n_months(start: MonthLike, end: MonthLike) -> int:
    """Number of calendar months in the inclusive window."""
    return month_ordinal(to_yyyymm(end)) - month_ordinal(to_yyyymm(start)) + 1


@dataclass(frozen=True)
class MonthlySeries:
    """Monthly concentrations of one chemical at one site; NaN marks a missing month."""

    site: str
    chemical: str
    start: int
    values: np.ndarray

    @property
    def T(self) -> int:
        return len(self.values)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def months(self) -> List[int]:
        return [add_months(self.start, t) for t in range(self.T)]


def assign_weeks_to_months(weekly: Iterable[WeeklyConcRecord]) -> Dict[int, List[WeeklyConcRecord]]:
    """Bucket weekly records by their ``yrmonth`` field (weeks are never split)."""
    out: Dict[int, List[WeeklyConcRecord]] = defaultdict(list)
    for rec in weekly:
        out[rec.yrmonth].append(rec)
    return dict(out)


def daily_index(daily: Iterable[DailyPrecipRecord]) -> Dict[str, Dict[dt.date, float]]:
    """site -> day -> precipitation, with missing precipitation counted as 0 L."""
    idx: Dict[str, Dict[dt.date, float]] = defaultdict(dict)
    for rec in daily:
        idx[rec.site][rec.day] = 0.0 if rec.precip is None else rec.precip
    return dict(idx)


def week_precip(rec: WeeklyConcRecord, days: Mapping[dt.date, float]) -> float:
    """Total precipitation over the days date_on <= d < date_off."""
    d = rec.date_on.date()
    last = rec.date_off.date()
    total = 0.0
    while d < last:
        total += days.get(d, 0.0)
        d += dt.timedelta(days=1)
    return total


def monthly_concentration(
    weekly: Sequence[WeeklyConcRecord],
    daily: Union[Sequence[DailyPrecipRecord], Mapping[dt.date, float]],
    site: str,
    chem: str,
    window: Tuple[MonthLike, MonthLike],
) -> MonthlySeries:
    """Precipitation-weighted mean concentration for every month in ``window``.

    Weeks whose concentration is missing contribute neither chemical mass nor
    precipitation. A month with no valid week, or with zero precipitation over
    its valid weeks, is missing (NaN).

    ``daily`` may be the raw record list or a precomputed day -> precip map for
    ``site`` (see :func:`daily_index`).
    """
    start, end = to_yyyymm(window[0]), to_yyyymm(window[1])
    T = n_months(start, end)
    if T < 1:
        raise ValueError(f"window start {start} is after end {end}")
    if isinstance(daily, Mapping):
        days = daily
    else:
        days = daily_index(r for r in daily if r.site == site).get(site, {})

    mass = np.zeros(T)
    volume = np.zeros(T)
    t0 = month_ordinal(start)
    for rec in weekly:
        if rec.site != site:
            continue
        t = month_ordinal(rec.yrmonth) - t0
        if not 0 <= t < T:
            continue
        c = rec.conc.get(chem)
        if c is None:
            continue
        p = week_precip(rec, days)
        mass[t] += p * c
        volume[t] += p

    values = np.full(T, np.nan)
    ok = volume > 0
    values[ok] = mass[ok] / volume[ok]
    return MonthlySeries(site, chem, start, values)
