"""Synthetic NADP-schema fixtures with known generating parameters.

Every week of a month carries the same concentration ``y(t)``, so the
precipitation-weighted monthly aggregate reproduces ``y(t)`` regardless of
the (random) daily precipitation. ``log y(t)`` follows the trend/seasonal
model plus Gaussian noise, optionally pushed through the heavy-tail map.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .aggregate import add_months
from .fit import ModelSpec, design_matrix
from .gaussianize import tail_transform
from .siteselect import DEFAULT_36_SITES
from .ingest import (
    DailyPrecipRecord,
    SiteMeta,
    WeeklyConcRecord,
    canonical_chemical,
    write_daily,
    write_site_meta,
    write_weekly,
)

# rough state centroids (lat, lon), used to place synthetic sites plausibly
STATE_CENTROIDS = {
    "AL": (32.8, -86.8), "AR": (34.9, -92.4), "AZ": (34.3, -111.7), "CA": (37.2, -119.5),
    "CO": (39.0, -105.5), "CT": (41.6, -72.7), "DE": (39.0, -75.5), "FL": (28.6, -82.4),
    "GA": (32.7, -83.4), "IA": (42.1, -93.5), "ID": (44.4, -114.6), "IL": (40.0, -89.2),
    "IN": (39.9, -86.3), "KS": (38.5, -98.4), "KY": (37.5, -85.3), "LA": (31.1, -92.0),
    "MA": (42.3, -71.8), "MD": (39.0, -76.8), "ME": (45.4, -69.2), "MI": (44.3, -85.4),
    "MN": (46.3, -94.3), "MO": (38.4, -92.5), "MS": (32.7, -89.7), "MT": (47.0, -109.6),
    "NC": (35.6, -79.4), "ND": (47.5, -100.5), "NE": (41.5, -99.8), "NH": (43.7, -71.6),
    "NJ": (40.2, -74.7), "NM": (34.4, -106.1), "NV": (39.3, -116.6), "NY": (42.9, -75.5),
    "OH": (40.3, -82.8), "OK": (35.6, -97.5), "OR": (43.9, -120.6), "PA": (40.9, -77.8),
    "RI": (41.7, -71.5), "SC": (33.9, -80.9), "SD": (44.4, -100.2), "TN": (35.9, -86.4),
    "TX": (31.5, -99.3), "UT": (39.3, -111.7), "VA": (37.5, -78.9), "VT": (44.1, -72.7),
    "WA": (47.4, -120.5), "WI": (44.6, -89.9), "WV": (38.6, -80.6), "WY": (43.0, -107.5),
}

DEFAULT_CHEMICALS = ("SO4", "NO3", "Ca")


@dataclass
class Fixture:
    weekly: List[WeeklyConcRecord]
    daily: List[DailyPrecipRecord]
    meta: Dict[str, SiteMeta]
    truth: dict = field(default_factory=dict)

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_weekly(self.weekly, out / "weeklyConc.csv", chemicals=self.truth["chemicals"])
        write_daily(self.daily, out / "preDaily.csv")
        write_site_meta(self.meta, out / "sites.csv")
        (out / "truth.json").write_text(json.dumps(self.truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return out


def _site_ids(rng: np.random.Generator, n: int) -> List[str]:
    ids = list(DEFAULT_36_SITES[:n])
    states = sorted(STATE_CENTROIDS)
    while len(ids) < n:
        cand = f"{states[rng.integers(len(states))]}{rng.integers(100):02d}"
        if cand not in ids:
            ids.append(cand)
    return ids


def _month_start(yyyymm: int) -> dt.date:
    return dt.date(yyyymm // 100, yyyymm % 100, 1)


def generate_fixture(
    seed: int = 0,
    n_sites: int = 36,
    n_months: int = 72,
    missing_rate: float = 0.0,
    start: int = 198301,
    spec: ModelSpec = ModelSpec(1, 1),
    sigma: float = 0.1,
    delta: float = 0.0,
    chemicals: Sequence[str] = DEFAULT_CHEMICALS,
    site_ids: Optional[Sequence[str]] = None,
) -> Fixture:
    """Build weekly/daily records whose monthly aggregates follow the model.

    Each week's concentration is missing with probability ``missing_rate``,
    independently per chemical. Ground-truth coefficients per (site, chemical)
    are recorded in ``truth``.
    """
    if not 0.0 <= missing_rate <= 1.0:
        raise ValueError("missing_rate must lie in [0, 1]")
    if n_sites < 1 or n_months < 1:
        raise ValueError("n_sites and n_months must be positive")
    chemicals = [canonical_chemical(c) for c in chemicals]
    rng = np.random.default_rng(seed)
    sites = list(site_ids) if site_ids is not None else _site_ids(rng, n_sites)
    X = design_matrix(n_months, spec) if n_months > spec.n_params else None

    first = _month_start(start)
    end_month = add_months(start, n_months - 1)
    last = _month_start(add_months(start, n_months))

    weekly: List[WeeklyConcRecord] = []
    daily: List[DailyPrecipRecord] = []
    meta: Dict[str, SiteMeta] = {}
    truth_sites = {}
    for site in sites:
        lat0, lon0 = STATE_CENTROIDS.get(site[:2], (39.8, -98.6))
        meta[site] = SiteMeta(site, round(lat0 + rng.uniform(-1.5, 1.5), 4), round(lon0 + rng.uniform(-1.5, 1.5), 4))

        logy = {}
        truth_sites[site] = {}
        for chem in chemicals:
            beta = np.concatenate(
                [[rng.uniform(-0.5, 1.5)], rng.normal(0, 0.01, spec.r) / (n_months ** np.arange(spec.r)),
                 rng.normal(0, 0.3, 2 * spec.k)]
            )
            noise = rng.standard_normal(n_months)
            if delta > 0:
                noise = tail_transform(noise, delta)
            if X is None:
                mean = np.full(n_months, beta[0])
            else:
                mean = X @ beta
            logy[chem] = mean + sigma * noise
            truth_sites[site][chem] = [float(b) for b in beta]

        # weeks start at a per-site hour and are assigned to the month of their midpoint
        site_weekly: List[WeeklyConcRecord] = []
        site_daily: List[DailyPrecipRecord] = []
        hour = int(rng.integers(8, 17))
        on = dt.datetime.combine(first - dt.timedelta(days=3), dt.time(hour))
        t0 = first.year * 12 + first.month - 1
        while True:
            off = on + dt.timedelta(days=7)
            mid = on + dt.timedelta(days=3, hours=12)
            if mid.date() >= last:
                break
            ti = mid.year * 12 + mid.month - 1 - t0
            if ti >= 0:
                conc = {}
                for chem in chemicals:
                    if rng.uniform() < missing_rate:
                        conc[chem] = None
                    else:
                        conc[chem] = float(np.exp(logy[chem][ti]))
                site_weekly.append(WeeklyConcRecord(site, on, off, mid.year * 100 + mid.month, conc))
            on = off

        day = first - dt.timedelta(days=3)
        stop = last + dt.timedelta(days=7)
        while day < stop:
            wet = rng.uniform() < 0.45
            amt = round(float(rng.gamma(2.0, 1.5)), 3) if wet else 0.0
            site_daily.append(DailyPrecipRecord(site, day, amt))
            day += dt.timedelta(days=1)
        # every week needs some precipitation or its month would read as missing
        by_day = {r.day: i for i, r in enumerate(site_daily)}
        for rec in site_weekly:
            days = [rec.date_on.date() + dt.timedelta(days=i) for i in range(7)]
            if all(site_daily[by_day[d]].precip == 0.0 for d in days):
                d = days[int(rng.integers(7))]
                site_daily[by_day[d]] = DailyPrecipRecord(site, d, round(float(rng.gamma(2.0, 1.5)), 3) + 0.001)
        weekly.extend(site_weekly)
        daily.extend(site_daily)

    weekly.sort(key=lambda r: (r.site, r.date_on))
    daily.sort(key=lambda r: (r.site, r.day))
    truth = {
        "seed": int(seed),
        "start": int(start),
        "end": int(end_month),
        "n_months": int(n_months),
        "r": spec.r,
        "k": spec.k,
        "sigma": float(sigma),
        "delta": float(delta),
        "missing_rate": float(missing_rate),
        "chemicals": list(chemicals),
        "sites": sites,
        "coefficients": truth_sites,
    }
    return Fixture(weekly, daily, meta, truth)
