"""Choosing which sites enter an analysis.

``get_sites`` ranks sites by the number of observed weekly samples of one
chemical; ``max_dist_sites`` starts from a chosen high-data site and then
greedily adds the site farthest (great-circle) from those already chosen.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, Iterable, List, Mapping, Optional

import numpy as np

from .exceptions import DataError
from .ingest import SiteMeta, WeeklyConcRecord, canonical_chemical, format_mdy, parse_timestamp

EARTH_RADIUS_KM = 6371.0
REGIONS = ("N", "S", "W")

# the 36 sites with most 1983-1986 sulfate data in the NTN record
DEFAULT_36_SITES = (
    "OH71", "NY08", "WV18", "MI53", "NH02", "OH49", "PA42", "ME09",
    "IN34", "MA13", "NY52", "NY10", "WA14", "NY20", "OH17", "ME00",
    "TN00", "IL63", "MI99", "WI28", "IN41", "PA29", "WI36", "ME02",
    "MI09", "MO05", "NC03", "NJ99", "PA15", "CO19", "MN18", "WI37",
    "AR27", "KS31", "ME98", "MO03",
)


def load_region_table(path=None) -> Dict[str, str]:
    """State code -> region (``N``, ``S`` or ``W``) from a ``state,region`` CSV."""
    if path is None:
        text = resources.files("mesgencov").joinpath("data/regions.csv").read_text(encoding="utf-8")
        rows = list(csv.DictReader(text.splitlines()))
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    table = {}
    for row in rows:
        region = row["region"].strip().upper()
        if region not in REGIONS:
            raise DataError(f"unknown region {region!r} for state {row['state']!r}")
        table[row["state"].strip().upper()] = region
    return table


def region_of(site: str, table: Optional[Mapping[str, str]] = None) -> str:
    """Region of a site from its 2-letter state prefix; unlisted states are ``W``."""
    if table is None:
        table = load_region_table()
    return table.get(site[:2].upper(), "W")


def haversine(a: SiteMeta, b: SiteMeta) -> float:
    """Great-circle distance in km on a sphere of radius 6371 km."""
    lat1, lon1 = math.radians(a.latitude), math.radians(a.longitude)
    lat2, lon2 = math.radians(b.latitude), math.radians(b.longitude)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def distance_matrix(metas: List[SiteMeta]) -> np.ndarray:
    lat = np.radians([m.latitude for m in metas])
    lon = np.radians([m.longitude for m in metas])
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    h = np.sin(dlat / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


@dataclass
class SiteQuery:
    start: dt.datetime
    end: dt.datetime
    count: int
    min_weeks: int
    chemical: str
    region: str = ""
    start_rank: int = 1

    def __post_init__(self):
        if isinstance(self.start, str):
            self.start = parse_timestamp(self.start)
        if isinstance(self.end, str):
            self.end = parse_timestamp(self.end)
        if not self.start < self.end:
            raise DataError(f"start {self.start} must be before end {self.end}")
        if self.count < 1:
            raise DataError("count must be >= 1")
        if self.min_weeks < 0:
            raise DataError("min_weeks must be >= 0")
        self.chemical = canonical_chemical(self.chemical)
        self.region = (self.region or "").strip().upper()
        if self.region not in ("", "ALL") + REGIONS:
            raise DataError(f"region must be one of 'N', 'S', 'W' or empty, got {self.region!r}")
        if self.start_rank < 1:
            raise DataError("start_rank must be >= 1")


@dataclass
class SiteSelection:
    final_list: List[str]
    counts: Dict[str, int]
    start_date: str
    end_date: str
    comp: str
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "finalList": list(self.final_list),
            "counts": {s: self.counts[s] for s in self.final_list},
            "startDate": self.start_date,
            "endDate": self.end_date,
            "comp": self.comp,
        }


def count_weeks(weekly: Iterable[WeeklyConcRecord], chemical: str, start: dt.datetime, end: dt.datetime) -> Dict[str, int]:
    """Observed (non-missing) weekly samples per site with start <= date_on <= end."""
    counts: Dict[str, int] = {}
    for rec in weekly:
        if start <= rec.date_on <= end and rec.conc.get(chemical) is not None:
            counts[rec.site] = counts.get(rec.site, 0) + 1
    return counts


def _ranked(counts: Mapping[str, int], min_weeks: int) -> List[str]:
    ok = [s for s, c in counts.items() if c >= min_weeks]
    return sorted(ok, key=lambda s: (-counts[s], s))


def get_sites(q: SiteQuery, weekly: Iterable[WeeklyConcRecord], region_table: Optional[Mapping[str, str]] = None) -> SiteSelection:
    """Top ``q.count`` sites by observed weeks (ties broken by site id)."""
    counts = count_weeks(weekly, q.chemical, q.start, q.end)
    ranked = _ranked(counts, q.min_weeks)
    if q.region not in ("", "ALL"):
        table = region_table if region_table is not None else load_region_table()
        ranked = [s for s in ranked if region_of(s, table) == q.region]
    notes = []
    if len(ranked) < q.count:
        msg = f"only {len(ranked)} sites qualify (requested {q.count})"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    final = ranked[: q.count]
    return SiteSelection(final, counts, format_mdy(q.start), format_mdy(q.end), q.chemical, notes)


def farthest_point_order(D: np.ndarray, first: int, count: int) -> List[int]:
    """Greedy max-min traversal of a distance matrix starting at ``first``.

    Ties go to the lower index.
    """
    n = D.shape[0]
    chosen = [first]
    mind = D[first].copy()
    mind[first] = -np.inf
    while len(chosen) < min(count, n):
        j = int(np.argmax(mind))
        chosen.append(j)
        mind = np.minimum(mind, D[j])
        mind[chosen] = -np.inf
    return chosen


def max_dist_sites(q: SiteQuery, weekly: Iterable[WeeklyConcRecord], meta: Mapping[str, SiteMeta]) -> SiteSelection:
    """Geographically spread site list.

    Candidates are sites with at least ``q.min_weeks`` observed weeks, ranked
    by count. The ``q.start_rank``-th candidate is taken first, then the
    candidate maximizing the minimum distance to the chosen set is added
    until ``q.count`` sites are selected.
    """
    counts = count_weeks(weekly, q.chemical, q.start, q.end)
    ranked = _ranked(counts, q.min_weeks)
    if len(ranked) < q.count:
        raise DataError(f"only {len(ranked)} sites have >= {q.min_weeks} weeks of {q.chemical}; {q.count} requested")
    if q.start_rank > len(ranked):
        raise DataError(f"start rank {q.start_rank} exceeds the {len(ranked)} qualifying sites")
    absent = [s for s in ranked if s not in meta]
    if absent:
        raise DataError(f"no coordinates for site(s) {', '.join(absent)}")
    D = distance_matrix([meta[s] for s in ranked])
    order = farthest_point_order(D, q.start_rank - 1, q.count)
    final = [ranked[i] for i in order]
    return SiteSelection(final, counts, format_mdy(q.start), format_mdy(q.end), q.chemical)
