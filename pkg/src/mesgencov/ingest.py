"""Readers and writers for NADP/NTN-style CSV files.

Three files are understood:

* weekly concentrations: ``siteID,dateon,dateoff,yrmonth,<chemical columns>``
* daily precipitation: ``siteID,date,precip``
* site metadata: ``site,latitude,longitude``

Missing values are coded as negative numbers (``-9.00`` in NADP exports) and
are decoded to ``None``. A zero concentration is also read as missing, since
the monthly values are log-transformed downstream.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

from .exceptions import DataError

CHEMICALS = ("Ca", "Mg", "K", "Na", "NH4", "NO3", "Cl", "SO4", "ph", "H")
_CHEM_LOOKUP = {c.lower(): c for c in CHEMICALS}

MISSING_SENTINEL = "-9.00"

_SITE_RE = re.compile(r"^[A-Z]{2}[0-9]{2}$")
_WEEKLY_KEYS = ("siteID", "dateon", "dateoff", "yrmonth")
_DAILY_KEYS = ("siteID", "date", "precip")


def validate_site_id(code: str) -> str:
    """Return ``code`` stripped if it is a valid 4-character site id."""
    code = str(code).strip()
    if not _SITE_RE.match(code):
        raise DataError(f"invalid site id {code!r}: expected 2 letters + 2 digits, e.g. 'NY52'")
    return code


def canonical_chemical(name: str) -> str:
    """Map a chemical name (case-insensitive) onto its canonical spelling."""
    try:
        return _CHEM_LOOKUP[str(name).strip().lower()]
    except KeyError:
        raise DataError(f"unknown chemical {name!r}; expected one of {', '.join(CHEMICALS)}") from None


def parse_timestamp(text: str) -> dt.datetime:
    """Parse a data-file or CLI timestamp.

    Accepts ``YYYY-MM-DD HH:MM[:SS]`` and ``m/d/y H:M`` (two-digit years below
    70 map to 20xx, the rest to 19xx). Four-digit years are also accepted in
    the slash form.
    """
    s = str(text).strip()
    for fmt in ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%d"):
        try:
            return dt.datetime.strptime(s, fmt)
        except ValueError:
            pass
    m = re.fullmatch(r"(\d{1,2})/(\d{1,2})/(\d{2}|\d{4})(?:\s+(\d{1,2}):(\d{2}))?", s)
    if m:
        month, day, year = int(m.group(1)), int(m.group(2)), m.group(3)
        y = int(year)
        if len(year) == 2:
            y += 2000 if y < 70 else 1900
        hour = int(m.group(4) or 0)
        minute = int(m.group(5) or 0)
        try:
            return dt.datetime(y, month, day, hour, minute)
        except ValueError as exc:
            raise ValueError(f"invalid timestamp {text!r}: {exc}") from None
    raise ValueError(f"unrecognised timestamp {text!r}")


def format_mdy(ts: dt.datetime) -> str:
    """Format a timestamp as ``mm/dd/yy HH:MM``."""
    return ts.strftime("%m/%d/%y %H:%M")


def _decode_value(text: str, positive: bool = False) -> Optional[float]:
    s = str(text).strip()
    if s == "" or s.upper() == "NA":
        return None
    v = float(s)
    if math.isnan(v) or v < 0 or (positive and v == 0):
        return None
    return v


def _encode_value(v: Optional[float]) -> str:
    return MISSING_SENTINEL if v is None else repr(float(v))


@dataclass(frozen=True)
class WeeklyConcRecord:
    site: str
    date_on: dt.datetime
    date_off: dt.datetime
    yrmonth: int
    conc: Mapping[str, Optional[float]] = field(default_factory=dict)

    def get(self, chem: str) -> Optional[float]:
        return self.conc.get(chem)


@dataclass(frozen=True)
class DailyPrecipRecord:
    site: str
    day: dt.date
    precip: Optional[float]


@dataclass(frozen=True)
class SiteMeta:
    site: str
    latitude: float
    longitude: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise DataError(f"{self.site}: latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise DataError(f"{self.site}: longitude {self.longitude} outside [-180, 180]")


def _check_yrmonth(rec: WeeklyConcRecord, rownum: int) -> None:
    # NADP assigns a week to the month holding most of it, so yrmonth may be
    # the month of date_on or any later month the week reaches.
    lo = rec.date_on.year * 100 + rec.date_on.month
    hi = rec.date_off.year * 100 + rec.date_off.month
    if not lo <= rec.yrmonth <= hi:
        raise DataError(
            f"row {rownum}: yrmonth {rec.yrmonth} inconsistent with dateon {rec.date_on} / dateoff {rec.date_off}"
        )


def _open_rows(path) -> tuple[List[str], Iterable[tuple[int, dict]]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.DictReader(fh)
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header

    def rows():
        with fh:
            # header is line 1
            for i, row in enumerate(reader, start=2):
                yield i, row

    return header, rows()


def load_weekly(path) -> List[WeeklyConcRecord]:
    """Parse a weekly concentration CSV into records sorted by (site, date_on)."""
    header, rows = _open_rows(path)
    if not header:
        return []
    missing = [k for k in _WEEKLY_KEYS if k not in header]
    if missing:
        raise DataError(f"{path}: weekly file lacks required columns {missing}")
    chem_cols = {}
    ignored = []
    for col in header:
        if col in _WEEKLY_KEYS:
            continue
        canon = _CHEM_LOOKUP.get(col.lower())
        if canon is None:
            ignored.append(col)
        else:
            chem_cols[col] = canon
    if ignored:
        warnings.warn(f"{path}: ignoring non-chemical columns {ignored}", stacklevel=2)

    records = []
    seen = set()
    for rownum, row in rows:
        try:
            site = validate_site_id(row["siteID"])
            on = parse_timestamp(row["dateon"])
            off = parse_timestamp(row["dateoff"])
            yrmonth = int(str(row["yrmonth"]).strip())
            conc = {canon: _decode_value(row[col], positive=True) for col, canon in chem_cols.items()}
        except (ValueError, TypeError) as exc:
            raise DataError(f"{path}: row {rownum}: {exc}") from None
        if not on < off:
            raise DataError(f"{path}: row {rownum}: dateon {on} is not before dateoff {off}")
        key = (site, on)
        if key in seen:
            raise DataError(f"{path}: row {rownum}: duplicate record for site {site} at {on}")
        seen.add(key)
        rec = WeeklyConcRecord(site, on, off, yrmonth, conc)
        _check_yrmonth(rec, rownum)
        records.append(rec)
    records.sort(key=lambda r: (r.site, r.date_on))
    return records


def load_daily(path) -> List[DailyPrecipRecord]:
    """Parse a daily precipitation CSV into records sorted by (site, day)."""
    header, rows = _open_rows(path)
    if not header:
        return []
    missing = [k for k in _DAILY_KEYS if k not in header]
    if missing:
        raise DataError(f"{path}: daily file lacks required columns {missing}")
    extra = [c for c in header if c not in _DAILY_KEYS]
    if extra:
        warnings.warn(f"{path}: ignoring columns {extra}", stacklevel=2)

    records = []
    seen = set()
    for rownum, row in rows:
        try:
            site = validate_site_id(row["siteID"])
            day = parse_timestamp(row["date"]).date()
            precip = _decode_value(row["precip"])
        except (ValueError, TypeError) as exc:
            raise DataError(f"{path}: row {rownum}: {exc}") from None
        key = (site, day)
        if key in seen:
            raise DataError(f"{path}: row {rownum}: duplicate record for site {site} on {day}")
        seen.add(key)
        records.append(DailyPrecipRecord(site, day, precip))
    records.sort(key=lambda r: (r.site, r.day))
    return records


def load_site_meta(path) -> Dict[str, SiteMeta]:
    """Parse ``site,latitude,longitude`` rows into a dict keyed by site id."""
    header, rows = _open_rows(path)
    if not header:
        return {}
    for k in ("site", "latitude", "longitude"):
        if k not in header:
            raise DataError(f"{path}: site file lacks column {k!r}")
    out: Dict[str, SiteMeta] = {}
    for rownum, row in rows:
        try:
            site = validate_site_id(row["site"])
            lat = float(row["latitude"])
            lon = float(row["longitude"])
        except (ValueError, TypeError) as exc:
            raise DataError(f"{path}: row {rownum}: {exc}") from None
        if site in out:
            raise DataError(f"{path}: row {rownum}: duplicate site {site}")
        try:
            out[site] = SiteMeta(site, lat, lon)
        except DataError as exc:
            raise DataError(f"{path}: row {rownum}: {exc}") from None
    return out


def _fmt_ts(ts: dt.datetime) -> str:
    return ts.strftime("%Y-%m-%d %H:%M:%S")


def write_weekly(records: Sequence[WeeklyConcRecord], path, chemicals: Optional[Sequence[str]] = None) -> None:
    if chemicals is None:
        chemicals = [c for c in CHEMICALS if any(c in r.conc for r in records)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(_WEEKLY_KEYS) + list(chemicals))
        for r in records:
            w.writerow(
                [r.site, _fmt_ts(r.date_on), _fmt_ts(r.date_off), r.yrmonth]
                + [_encode_value(r.conc.get(c)) for c in chemicals]
            )


def write_daily(records: Sequence[DailyPrecipRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_DAILY_KEYS)
        for r in records:
            w.writerow([r.site, r.day.isoformat(), _encode_value(r.precip)])


def write_site_meta(meta: Mapping[str, SiteMeta], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["site", "latitude", "longitude"])
        for site in sorted(meta):
            m = meta[site]
            w.writerow([m.site, repr(m.latitude), repr(m.longitude)])
