"""End-to-end covariance generation (the ``getCov`` workflow).

Per site: monthly aggregation -> log-scale regression -> optional outlier
handling and refit -> imputation of missing months. The per-site residuals
are then stacked, their covariance computed and the normality diagnostics run.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .aggregate import MonthlySeries, daily_index, monthly_concentration, n_months, to_yyyymm
from .covariance import ResidualMatrix, assemble, sample_covariance, write_cov_csv
from .exceptions import ConfigError, DataError
from .fit import FitResult, ModelSpec, fit_ols, impute_residuals, summarize
from .ingest import (
    CHEMICALS,
    DailyPrecipRecord,
    SiteMeta,
    WeeklyConcRecord,
    format_mdy,
    load_daily,
    load_site_meta,
    load_weekly,
    parse_timestamp,
    validate_site_id,
)
from .matio import write_mat
from .plots import plot_multivariate_qq, plot_series
from .stattests import MvnReport, RosnerReport, mvn, rosner
from .siteselect import DEFAULT_36_SITES

SCHEMA_VERSION = 1
ROSNER_MAX_OUTLIERS = 3

# config-file key -> GetCovConfig attribute
CONFIG_FIELDS = {
    "startdateStr": "startdate",
    "enddateStr": "enddate",
    "comp": "comp",
    "use36": "use36",
    "siteAdd": "site_add",
    "outlierDatesbySite": "outlier_dates_by_site",
    "siteOutliers": "site_outliers",
    "removeOutliers": "remove_outliers",
    "plotMulti": "plot_multi",
    "sitePlot": "site_plot",
    "plotAll": "plot_all",
    "writeMat": "write_mat",
    "r": "r",
    "k": "k",
    "rngSeed": "rng_seed",
}


@dataclass
class GetCovConfig:
    startdate: dt.datetime = dt.datetime(1983, 1, 1)
    enddate: dt.datetime = dt.datetime(1986, 12, 31)
    comp: str = "SO4"
    use36: bool = True
    site_add: List[str] = field(default_factory=list)
    outlier_dates_by_site: List[Tuple[str, int]] = field(default_factory=list)
    site_outliers: List[str] = field(default_factory=list)
    remove_outliers: List[str] = field(default_factory=list)
    plot_multi: bool = False
    site_plot: List[str] = field(default_factory=list)
    plot_all: bool = False
    write_mat: bool = False
    r: int = 1
    k: int = 1
    rng_seed: int = 0

    def validate(self) -> "GetCovConfig":
        if not self.startdate < self.enddate:
            raise ConfigError(f"startdateStr {self.startdate} must precede enddateStr {self.enddate}")
        if self.comp not in CHEMICALS:
            raise ConfigError(f"comp: unknown chemical {self.comp!r}; expected one of {', '.join(CHEMICALS)}")
        for name in ("r", "k"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= 5:
                raise ConfigError(f"{name}: must be an Integer <= 5 (and >= 0), got {v!r}")
        for key in ("site_add", "site_outliers", "remove_outliers", "site_plot"):
            for s in getattr(self, key):
                try:
                    validate_site_id(s)
                except DataError as exc:
                    raise ConfigError(f"{key}: {exc}") from None
        for s, t in self.outlier_dates_by_site:
            try:
                validate_site_id(s)
            except DataError as exc:
                raise ConfigError(f"outlierDatesbySite: {exc}") from None
            if not isinstance(t, int) or t < 0:
                raise ConfigError(f"outlierDatesbySite: month index must be a non-negative integer, got {t!r}")
        return self

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(self.r, self.k)

    @property
    def window(self) -> Tuple[int, int]:
        return to_yyyymm(self.startdate), to_yyyymm(self.enddate)

    def sites(self) -> List[str]:
        base = list(DEFAULT_36_SITES) if self.use36 else []
        out: List[str] = []
        for s in base + list(self.site_add):
            if s not in out:
                out.append(s)
        return out

    def to_dict(self) -> dict:
        d = {}
        for key, attr in CONFIG_FIELDS.items():
            v = getattr(self, attr)
            if isinstance(v, dt.datetime):
                v = format_mdy(v)
            elif attr == "outlier_dates_by_site":
                v = [[s, t] for s, t in v]
            elif isinstance(v, list):
                v = list(v)
            d[key] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GetCovConfig":
        unknown = [k for k in d if k not in CONFIG_FIELDS]
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        kw = {}
        for key, val in d.items():
            attr = CONFIG_FIELDS[key]
            try:
                kw[attr] = _coerce(attr, val)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
        return cls(**kw).validate()


def _as_list(val) -> list:
    if val is None:
        return []
    if isinstance(val, str):
        return [val] if val else []
    out = []
    for v in val:
        # R-style nested list(c(...)) flattens
        out.extend(_as_list(v) if isinstance(v, (list, tuple)) else [v])
    return out


def _coerce(attr: str, val):
    if attr in ("startdate", "enddate"):
        return parse_timestamp(val) if isinstance(val, str) else val
    if attr in ("use36", "plot_multi", "plot_all", "write_mat"):
        if not isinstance(val, bool):
            raise TypeError(f"expected true/false, got {val!r}")
        return val
    if attr == "comp":
        from .ingest import canonical_chemical

        try:
            return canonical_chemical(val)
        except DataError as exc:
            raise ValueError(str(exc)) from None
    if attr in ("site_add", "site_outliers", "remove_outliers", "site_plot"):
        return [str(s).strip() for s in _as_list(val)]
    if attr == "outlier_dates_by_site":
        return _parse_outlier_dates(val)
    if attr in ("r", "k", "rng_seed"):
        if isinstance(val, bool) or not isinstance(val, int):
            raise TypeError(f"expected an integer, got {val!r}")
        return val
    return val


def _parse_outlier_dates(val) -> List[Tuple[str, int]]:
    """Accept ``["IN41", 25]``, ``[["IN41", 25], ...]`` or ``{"IN41": [25, 30]}``."""
    if val is None:
        return []
    if isinstance(val, dict):
        return [(str(s), int(t)) for s, ts in val.items() for t in (ts if isinstance(ts, list) else [ts])]
    val = list(val)
    if not val:
        return []
    if all(not isinstance(v, (list, tuple)) for v in val):
        # flat R-style c("IN41", 25, "AL10", 3)
        if len(val) % 2:
            raise ValueError("flat outlierDatesbySite list must alternate site, month")
        pairs = list(zip(val[0::2], val[1::2]))
    else:
        pairs = [tuple(v) for v in val]
    out = []
    for p in pairs:
        if len(p) != 2:
            raise ValueError(f"expected (site, month) pairs, got {p!r}")
        s, t = p
        if isinstance(t, bool) or int(t) != t:
            raise ValueError(f"month index must be an integer, got {t!r}")
        out.append((str(s).strip(), int(t)))
    return out


def default_config() -> GetCovConfig:
    """The stock configuration: 1983-1986 sulfate at the 36 default sites, r = k = 1."""
    return GetCovConfig()


def load_config(path) -> GetCovConfig:
    """Read a JSON or TOML config keyed by the getCov field names."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping of field names")
    base = default_config().to_dict()
    base.update(data)
    return GetCovConfig.from_dict(base)


@dataclass
class Dataset:
    weekly: List[WeeklyConcRecord]
    daily: List[DailyPrecipRecord]
    meta: Dict[str, SiteMeta] = field(default_factory=dict)

    @classmethod
    def from_dir(cls, data_dir) -> "Dataset":
        d = Path(data_dir)
        weekly_p, daily_p, meta_p = d / "weeklyConc.csv", d / "preDaily.csv", d / "sites.csv"
        for p in (weekly_p, daily_p):
            if not p.exists():
                raise DataError(f"missing data file {p}")
        meta = load_site_meta(meta_p) if meta_p.exists() else {}
        return cls(load_weekly(weekly_p), load_daily(daily_p), meta)


@dataclass
class SiteResult:
    series: MonthlySeries
    fit: FitResult
    imputed: np.ndarray
    rosner: Optional[RosnerReport] = None
    removed_months: List[int] = field(default_factory=list)


@dataclass
class CovOutput:
    cov: np.ndarray
    listMod: List[FitResult]
    sites: List[str]
    mvn: MvnReport
    univariateTest: List[dict]
    residualData: ResidualMatrix
    residualDataNA: ResidualMatrix
    rosnerTest: List[Optional[RosnerReport]]
    pred: List[np.ndarray]
    config: GetCovConfig
    start_month: int = 0
    files: List[str] = field(default_factory=list)
    site_results: List[SiteResult] = field(default_factory=list, repr=False)

    @property
    def labels(self) -> List[str]:
        return list(self.residualData.column_names)

    def to_dict(self) -> dict:
        def arr(a):
            return [None if (isinstance(v, float) and math.isnan(v)) else v for v in np.asarray(a, dtype=float).tolist()]

        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "start_month": self.start_month,
            "sites": list(self.sites),
            "labels": self.labels,
            "cov": [list(row) for row in self.cov.tolist()],
            "listMod": [f.to_dict() for f in self.listMod],
            "mvn": self.mvn.to_dict(),
            "univariateTest": self.univariateTest,
            "residualData": [arr(row) for row in self.residualData.values],
            "residualDataNA": [arr(row) for row in self.residualDataNA.values],
            "rosnerTest": [None if r is None else r.to_dict() for r in self.rosnerTest],
            "pred": [arr(p) for p in self.pred],
            "removedMonths": {sr.fit.site: sr.removed_months for sr in self.site_results if sr.removed_months},
            "files": list(self.files),
        }

    def summaries(self) -> str:
        return "\n\n".join(summarize(f) for f in self.listMod)


def _site_records(data: Dataset, sites: Sequence[str]):
    wanted = set(sites)
    weekly: Dict[str, List[WeeklyConcRecord]] = {s: [] for s in sites}
    for rec in data.weekly:
        if rec.site in wanted:
            weekly[rec.site].append(rec)
    days = daily_index(r for r in data.daily if r.site in wanted)
    return weekly, days


def _mask_months(series: MonthlySeries, months: Sequence[int]) -> MonthlySeries:
    vals = series.values.copy()
    for t in months:
        if 0 <= t < len(vals):
            vals[t] = np.nan
        else:
            warnings.warn(f"{series.site}: outlier month {t} outside the window (T={len(vals)})", stacklevel=3)
    return replace(series, values=vals)


def _fit_checked(series: MonthlySeries, spec: ModelSpec) -> FitResult:
    n_obs = int((~np.isnan(series.values)).sum())
    if n_obs <= spec.n_params:
        raise DataError(
            f"site {series.site} has only {n_obs} observed months of {series.chemical} "
            f"in the window; more than {spec.n_params} required"
        )
    return fit_ols(series, spec)


def process_site(site: str, cfg: GetCovConfig, weekly, days) -> SiteResult:
    """Aggregate, fit, handle outliers and impute for one site."""
    spec = cfg.spec
    series = monthly_concentration(weekly, days, site, cfg.comp, cfg.window)
    removed = sorted({t for s, t in cfg.outlier_dates_by_site if s == site})
    if removed:
        series = _mask_months(series, removed)
    fit = _fit_checked(series, spec)

    report = None
    if site in cfg.site_outliers or site in cfg.remove_outliers:
        t_idx = np.arange(series.T)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = rosner(fit.residuals, m=ROSNER_MAX_OUTLIERS, index=t_idx)
    if site in cfg.remove_outliers and report is not None and report.outliers:
        flagged = sorted(report.outliers)
        series = _mask_months(series, flagged)
        removed = sorted(set(removed) | set(flagged))
        fit = _fit_checked(series, spec)
    imputed = impute_residuals(fit, cfg.rng_seed)
    return SiteResult(series, fit, imputed, report, removed)


def get_cov(cfg: GetCovConfig, data: Dataset, out_dir=None) -> CovOutput:
    """Run the full workflow for ``cfg`` on ``data``.

    Plots and ``covSites.mat`` are written under ``out_dir`` (default: the
    current directory) only when the corresponding flags are set.
    """
    cfg.validate()
    sites = cfg.sites()
    if not sites:
        raise ConfigError("no sites selected: set use36 or provide siteAdd")
    if n_months(*cfg.window) <= cfg.spec.n_params:
        raise ConfigError(f"window of {n_months(*cfg.window)} months is too short for r={cfg.r}, k={cfg.k}")
    weekly, days = _site_records(data, sites)

    results = [process_site(s, cfg, weekly[s], days.get(s, {})) for s in sites]
    full, raw = assemble([(r.fit, r.imputed) for r in results])
    cov = sample_covariance(full)
    report = mvn(full.values, full.column_names)

    out = CovOutput(
        cov=cov,
        listMod=[r.fit for r in results],
        sites=sites,
        mvn=report,
        univariateTest=report.univariate,
        residualData=full,
        residualDataNA=raw,
        rosnerTest=[r.rosner for r in results],
        pred=[r.fit.fitted for r in results],
        config=cfg,
        start_month=cfg.window[0],
        site_results=results,
    )

    out_path = Path(out_dir) if out_dir is not None else Path.cwd()
    to_plot = sites if cfg.plot_all else [s for s in cfg.site_plot if s in sites]
    if to_plot or cfg.plot_multi or cfg.write_mat:
        out_path.mkdir(parents=True, exist_ok=True)
    for s in to_plot:
        r = results[sites.index(s)]
        p = plot_series(r.fit, r.series, out_path / f"site_{s}{cfg.comp}.svg")
        out.files.append(p.name)
    if cfg.plot_multi:
        p = plot_multivariate_qq(full, out_path / "mvn_qq.svg")
        out.files.append(p.name)
    if cfg.write_mat:
        write_mat(out_path / "covSites.mat", cov)
        out.files.append("covSites.mat")
    return out


def write_outputs(result: CovOutput, out_dir) -> List[Path]:
    """report.json, cov.csv and both residual CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_cov_csv(result.cov, result.labels, out / "cov.csv")
    result.residualData.to_csv(out / "residualData.csv")
    result.residualDataNA.to_csv(out / "residualDataNA.csv")
    for name in ("cov.csv", "residualData.csv", "residualDataNA.csv"):
        if name not in result.files:
            result.files.append(name)
    report = out / "report.json"
    report.write_text(dumps_json(result.to_dict()), encoding="utf-8")
    return [out / f for f in result.files] + [report]


def _clean(o):
    """Recursively convert numpy scalars and map NaN/inf to None."""
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        o = float(o)
        return o if math.isfinite(o) else None
    return o


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"
