"""Per-site trend + seasonality regression on log concentrations.

The model for month ``t = 0 .. T-1`` is::

    log y(t) = sum_{i=0}^{r} beta_i t^i
             + sum_{j=1}^{k} [a_j cos(2 pi j t / s) + b_j sin(2 pi j t / s)]

with ``s = 12``. Coefficients are estimated by ordinary least squares on the
observed months only; fitted values are produced for every month.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .aggregate import MonthlySeries
from .exceptions import ConfigError, DataError, NumericError

MAX_DEGREE = 5


@dataclass(frozen=True)
class ModelSpec:
    r: int = 1
    k: int = 1
    period: int = 12

    def __post_init__(self):
        for name in ("r", "k"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 0 <= v <= MAX_DEGREE:
                raise ConfigError(f"{name} must be an integer <= {MAX_DEGREE} (and >= 0), got {v!r}")
        if self.period < 1:
            raise ConfigError(f"period must be positive, got {self.period}")

    @property
    def n_params(self) -> int:
        return self.r + 1 + 2 * self.k

    def term_names(self) -> List[str]:
        """Regressor labels in design-matrix column order (R ``lm`` style)."""
        names = ["(Intercept)"]
        names += ["I(t)" if i == 1 else f"I(t^{i})" for i in range(1, self.r + 1)]
        for j in range(1, self.k + 1):
            mult = "" if j == 1 else f"*{j}"
            names.append(f"I(cos(t*(2*pi/s){mult}))")
            names.append(f"I(sin(t*(2*pi/s){mult}))")
        return names


def design_matrix(T: int, spec: ModelSpec) -> np.ndarray:
    """Regressors for months 0..T-1: powers of t, then cos/sin pairs per harmonic."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if T <= spec.n_params:
        raise DataError(f"T={T} months cannot determine {spec.n_params} coefficients")
    t = np.arange(T, dtype=float)
    cols = [t**i for i in range(spec.r + 1)]
    for j in range(1, spec.k + 1):
        w = 2.0 * np.pi * j * t / spec.period
        cols.append(np.cos(w))
        cols.append(np.sin(w))
    return np.column_stack(cols)


@dataclass
class CoefRow:
    name: str
    estimate: float
    std_error: float
    t_value: float
    p_value: float


@dataclass
class FitResult:
    site: str
    chemical: str
    spec: ModelSpec
    coeffs: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    residual_std_error: float
    coeff_table: List[CoefRow] = field(default_factory=list)
    r_squared: float = float("nan")
    adj_r_squared: float = float("nan")
    f_statistic: float = float("nan")
    f_p_value: float = float("nan")
    n_obs: int = 0
    dof: int = 0

    @property
    def T(self) -> int:
        return len(self.fitted)

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.residuals)

    @property
    def rss(self) -> float:
        e = self.residuals[self.observed]
        return float(e @ e)

    def to_dict(self) -> dict:
        return {
            "site": self.site,
            "chemical": self.chemical,
            "r": self.spec.r,
            "k": self.spec.k,
            "coefficients": [
                {
                    "term": c.name,
                    "estimate": c.estimate,
                    "std_error": c.std_error,
                    "t_value": c.t_value,
                    "p_value": c.p_value,
                }
                for c in self.coeff_table
            ],
            "residual_std_error": self.residual_std_error,
            "dof": self.dof,
            "n_obs": self.n_obs,
            "r_squared": self.r_squared,
            "adj_r_squared": self.adj_r_squared,
            "f_statistic": self.f_statistic,
            "f_p_value": self.f_p_value,
        }


def _lstsq_qr(X: np.ndarray, y: np.ndarray, names: Sequence[str]):
    """Least squares via pivoted QR on the column-equilibrated design.

    Returns (beta, Rinv) where ``Rinv @ Rinv.T`` is (X^T X)^{-1}.
    """
    scale = np.sqrt((X**2).sum(axis=0))
    if np.any(scale == 0):
        zero = [names[i] for i in np.flatnonzero(scale == 0)]
        raise NumericError(f"design columns are identically zero on observed rows: {zero}")
    Xs = X / scale
    Q, R, piv = scipy.linalg.qr(Xs, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = d[0] * max(X.shape) * np.finfo(float).eps * 10
    bad = d <= tol
    if np.any(bad):
        dropped = [names[piv[i]] for i in np.flatnonzero(bad)]
        raise NumericError(f"rank-deficient design; collinear columns: {dropped}")
    z = scipy.linalg.solve_triangular(R, Q.T @ y)
    Rinv = scipy.linalg.solve_triangular(R, np.eye(R.shape[0]))
    p = X.shape[1]
    beta = np.empty(p)
    beta[piv] = z
    # undo pivoting and column scaling on the covariance factor
    Rinv_full = np.empty_like(Rinv)
    Rinv_full[piv, :] = Rinv
    Rinv_full /= scale[:, None]
    beta /= scale
    return beta, Rinv_full


def fit_ols(series: MonthlySeries, spec: ModelSpec = ModelSpec()) -> FitResult:
    """Fit the log-linear trend/seasonal model to one monthly series."""
    values = np.asarray(series.values, dtype=float)
    obs = ~np.isnan(values)
    if np.any(values[obs] <= 0):
        raise DataError(f"{series.site}{series.chemical}: non-positive concentrations cannot be log-transformed")
    p = spec.n_params
    n = int(obs.sum())
    if n <= p:
        raise DataError(
            f"site {series.site}: only {n} observed months for {series.chemical}, need more than {p}"
        )
    X_all = design_matrix(series.T, spec)
    X = X_all[obs]
    y = np.log(values[obs])
    names = spec.term_names()
    beta, Rinv = _lstsq_qr(X, y, names)

    fitted = X_all @ beta
    resid = np.full(series.T, np.nan)
    resid[obs] = y - fitted[obs]
    e = resid[obs]
    rss = float(e @ e)
    dof = n - p
    sigma2 = rss / dof
    sigma = float(np.sqrt(sigma2))

    se = np.sqrt(sigma2 * (Rinv**2).sum(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = beta / se
    pvals = 2.0 * stats.t.sf(np.abs(tvals), dof)
    table = [CoefRow(nm, float(b), float(s), float(tv), float(pv)) for nm, b, s, tv, pv in zip(names, beta, se, tvals, pvals)]

    tss = float(((y - y.mean()) ** 2).sum())
    if p > 1 and tss > 0:
        r2 = 1.0 - rss / tss
        adj = 1.0 - (1.0 - r2) * (n - 1) / dof
        if rss > 0:
            fstat = ((tss - rss) / (p - 1)) / sigma2
            fp = float(stats.f.sf(fstat, p - 1, dof))
        else:
            fstat, fp = float("inf"), 0.0
    else:
        r2 = adj = fstat = fp = float("nan")

    return FitResult(
        site=series.site,
        chemical=series.chemical,
        spec=spec,
        coeffs=beta,
        residuals=resid,
        fitted=fitted,
        residual_std_error=sigma,
        coeff_table=table,
        r_squared=float(r2),
        adj_r_squared=float(adj),
        f_statistic=float(fstat),
        f_p_value=fp,
        n_obs=n,
        dof=dof,
    )


def stream_seed(rng_seed: int, site: str, chemical: str) -> np.random.SeedSequence:
    """Seed sequence for one (site, chemical) stream, independent of processing order."""
    return np.random.SeedSequence(
        [int(rng_seed) & 0xFFFFFFFF, zlib.crc32(site.encode()), zlib.crc32(chemical.encode())]
    )


def impute_residuals(fit: FitResult, rng_seed: int = 0) -> np.ndarray:
    """Fill missing-month residuals with N(0, sigma^2) draws.

    Observed months keep their residual. An imputed residual is equivalent to
    imputing ``fitted + draw`` on the log scale.
    """
    out = np.array(fit.residuals, dtype=float, copy=True)
    miss = np.isnan(out)
    if miss.any():
        rng = np.random.default_rng(stream_seed(rng_seed, fit.site, fit.chemical))
        out[miss] = rng.normal(0.0, fit.residual_std_error, size=int(miss.sum()))
    return out


def _stars(p: float) -> str:
    if not np.isfinite(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


def _fmt_p(p: float) -> str:
    if not np.isfinite(p):
        return "NA"
    if p < 2e-16:
        return "< 2e-16"
    if p < 1e-3:
        return f"{p:.2g}"
    return f"{p:.3g}"


def _g4(x: float) -> str:
    return f"{x:.4g}"


def summarize(fit: FitResult) -> str:
    """Text summary laid out like R's ``summary.lm``."""
    lines = []
    formula = " + ".join(fit.spec.term_names()[1:]) or "1"
    lines.append("Call:")
    lines.append(f"lm(formula = log({fit.site}{fit.chemical}) ~ {formula})")
    lines.append("")
    lines.append("Residuals:")
    e = fit.residuals[fit.observed]
    q = np.quantile(e, [0, 0.25, 0.5, 0.75, 1.0])
    lines.append("{:>8} {:>8} {:>8} {:>8} {:>8}".format("Min", "1Q", "Median", "3Q", "Max"))
    lines.append(" ".join(f"{v:8.4f}" for v in q))
    lines.append("")
    lines.append("Coefficients:")
    w = max(len(c.name) for c in fit.coeff_table)
    lines.append(f"{'':<{w}} {'Estimate':>9} {'Std. Error':>10} {'t value':>8} {'Pr(>|t|)':>9}")
    for c in fit.coeff_table:
        lines.append(
            f"{c.name:<{w}} {c.estimate:9.4f} {c.std_error:10.4f} {c.t_value:8.2f} {_fmt_p(c.p_value):>9} {_stars(c.p_value)}".rstrip()
        )
    lines.append("---")
    lines.append("Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1")
    lines.append("")
    lines.append(f"Residual standard error: {fit.residual_std_error:.4f} on {fit.dof} degrees of freedom")
    n_missing = fit.T - fit.n_obs
    if n_missing:
        lines.append(f"  ({n_missing} observations deleted due to missingness)")
    if np.isfinite(fit.r_squared):
        lines.append(f"Multiple R-squared:  {_g4(fit.r_squared)},\tAdjusted R-squared:  {_g4(fit.adj_r_squared)}")
        lines.append(
            f"F-statistic: {_g4(fit.f_statistic)} on {fit.spec.n_params - 1} and {fit.dof} DF,  p-value: {fit.f_p_value:.4g}"
        )
    return "\n".join(lines)
