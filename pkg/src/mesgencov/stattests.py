"""Normality, outlier and independence tests used to vet residual matrices.

* :func:`shapiro_wilk` -- Royston's AS R94 approximation of the W test.
* :func:`mardia` -- multivariate skewness and kurtosis (MVN-package conventions:
  covariance with the ``n`` denominator, two-sided kurtosis p-value).
* :func:`rosner` -- generalized ESD outlier test.
* :func:`independence_test` -- likelihood-ratio test of mutual independence
  based on ``log det R``.

Verdicts are ``"YES"`` when the p-value is at least ``ALPHA``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .exceptions import DataError, NumericError

ALPHA = 0.05

# Royston (1995) polynomial coefficients, constant term first
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coefs, x):
    return sum(c * x**i for i, c in enumerate(coefs))


def _verdict(p: float, alpha: float = ALPHA) -> str:
    return "YES" if p >= alpha else "NO"


def _observed(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    return x[~np.isnan(x)]


def shapiro_wilk_coefficients(n: int) -> np.ndarray:
    """Approximate W-test weights a_1..a_n (antisymmetric, unit norm)."""
    if n < 3:
        raise DataError("Shapiro-Wilk needs at least 3 observations")
    a = np.zeros(n)
    if n == 3:
        a[0], a[2] = -math.sqrt(0.5), math.sqrt(0.5)
        return a
    i = np.arange(1, n + 1)
    m = stats.norm.ppf((i - 0.375) / (n + 0.25))
    summ2 = float(m @ m)
    u = 1.0 / math.sqrt(n)
    an = m[-1] / math.sqrt(summ2) + _poly(_C1, u)
    if n > 5:
        an1 = m[-2] / math.sqrt(summ2) + _poly(_C2, u)
        phi = (summ2 - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * an**2 - 2 * an1**2)
        a[2:-2] = m[2:-2] / math.sqrt(phi)
        a[1], a[-2] = -an1, an1
    else:
        phi = (summ2 - 2 * m[-1] ** 2) / (1 - 2 * an**2)
        a[1:-1] = m[1:-1] / math.sqrt(phi)
    a[0], a[-1] = -an, an
    return a


def shapiro_wilk(x) -> tuple[float, float]:
    """Shapiro-Wilk W statistic and p-value (Royston 1995, AS R94).

    NaNs are dropped. Requires 3 <= n <= 5000 and a non-degenerate sample.
    """
    x = np.sort(_observed(x))
    n = x.size
    if not 3 <= n <= 5000:
        raise DataError(f"Shapiro-Wilk requires 3 <= n <= 5000, got n={n}")
    xc = x - x.mean()
    ss = float(xc @ xc)
    if ss <= 0 or x[-1] - x[0] <= 1e-19 * max(1.0, abs(x[-1])):
        raise DataError("Shapiro-Wilk undefined for a constant sample")
    a = shapiro_wilk_coefficients(n)
    w = float((a @ xc) ** 2 / ss)
    w = min(w, 1.0)

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return w, float(min(max(p, 0.0), 1.0))
    w1 = 1.0 - w
    if w1 <= 0:
        return w, 1.0
    y = math.log(w1)
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return w, 1e-99
        y = -math.log(gamma - y)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mu = _poly(_C5, ln)
        sigma = math.exp(_poly(_C6, ln))
    p = float(stats.norm.sf((y - mu) / sigma))
    return w, p


@dataclass
class MardiaResult:
    skew_stat: float
    skew_p: float
    kurt_stat: float
    kurt_p: float
    b1p: float
    b2p: float
    df: float

    @property
    def skew_verdict(self) -> str:
        return _verdict(self.skew_p)

    @property
    def kurt_verdict(self) -> str:
        return _verdict(self.kurt_p)

    @property
    def mvn_verdict(self) -> str:
        return "YES" if self.skew_verdict == "YES" and self.kurt_verdict == "YES" else "NO"


# a column whose residual standard deviation, after regressing on the others,
# is below this fraction of its own is treated as collinear
SINGULAR_TOL = 1e-6


def _whiten(X: np.ndarray) -> np.ndarray:
    """Rows of ``X`` mapped to ``z_i`` with ``z_i . z_j = m_ij``; returns p x n."""
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    # the statistics are scale invariant, so work with unit-variance columns
    sd = np.sqrt((Xc**2).sum(axis=0) / n)
    if np.any(sd == 0):
        raise NumericError("constant column; Mardia statistics undefined")
    Xc = Xc / sd
    S = Xc.T @ Xc / n
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NumericError("sample covariance is singular; Mardia statistics undefined") from None
    if np.min(np.diag(L)) <= SINGULAR_TOL:
        raise NumericError("sample covariance is singular; Mardia statistics undefined")
    return np.linalg.solve(L, Xc.T)


def _mardia_moments(Z: np.ndarray) -> Tuple[float, float]:
    """``(b1p, b2p)`` from whitened rows; avoids the n x n matrix when n >> p."""
    p, n = Z.shape
    b2p = float(((Z * Z).sum(axis=0) ** 2).sum() / n)
    if n <= p * p:
        D = Z.T @ Z
        return float((D**3).sum() / n**2), b2p
    # sum_ij (z_i . z_j)^3 = n^2 sum_abc T_abc^2 with T_abc = mean_i z_ia z_ib z_ic
    s3 = 0.0
    for a in range(p):
        T = (Z * Z[a]) @ Z.T / n
        s3 += float((T * T).sum())
    return s3, b2p


def mardia(X) -> MardiaResult:
    """Mardia's multivariate skewness and kurtosis tests.

    With ``m_ij = (x_i - xbar)^T S^{-1} (x_j - xbar)`` and ``S`` the covariance
    with denominator ``n``::

        b1p = sum_ij m_ij^3 / n^2,    skew = n b1p / 6 ~ chi2(p(p+1)(p+2)/6)
        b2p = sum_i m_ii^2 / n,       kurt = (b2p - p(p+2)) / sqrt(8p(p+2)/n) ~ N(0,1)
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if np.isnan(X).any():
        raise DataError("Mardia test requires a complete matrix")
    if n <= p:
        raise DataError(f"Mardia test requires n > p (n={n}, p={p})")
    b1p, b2p = _mardia_moments(_whiten(X))
    df = p * (p + 1) * (p + 2) / 6.0
    skew = n * b1p / 6.0
    kurt = (b2p - p * (p + 2)) / math.sqrt(8.0 * p * (p + 2) / n)
    return MardiaResult(
        skew_stat=skew,
        skew_p=float(stats.chi2.sf(skew, df)),
        kurt_stat=kurt,
        kurt_p=float(2.0 * stats.norm.sf(abs(kurt))),
        b1p=b1p,
        b2p=b2p,
        df=df,
    )


@dataclass
class RosnerRow:
    i: int
    mean: float
    sd: float
    value: float
    obs_index: int
    R: float
    lam: float
    outlier: bool


@dataclass
class RosnerReport:
    rows: List[RosnerRow]
    n: int
    alpha: float

    @property
    def outliers(self) -> List[int]:
        return [r.obs_index for r in self.rows if r.outlier]

    def to_dict(self) -> dict:
        return {"n": self.n, "alpha": self.alpha, "all_stats": [asdict(r) for r in self.rows]}

    def render(self) -> str:
        head = f"{'i':>3} {'Mean.i':>8} {'SD.i':>7} {'Value':>8} {'Obs.Num':>7} {'R.i+1':>7} {'lambda.i+1':>10} {'Outlier':>7}"
        lines = [head]
        for r in self.rows:
            lines.append(
                f"{r.i:>3} {r.mean:8.4f} {r.sd:7.4f} {r.value:8.4f} {r.obs_index:>7} {r.R:7.4f} {r.lam:10.4f} {str(r.outlier).upper():>7}"
            )
        return "\n".join(lines)


def rosner_lambda(n: int, i: int, alpha: float = ALPHA) -> float:
    """Critical value lambda_{i+1} of the generalized ESD test."""
    nu = n - i - 2
    if nu < 1:
        raise DataError(f"Rosner critical value undefined for n={n}, i={i}")
    t = stats.t.ppf(1.0 - alpha / (2.0 * (n - i)), nu)
    return float((n - i - 1) * t / math.sqrt((nu + t * t) * (n - i)))


def rosner(x, m: int = 3, alpha: float = ALPHA, index: Optional[Sequence[int]] = None) -> RosnerReport:
    """Generalized ESD (Rosner) test for up to ``m`` outliers.

    ``obs_index`` in the report is the position in ``x`` (NaNs are skipped
    but keep their positions), or the matching entry of ``index`` if given.
    """
    x = np.asarray(x, dtype=float).ravel()
    pos = np.flatnonzero(~np.isnan(x))
    if index is not None:
        index = np.asarray(index)
        if index.shape != x.shape:
            raise ValueError("index must match x in length")
    vals = x[pos]
    n = vals.size
    if m < 1:
        raise ValueError("m must be >= 1")
    if n < 15:
        warnings.warn(f"Rosner test on n={n} < 15 observations is unreliable", stacklevel=2)
    if n - m - 1 < 1:
        raise DataError(f"Rosner test with m={m} needs more than {m + 1} observations (n={n})")

    keep = np.ones(n, dtype=bool)
    rows = []
    for i in range(m):
        cur = vals[keep]
        mu = float(cur.mean())
        sd = float(cur.std(ddof=1))
        if not sd > 0:
            break
        dev = np.where(keep, np.abs(vals - mu), -np.inf)
        j = int(np.argmax(dev))
        R = float(dev[j] / sd)
        lam = rosner_lambda(n, i, alpha)
        obs = int(pos[j]) if index is None else int(index[pos[j]])
        rows.append(RosnerRow(i, mu, sd, float(vals[j]), obs, R, lam, False))
        keep[j] = False
    last = max((r.i for r in rows if r.R > r.lam), default=-1)
    for r in rows:
        r.outlier = r.i <= last
    return RosnerReport(rows, n, alpha)


@dataclass
class IndependenceReport:
    u: float
    threshold: float
    independent: bool
    m: int
    df: int
    alpha: float

    def to_dict(self) -> dict:
        return asdict(self)

    def render(self) -> str:
        return (
            f"{'chisq dist likelihood ratio':>28} {'tchisq':>10} {'independent':>12}\n"
            f"{self.u:28.6g} {self.threshold:10.2f} {str(self.independent).upper():>12}"
        )


def correlation_matrix(X: np.ndarray) -> np.ndarray:
    Xc = X - X.mean(axis=0)
    sd = np.sqrt((Xc**2).sum(axis=0))
    if np.any(sd == 0):
        raise NumericError("correlation undefined for a constant column")
    R = (Xc.T @ Xc) / np.outer(sd, sd)
    np.fill_diagonal(R, 1.0)
    return R


def independence_test(X, alpha: float = ALPHA) -> IndependenceReport:
    """Likelihood-ratio test that the m columns of ``X`` are mutually independent.

    ``u = -(nu - (2m + 5)/6) log det R`` with ``nu = m(m + 1)/2``; independence
    is rejected when ``u`` exceeds the ``1 - alpha`` chi-square quantile with
    ``m(m - 1)/2`` degrees of freedom.
    """
    X = np.asarray(getattr(X, "values", X), dtype=float)
    if X.ndim != 2:
        raise DataError("independence test needs a 2-D matrix")
    if np.isnan(X).any():
        raise DataError("independence test requires a complete (imputed) matrix")
    n, m = X.shape
    if n <= m:
        raise DataError(f"independence test requires more rows than columns (n={n}, m={m})")
    R = correlation_matrix(X)
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise NumericError("correlation matrix is numerically singular") from None
    d = np.diag(L)
    if d.min() <= SINGULAR_TOL:
        raise NumericError("correlation matrix is numerically singular")
    logdet = 2.0 * np.log(d).sum()
    nu = m * (m + 1) / 2.0
    u = -(nu - (2.0 * m + 5.0) / 6.0) * logdet
    u = 0.0 if u == 0 else float(u)
    df = m * (m - 1) // 2
    thr = float(stats.chi2.ppf(1.0 - alpha, df)) if df > 0 else 0.0
    return IndependenceReport(u, thr, bool(u <= thr), m, df, alpha)


@dataclass
class Descriptive:
    variable: str
    n: int
    mean: float
    std: float
    median: float
    min: float
    max: float
    q25: float
    q75: float
    skew: float
    kurtosis: float


def descriptives(X, names: Optional[Sequence[str]] = None) -> List[Descriptive]:
    """Per-column summary statistics (NaNs dropped per column).

    ``std`` uses the n-1 denominator; quantiles interpolate linearly between
    order statistics; skewness and excess kurtosis are moment-based.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if names is None:
        names = [f"V{j + 1}" for j in range(X.shape[1])]
    out = []
    for j, name in enumerate(names):
        col = _observed(X[:, j])
        n = col.size
        if n == 0:
            nan = float("nan")
            out.append(Descriptive(name, 0, nan, nan, nan, nan, nan, nan, nan, nan, nan))
            continue
        mean = float(col.mean())
        d = col - mean
        m2 = float((d**2).mean())
        if m2 > 0:
            skew = float((d**3).mean() / m2**1.5)
            kurt = float((d**4).mean() / m2**2 - 3.0)
        else:
            skew = kurt = float("nan")
        q = np.quantile(col, [0.25, 0.5, 0.75])
        out.append(
            Descriptive(
                name, int(n), mean, float(col.std(ddof=1)) if n > 1 else float("nan"),
                float(q[1]), float(col.min()), float(col.max()), float(q[0]), float(q[2]), skew, kurt,
            )
        )
    return out


@dataclass
class MvnReport:
    """Multivariate rows, univariate Shapiro-Wilk rows and descriptives."""

    multivariate: List[dict] = field(default_factory=list)
    univariate: List[dict] = field(default_factory=list)
    descriptives: List[Descriptive] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "multivariateNormality": self.multivariate,
            "univariateNormality": self.univariate,
            "Descriptives": [asdict(d) for d in self.descriptives],
        }

    def render(self) -> str:
        return "\n\n".join(
            [
                "$multivariateNormality\n" + render_multivariate(self.multivariate),
                "$univariateNormality\n" + render_univariate(self.univariate),
                "$Descriptives\n" + render_descriptives(self.descriptives),
            ]
        )


def _num(v, fmt="{:.4g}") -> str:
    return "<NA>" if v is None or (isinstance(v, float) and math.isnan(v)) else fmt.format(v)


def _pfmt(p) -> str:
    if p is None or (isinstance(p, float) and math.isnan(p)):
        return "<NA>"
    return "<0.001" if p < 0.001 else f"{p:.4f}"


def render_multivariate(rows: List[dict]) -> str:
    lines = [f"{'':>2} {'Test':>16} {'Statistic':>10} {'p value':>9} {'Result':>6}"]
    for i, r in enumerate(rows, 1):
        lines.append(f"{i:>2} {r['test']:>16} {_num(r['statistic']):>10} {_num(r['p_value']):>9} {r['result']:>6}")
    return "\n".join(lines)


def render_univariate(rows: List[dict]) -> str:
    w = max([8] + [len(r["variable"]) for r in rows])
    lines = [f"{'':>3} {'Test':>12} {'Variable':>{w}} {'Statistic':>9} {'p value':>8} {'Normality':>9}"]
    for i, r in enumerate(rows, 1):
        lines.append(
            f"{i:>3} {r['test']:>12} {r['variable']:>{w}} {r['statistic']:9.4f} {_pfmt(r['p_value']):>8} {r['normality']:>9}"
        )
    return "\n".join(lines)


def render_descriptives(rows: List[Descriptive]) -> str:
    w = max([8] + [len(d.variable) for d in rows])
    cols = ("n", "Mean", "Std.Dev", "Median", "Min", "Max", "25th", "75th", "Skew", "Kurtosis")
    lines = [" " * w + "".join(f"{c:>11}" for c in cols)]
    for d in rows:
        vals = (d.mean, d.std, d.median, d.min, d.max, d.q25, d.q75, d.skew, d.kurtosis)
        lines.append(f"{d.variable:<{w}}{d.n:>11}" + "".join(f"{_num(v, '{:.4g}'):>11}" for v in vals))
    return "\n".join(lines)


def univariate_tests(X, names: Sequence[str]) -> List[dict]:
    X = np.asarray(X, dtype=float)
    rows = []
    for j, name in enumerate(names):
        w, p = shapiro_wilk(X[:, j])
        rows.append({"test": "Shapiro-Wilk", "variable": name, "statistic": w, "p_value": p, "normality": _verdict(p)})
    return rows


def mvn(X, names: Sequence[str]) -> MvnReport:
    """Mardia + Shapiro-Wilk + descriptives, in the layout of the R MVN package.

    Rows containing NaN are dropped before the multivariate test. When the
    multivariate test is undefined (n <= p or singular covariance) its rows
    carry ``None`` statistics and verdict ``"NA"``.
    """
    X = np.asarray(X, dtype=float)
    complete = X[~np.isnan(X).any(axis=1)]
    try:
        res = mardia(complete)
    except (DataError, NumericError) as exc:
        warnings.warn(f"multivariate normality test skipped: {exc}", stacklevel=2)
        multi = [
            {"test": t, "statistic": None, "p_value": None, "result": "NA"}
            for t in ("Mardia Skewness", "Mardia Kurtosis", "MVN")
        ]
    else:
        multi = [
            {"test": "Mardia Skewness", "statistic": res.skew_stat, "p_value": res.skew_p, "result": res.skew_verdict},
            {"test": "Mardia Kurtosis", "statistic": res.kurt_stat, "p_value": res.kurt_p, "result": res.kurt_verdict},
            {"test": "MVN", "statistic": None, "p_value": None, "result": res.mvn_verdict},
        ]
    return MvnReport(multi, univariate_tests(X, names), descriptives(X, names))
