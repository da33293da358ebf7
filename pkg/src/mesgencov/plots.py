"""Small dependency-free SVG plots (observed vs fitted series, chi-square QQ)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .exceptions import DataError, NumericError

W, H, PAD = 640, 400, 50


def _scale(v, lo, hi, a, b):
    if hi == lo:
        return np.full_like(np.asarray(v, dtype=float), (a + b) / 2.0)
    return a + (np.asarray(v, dtype=float) - lo) * (b - a) / (hi - lo)


def _svg(title: str, body: Sequence[str], xlabel: str, ylabel: str, xr, yr) -> str:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
        f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="black"/>',
        f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle" font-size="12">{xlabel} [{xr[0]:.3g}, {xr[1]:.3g}]</text>',
        f'<text x="14" y="{H / 2:.1f}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {H / 2:.1f})">'
        f"{ylabel} [{yr[0]:.3g}, {yr[1]:.3g}]</text>",
    ]
    out.extend(body)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_series(fit, series, path) -> Path:
    """Observed log concentrations (one circle per observed month) and the fitted curve."""
    values = np.asarray(series.values, dtype=float)
    T = len(values)
    if T != fit.T:
        raise DataError(f"series length {T} does not match fit length {fit.T}")
    t = np.arange(T)
    obs = ~np.isnan(values)
    logy = np.log(values[obs])
    yall = np.concatenate([logy, fit.fitted])
    ylo, yhi = float(yall.min()), float(yall.max())
    xs = _scale(t, 0, max(T - 1, 1), PAD, W - PAD)
    ys_fit = _scale(fit.fitted, ylo, yhi, H - PAD, PAD)
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys_fit))
    body = [f'<polyline class="fitted" fill="none" stroke="red" stroke-width="1.5" points="{pts}"/>']
    for x, y in zip(xs[obs], _scale(logy, ylo, yhi, H - PAD, PAD)):
        body.append(f'<circle class="observed" cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="black"/>')
    title = f"log {series.chemical} at site {series.site}"
    path = Path(path)
    path.write_text(_svg(title, body, "month t", f"log({series.chemical})", (0, T - 1), (ylo, yhi)), encoding="utf-8")
    return path


def qq_points(X) -> tuple[np.ndarray, np.ndarray]:
    """Sorted squared Mahalanobis distances and matching chi-square quantiles."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise DataError("multivariate QQ plot needs at least 2 columns")
    if np.isnan(X).any():
        raise DataError("multivariate QQ plot needs a complete matrix")
    n, m = X.shape
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / (n - 1)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise NumericError("covariance is singular; cannot compute Mahalanobis distances") from None
    Z = np.linalg.solve(L, Xc.T)
    d2 = np.sort((Z * Z).sum(axis=0))
    q = stats.chi2.ppf((np.arange(1, n + 1) - 0.5) / n, m)
    return q, d2


def plot_multivariate_qq(X, path) -> Path:
    """Chi-square QQ plot of squared Mahalanobis distances."""
    q, d2 = qq_points(X)
    hi = float(max(q.max(), d2.max()))
    xs = _scale(q, 0, hi, PAD, W - PAD)
    ys = _scale(d2, 0, hi, H - PAD, PAD)
    body = [
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{PAD}" stroke="grey" stroke-dasharray="4,3"/>'
    ]
    body += [f'<circle class="qq" cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="navy"/>' for x, y in zip(xs, ys)]
    path = Path(path)
    path.write_text(
        _svg("Chi-Square Q-Q Plot", body, "chi-square quantile", "squared Mahalanobis distance", (0, hi), (0, hi)),
        encoding="utf-8",
    )
    return path
