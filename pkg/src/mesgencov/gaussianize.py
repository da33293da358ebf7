"""Lambert W x Gaussian (heavy-tail "h" type) Gaussianization.

A heavy-tailed variable is modelled as ``z = u exp(delta u^2 / 2) sigma + mu``
with ``u`` standard normal. Given data, ``(mu, sigma, delta)`` are estimated
by iterative generalized method of moments (IGMM) and the latent Gaussian
values are recovered with the principal branch of the Lambert W function.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq, newton

from .exceptions import DataError

INV_E = math.exp(-1.0)
KURT_TOL = 1e-6
MAX_ITER = 100


def lambert_w0(x):
    """Principal branch W0 of the Lambert W function (``w e^w = x``).

    Vectorized Halley iteration. Raises ``ValueError`` for ``x < -1/e``.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(x_arr)):
        raise ValueError("lambert_w0 is undefined for NaN")
    if np.any(x_arr < -INV_E):
        raise ValueError("lambert_w0 is only defined for x >= -1/e")
    x1 = np.atleast_1d(x_arr)
    w = np.empty_like(x1)

    # starting points: branch-point series, Winitzki's approximation, asymptotic log form
    near = x1 < -0.3
    p = np.sqrt(np.maximum(2.0 * (math.e * x1[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    mid = ~near & (x1 <= 3.0)
    w[mid] = np.log1p(x1[mid]) * (1.0 - np.log1p(np.log1p(x1[mid])) / (2.0 + np.log1p(x1[mid])))
    big = x1 > 3.0
    L1 = np.log(x1[big])
    L2 = np.log(L1)
    w[big] = L1 - L2 + L2 / L1

    fixed = (x1 == 0.0) | (x1 == -INV_E)
    w[x1 == 0.0] = 0.0
    w[x1 == -INV_E] = -1.0
    tol = 4 * np.finfo(float).eps
    for _ in range(60):
        ew = np.exp(w)
        f = w * ew - x1
        wp1 = w + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
            step = np.where(fixed | (denom == 0), 0.0, f / denom)
        step = np.nan_to_num(step)
        wn = np.maximum(w - step, -1.0)
        delta = np.abs(wn - w)
        w = wn
        if np.all(delta <= tol * np.maximum(1.0, np.abs(w))):
            break
    return w.reshape(x_arr.shape) if x_arr.ndim else float(w[0])


def tail_transform(u, delta: float):
    """Forward heavy-tail map ``u exp(delta u^2 / 2)``."""
    u = np.asarray(u, dtype=float)
    return u * np.exp(0.5 * delta * u * u)


def inverse_tail_transform(z, delta: float):
    """Inverse of :func:`tail_transform`: ``sign(z) sqrt(W0(delta z^2) / delta)``."""
    z = np.asarray(z, dtype=float)
    if delta <= 0:
        return z.copy()
    dz2 = delta * z * z
    small = dz2 < 1e-12
    out = np.empty_like(z)
    # W0(x)/delta -> z^2 as delta z^2 -> 0
    out[small] = z[small] * (1.0 - 0.5 * dz2[small])
    out[~small] = np.sign(z[~small]) * np.sqrt(lambert_w0(dz2[~small]) / delta)
    return out


def kurtosis(x) -> float:
    """Moment kurtosis ``m4 / m2^2`` (3 for a Gaussian)."""
    d = np.asarray(x, dtype=float)
    d = d - d.mean()
    m2 = float((d * d).mean())
    return float((d**4).mean() / (m2 * m2))


def initial_delta(gamma2: float) -> float:
    """Closed-form starting value of delta from the kurtosis ``gamma2``."""
    arg = 66.0 * gamma2 - 162.0
    if not np.isfinite(arg) or arg < 0:
        return 0.01
    return max(0.0, (math.sqrt(arg) - 6.0) / 66.0)


def _delta_gmm(z: np.ndarray, start: float) -> float:
    """delta >= 0 that makes the back-transformed ``z`` have kurtosis 3."""

    def excess(delta):
        return kurtosis(inverse_tail_transform(z, delta)) - 3.0

    if excess(0.0) <= 0:
        return 0.0
    if start > 0:
        # warm start: secant steps from the previous iterate usually converge in a few evaluations
        try:
            d = float(newton(excess, start, x1=start * 1.01, tol=1e-14, maxiter=20))
        except (RuntimeError, ValueError, FloatingPointError):
            d = -1.0
        if d >= 0 and np.isfinite(d) and abs(excess(d)) < 1e-9:
            return d
    hi = max(start, 0.01)
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e3:
            return hi
    return float(brentq(excess, 0.0, hi, xtol=1e-14, rtol=1e-12, maxiter=200))


@dataclass(frozen=True)
class LambertWParams:
    mu: float
    sigma: float
    delta: float
    iterations: int = 0
    converged: bool = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")


def gaussianize_h(column) -> Tuple[np.ndarray, LambertWParams]:
    """Estimate heavy-tail parameters by IGMM and return the Gaussianized column.

    NaNs are ignored for estimation and passed through. The input kurtosis
    must exceed 3 for ``delta`` to move off zero; otherwise the column is
    returned unchanged with ``delta = 0``.
    """
    col = np.asarray(column, dtype=float)
    obs = ~np.isnan(col)
    y = col[obs]
    if y.size < 10:
        raise DataError(f"Lambert W estimation needs at least 10 observations, got {y.size}")
    sd = float(y.std(ddof=1))
    if not sd > 0:
        raise DataError("Lambert W estimation undefined for a zero-variance column")

    gamma2 = kurtosis(y)
    if gamma2 <= 3.0:
        return col.copy(), LambertWParams(float(y.mean()), sd, 0.0, 0, True)

    mu, sigma = float(np.median(y)), sd
    delta = initial_delta(gamma2)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        z = (y - mu) / sigma
        delta_new = _delta_gmm(z, delta)
        x = inverse_tail_transform(z, delta_new) * sigma + mu
        mu_new, sigma_new = float(x.mean()), float(x.std(ddof=1))
        change = abs(delta_new - delta) + abs(mu_new - mu) / sigma + abs(sigma_new - sigma) / sigma
        mu, sigma, delta = mu_new, sigma_new, delta_new
        if change < 1e-10 and abs(kurtosis(inverse_tail_transform((y - mu) / sigma, delta)) - 3.0) < KURT_TOL:
            converged = True
            break
    if not converged:
        warnings.warn(f"IGMM did not converge in {MAX_ITER} iterations; returning last iterate", stacklevel=2)

    out = np.full_like(col, np.nan)
    out[obs] = inverse_tail_transform((y - mu) / sigma, delta) * sigma + mu
    return out, LambertWParams(mu, sigma, delta, it, converged)


@dataclass
class LambertWOutput:
    mvn: "object"
    cov: np.ndarray
    newResiduals: "object"
    univariateTest: list
    params: list

    def to_dict(self) -> dict:
        return {
            "mvn": self.mvn.to_dict(),
            "cov": self.cov.tolist(),
            "labels": list(self.newResiduals.column_names),
            "univariateTest": self.univariateTest,
            "params": [{"mu": p.mu, "sigma": p.sigma, "delta": p.delta} for p in self.params],
        }


def lambertw_transform(residuals, plot_multi: bool = False, write_mat: bool = False, out_dir=None) -> LambertWOutput:
    """Gaussianize every column of a residual matrix and re-run the diagnostics.

    Covariance and tests use complete rows only when the input has missing
    entries. ``plot_multi`` writes ``lambertw_qq.svg`` and ``write_mat``
    writes ``covSites.mat`` into ``out_dir`` (default: current directory).
    """
    from .covariance import ResidualMatrix, sample_covariance
    from .stattests import mvn

    if not isinstance(residuals, ResidualMatrix):
        raise TypeError("residuals must be a ResidualMatrix")
    if residuals.values.shape[1] < 2:
        raise DataError("lambertw_transform needs at least 2 columns")
    cols, params = [], []
    for j, name in enumerate(residuals.column_names):
        try:
            out, prm = gaussianize_h(residuals.values[:, j])
        except DataError as exc:
            raise DataError(f"column {name}: {exc}") from None
        cols.append(out)
        params.append(prm)
    new = ResidualMatrix(list(residuals.column_names), np.column_stack(cols), imputed=residuals.imputed)
    complete = new.values[~np.isnan(new.values).any(axis=1)]
    cov = sample_covariance(complete)
    report = mvn(new.values, new.column_names)

    out_dir = Path(out_dir) if out_dir is not None else Path.cwd()
    if plot_multi or write_mat:
        out_dir.mkdir(parents=True, exist_ok=True)
    if plot_multi:
        from .plots import plot_multivariate_qq

        plot_multivariate_qq(complete, out_dir / "lambertw_qq.svg")
    if write_mat:
        from .matio import write_mat as _write

        _write(out_dir / "covSites.mat", cov)
    return LambertWOutput(report, cov, new, report.univariate, params)
