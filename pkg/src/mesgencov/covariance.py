"""Residual matrices across sites and their sample covariance."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .exceptions import DataError, NumericError
from .fit import FitResult


@dataclass
class ResidualMatrix:
    """Months x columns residuals; columns are labelled ``<site><chemical>``."""

    column_names: List[str]
    values: np.ndarray
    imputed: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names):
            raise DataError(f"values shape {self.values.shape} does not match {len(self.column_names)} labels")
        if len(set(self.column_names)) != len(self.column_names):
            raise DataError("residual column labels must be unique")
        if self.imputed and np.isnan(self.values).any():
            raise DataError("an imputed residual matrix cannot contain missing entries")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]

    def to_csv(self, path) -> None:
        """Write with a leading 1-based month column; missing entries as ``NA``."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + list(self.column_names))
            for t, row in enumerate(self.values, start=1):
                w.writerow([t] + ["NA" if np.isnan(v) else repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "ResidualMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DataError(f"{path}: empty residual file")
        header = rows[0]
        # a blank or index-like first header cell marks a row-label column
        skip = 1 if header and header[0].strip() in ("", "t", "month") else 0
        names = [h.strip() for h in header[skip:]]
        vals = []
        for i, row in enumerate(rows[1:], start=2):
            try:
                vals.append([float("nan") if c.strip() in ("NA", "") else float(c) for c in row[skip:]])
            except ValueError as exc:
                raise DataError(f"{path}: row {i}: {exc}") from None
        arr = np.array(vals, dtype=float).reshape(len(vals), len(names))
        return cls(names, arr, imputed=not np.isnan(arr).any())


def sample_covariance(R) -> np.ndarray:
    """Covariance with the ``T - 1`` denominator; input must be complete."""
    X = np.asarray(getattr(R, "values", R), dtype=float)
    if X.ndim != 2:
        raise DataError("sample_covariance expects a 2-D matrix")
    if np.isnan(X).any():
        raise DataError("sample_covariance requires a matrix without missing entries")
    T = X.shape[0]
    if T < 2:
        raise DataError(f"sample_covariance needs at least 2 rows, got {T}")
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / (T - 1)
    return 0.5 * (C + C.T)


def is_psd(C: np.ndarray, tol: float = 1e-10) -> bool:
    """Cholesky of ``C + tol*I`` succeeds (minimum eigenvalue >= -tol)."""
    try:
        np.linalg.cholesky(C + tol * np.eye(C.shape[0]))
    except np.linalg.LinAlgError:
        return False
    return True


def column_label(site: str, chemical: str) -> str:
    return f"{site}{chemical}"


def assemble(per_site: Sequence[Tuple[FitResult, np.ndarray]]) -> Tuple[ResidualMatrix, ResidualMatrix]:
    """Stack per-site residuals into (imputed, raw-with-NaN) matrices."""
    if not per_site:
        raise DataError("no sites to assemble")
    T = per_site[0][0].T
    labels, full, raw = [], [], []
    for fit, imputed in per_site:
        imputed = np.asarray(imputed, dtype=float)
        if fit.T != T or imputed.shape != (T,):
            raise DataError(
                f"site {fit.site}: residual length {imputed.shape[0]} / {fit.T} does not match T={T}"
            )
        labels.append(column_label(fit.site, fit.chemical))
        full.append(imputed)
        raw.append(fit.residuals)
    return (
        ResidualMatrix(labels, np.column_stack(full), imputed=True),
        ResidualMatrix(labels, np.column_stack(raw), imputed=False),
    )


def write_cov_csv(C: np.ndarray, labels: Sequence[str], path) -> None:
    """Covariance as CSV: header row of labels, then one labelled row per variable."""
    C = np.asarray(C, dtype=float)
    if C.shape != (len(labels), len(labels)):
        raise NumericError(f"covariance shape {C.shape} does not match {len(labels)} labels")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(labels))
        for name, row in zip(labels, C):
            w.writerow([name] + [repr(float(v)) for v in row])


def read_cov_csv(path) -> Tuple[np.ndarray, List[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    C = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
    if C.shape != (len(labels), len(labels)):
        raise DataError(f"{path}: covariance is not square with one label per column")
    return C, labels
