"""Sanity checks of a covariance matrix as a maximum-entropy sampling input.

This is a validator, not a solver: a greedy build followed by single-swap
local search on ``log det C[S, S]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .exceptions import DataError, NumericError

PSD_TOL = 1e-10


def repair_psd(C) -> np.ndarray:
    """Symmetrize and clip eigenvalues in [-1e-10, 0) to zero; more negative is an error."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DataError(f"covariance must be square, got shape {C.shape}")
    C = 0.5 * (C + C.T)
    vals, vecs = np.linalg.eigh(C)
    if vals.min() < -PSD_TOL:
        raise NumericError(f"covariance has eigenvalue {vals.min():.3g} < -{PSD_TOL}; not a covariance matrix")
    if vals.min() < 0:
        vals = np.clip(vals, 0.0, None)
        C = (vecs * vals) @ vecs.T
        C = 0.5 * (C + C.T)
    return C


@dataclass
class MespInstance:
    C: np.ndarray
    s: int

    def __post_init__(self):
        self.C = repair_psd(self.C)
        n = self.C.shape[0]
        if not 0 < self.s <= n:
            raise DataError(f"subset size s={self.s} must satisfy 0 < s <= n={n}")

    @property
    def n(self) -> int:
        return self.C.shape[0]


def logdet_subset(C, S: Iterable[int]) -> float:
    """``log det C[S, S]`` by Cholesky; ``-inf`` when the submatrix is singular."""
    C = np.asarray(C, dtype=float)
    S = list(S)
    if not S:
        raise ValueError("S must be non-empty")
    n = C.shape[0]
    for i in S:
        if not (isinstance(i, (int, np.integer)) and 0 <= i < n):
            raise IndexError(f"invalid index {i!r} for a {n}x{n} matrix")
    if len(set(S)) != len(S):
        raise IndexError("duplicate indices in S")
    sub = C[np.ix_(S, S)]
    try:
        L = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        return float("-inf")
    d = np.diag(L)
    if np.any(d <= 0):
        return float("-inf")
    return float(2.0 * np.log(d).sum())


def greedy(C: np.ndarray, s: int) -> List[int]:
    """Forward selection by largest conditional variance (= largest log-det gain)."""
    n = C.shape[0]
    chosen: List[int] = []
    resid = np.diag(C).astype(float).copy()
    # columns of the partial Cholesky factor for the chosen set
    V = np.zeros((n, 0))
    for _ in range(s):
        cand = np.where(np.isin(np.arange(n), chosen), -np.inf, resid)
        j = int(np.argmax(cand))
        chosen.append(j)
        if resid[j] <= 0:
            continue
        v = (C[:, j] - V @ V[j]) / np.sqrt(resid[j])
        V = np.column_stack([V, v])
        resid = resid - v * v
    return chosen


def greedy_interchange(inst: MespInstance) -> Tuple[List[int], float]:
    """Greedy start, then first-improvement 1-swaps until no swap helps."""
    C, s, n = inst.C, inst.s, inst.n
    S = greedy(C, s)
    best = logdet_subset(C, S)
    if s == n:
        return sorted(S), best
    improved = True
    while improved:
        improved = False
        for pos in range(s):
            for j in range(n):
                if j in S:
                    continue
                T = S.copy()
                T[pos] = j
                v = logdet_subset(C, T)
                if v > best + 1e-12 * max(1.0, abs(best)):
                    S, best, improved = T, v, True
                    break
            if improved:
                break
    return sorted(S), best


def load_cov(path) -> Tuple[np.ndarray, List[str]]:
    """Covariance (and labels, when available) from ``.mat`` or ``.csv``."""
    from .covariance import read_cov_csv
    from .matio import read_mat

    path = Path(path)
    if path.suffix.lower() == ".mat":
        d = read_mat(path)
        if "cov" not in d:
            raise DataError(f"{path}: no variable named 'cov'")
        C = np.asarray(d["cov"])
        labels = d.get("labels") or [f"V{i + 1}" for i in range(C.shape[0])]
        return C, list(labels)
    return read_cov_csv(path)
