"""Pearson's r, Spearman's rho and Kendall's tau-b.

An undefined coefficient (a constant input vector) is returned as ``None``
so callers decide how to render or exclude it.
"""

from __future__ import annotations

import enum
from typing import Optional, Sequence

import numpy as np


class CorrelationKind(str, enum.Enum):
    PEARSON_R = "PEARSON_R"
    SPEARMAN_RHO = "SPEARMAN_RHO"
    KENDALL_TAU = "KENDALL_TAU"

    @property
    def symbol(self) -> str:
        return {"PEARSON_R": "r", "SPEARMAN_RHO": "rho", "KENDALL_TAU": "tau"}[self.value]

    @classmethod
    def parse(cls, text: str) -> "CorrelationKind":
        key = text.strip().upper()
        for kind in cls:
            if key in (kind.value, kind.symbol.upper(), kind.value.split("_")[0]):
                return kind
        raise ValueError(f"unknown correlation kind {text!r}")


def rank_transform(x: Sequence[float]) -> np.ndarray:
    """Mid-ranks (1-based); tied values share the mean of the ranks they span."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(n, dtype=float)
    sorted_x = x[order]
    i = 0
    while i < n:
        j = i + 1
        while j < n and sorted_x[j] == sorted_x[i]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0
        i = j
    return ranks


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    r = float(dx @ dy) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def spearman(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    return pearson(rank_transform(x), rank_transform(y))


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Tau-b: (C - D) / sqrt((n0 - Tx)(n0 - Ty)); equals tau-a without ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    iu = np.triu_indices(n, 1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    n0 = n * (n - 1) // 2
    tx = int(np.count_nonzero(sx == 0))
    ty = int(np.count_nonzero(sy == 0))
    denom = (n0 - tx) * (n0 - ty)
    if denom == 0:
        return None
    s = int(np.sum(sx * sy))
    tau = s / np.sqrt(denom)
    return float(min(1.0, max(-1.0, tau)))


_FUNCS = {
    CorrelationKind.PEARSON_R: pearson,
    CorrelationKind.SPEARMAN_RHO: spearman,
    CorrelationKind.KENDALL_TAU: kendall_tau_b,
}


def correlate(kind: CorrelationKind, x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValueError("correlation needs at least two observations")
    return _FUNCS[CorrelationKind(kind)](x, y)
