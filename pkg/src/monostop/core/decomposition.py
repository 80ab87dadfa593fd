"""Pathwise Doob bookkeeping: compensators and myopic times."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

INFINITE = math.inf


def myopic_time(y_values: Sequence[float], horizon: int | None = None) -> float:
    """First 1-based index k with y_values[k] <= 0.

    With a horizon L the result is min(tau*, L).  Without one, a sequence with
    no crossing returns ``INFINITE``.
    """
    y = np.asarray(y_values, dtype=float)
    if y.size == 0:
        raise ValueError("myopic_time needs at least one increment")
    if horizon is not None and horizon < 1:
        raise ValueError("horizon must be >= 1")
    hits = np.flatnonzero(y <= 0.0)
    tau = int(hits[0]) + 1 if hits.size else INFINITE
    if horizon is not None:
        return min(tau, int(horizon))
    return tau


def compensator(y_values: Sequence[float]) -> np.ndarray:
    """A_1 = 0 and A_n = Y_1 + ... + Y_{n-1}; length is len(y_values) + 1."""
    y = np.asarray(y_values, dtype=float)
    return np.concatenate(([0.0], np.cumsum(y)))


def multiplicative_compensator(ratios: Sequence[float]) -> np.ndarray:
    """A_1 = 1 and A_n = R_1 * ... * R_{n-1} for one-step ratios R_k = E(X_{k+1}/X_k | A_k)."""
    r = np.asarray(ratios, dtype=float)
    return np.concatenate(([1.0], np.cumprod(r)))


def first_violation(y_values: Sequence[float]) -> int | None:
    """1-based index j where Y_j > 0 although some earlier Y_k <= 0, or None."""
    y = np.asarray(y_values, dtype=float)
    seen = np.maximum.accumulate(y <= 0.0)
    bad = np.flatnonzero((y > 0.0) & np.concatenate(([False], seen[:-1])))
    return int(bad[0]) + 1 if bad.size else None
