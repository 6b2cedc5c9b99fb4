"""Time-shifted surrogates, rank-based p-values and the F-distribution tail.

The nonlinear measures have no known null distribution, so significance is
assessed against an ensemble of cyclically time-shifted copies of the driver
series: the shift preserves the driver's dynamics and marginal distribution
while destroying its coupling to the response. The test is one-sided (large
measure values reject).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import betainc

from .series import MultivariateTimeSeries


def time_shift_surrogate(x: np.ndarray, d: int) -> np.ndarray:
    """Cyclic rotation: the first d observations move to the end."""
    x = np.asarray(x)
    n = x.shape[0]
    if not 1 <= d <= n - 1:
        raise ValueError(f"need 1 <= d <= n-1, got d={d}, n={n}")
    return np.concatenate([x[d:], x[:d]])


def surrogate_pvalue(original_value: float, surrogate_values) -> float:
    """One-sided p-value from the rank of the original among the surrogates.

    r0 is the ascending rank of the original in the pooled list of M+1
    values; ties count against the original (it keeps the lowest rank among
    equals, so a measure that cannot beat its surrogates is never
    significant). p = 1 - (r0 - 0.326) / (M + 1 + 0.348), clipped to [0, 1].
    """
    surrogate_values = np.asarray(surrogate_values, dtype=np.float64)
    m = surrogate_values.shape[0]
    if m < 1:
        raise ValueError("need at least one surrogate value")
    r0 = 1 + int(np.sum(surrogate_values < original_value))
    p = 1.0 - (r0 - 0.326) / (m + 1 + 0.348)
    return float(min(max(p, 0.0), 1.0))


@dataclass(frozen=True)
class SurrogateEnsemble:
    """The M cyclic shifts used by one surrogate test."""

    shifts: np.ndarray
    column: np.ndarray
    rng_seed: int

    def replica(self, r: int) -> np.ndarray:
        return time_shift_surrogate(self.column, int(self.shifts[r]))


def draw_shift_ensemble(column: np.ndarray, M: int, seed: int) -> SurrogateEnsemble:
    """Draw M shifts uniformly from [n/20, 19n/20], away from the identity."""
    n = np.asarray(column).shape[0]
    lo = max(1, n // 20)
    hi = min(n - 1, (19 * n) // 20)
    rng = np.random.default_rng(seed)
    shifts = rng.integers(lo, hi + 1, size=M)
    return SurrogateEnsemble(shifts=shifts, column=np.asarray(column), rng_seed=seed)


def surrogate_test(
    series: MultivariateTimeSeries,
    measure: Callable[[MultivariateTimeSeries, int, int], float],
    x: int,
    y: int,
    M: int = 100,
    seed: int = 0,
) -> float:
    """p-value of measure(series, x, y) against M time-shifted driver replicas."""
    if M < 20:
        raise ValueError(f"need M >= 20 surrogates, got {M}")
    original = measure(series, x, y)
    ensemble = draw_shift_ensemble(series.column(x), M, seed)
    values = np.empty(M)
    for r in range(M):
        values[r] = measure(series.with_column(x, ensemble.replica(r)), x, y)
    return surrogate_pvalue(original, values)


def f_cdf(x: float, d1: int, d2: int) -> float:
    """CDF of the Fisher-Snedecor F(d1, d2) distribution."""
    if d1 < 1 or d2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    x = float(x)
    if x <= 0:
        return 0.0
    return float(betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2)))
