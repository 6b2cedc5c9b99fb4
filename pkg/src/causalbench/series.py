"""Multivariate time-series container, standardization and lag-matrix construction.

Every causality measure in this package consumes a :class:`MultivariateTimeSeries`
(K aligned scalar series of length n) and works on design matrices assembled from
:class:`LaggedTerm` lists. The convention throughout: the regression target is the
value at time t and every regressor lag is >= 1 relative to it, so linear VAR
models and embedding vectors for the information measures share one builder.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ConstantColumn(ValueError):
    """A column has zero sample standard deviation and cannot be standardized."""


class SeriesTooShort(ValueError):
    """The series has too few samples for the requested lags."""


@dataclass(frozen=True)
class MultivariateTimeSeries:
    """n x K matrix of aligned stationary scalar series, one column per variable."""

    values: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D (n, K) array")
        n, k = values.shape
        if n < 1 or k < 2:
            raise ValueError(f"need n >= 1 and K >= 2, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        labels = tuple(self.labels) if self.labels else tuple(f"X{i + 1}" for i in range(k))
        if len(labels) != k:
            raise ValueError(f"{len(labels)} labels for {k} columns")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def with_column(self, i: int, column: np.ndarray) -> "MultivariateTimeSeries":
        """Copy of the series with column i replaced (used by surrogate tests)."""
        values = self.values.copy()
        values[:, i] = column
        return MultivariateTimeSeries(values, self.labels)


@dataclass(frozen=True, order=True)
class LaggedTerm:
    """One (variable, lag) regressor; lag >= 1, strictly past terms only."""

    var: int
    lag: int

    def __post_init__(self):
        if self.var < 0:
            raise ValueError(f"var must be >= 0, got {self.var}")
        if self.lag < 1:
            raise ValueError(f"lag must be >= 1, got {self.lag}")


@dataclass(frozen=True)
class LagMatrix:
    """Aligned response/regressor matrices for a list of lagged terms.

    Row t of ``regressors`` holds the terms' values for predicting
    ``target[t]``, which sits at original time index ``t + max_lag``.
    """

    target: np.ndarray
    regressors: np.ndarray
    terms: tuple[LaggedTerm, ...]
    max_lag: int = field(default=0)

    @property
    def n_eff(self) -> int:
        return self.target.shape[0]

    @property
    def d(self) -> int:
        return self.regressors.shape[1]


def standardize(series: MultivariateTimeSeries) -> MultivariateTimeSeries:
    """Rescale each column to sample mean 0 and sample standard deviation 1.

    Raises ConstantColumn if any column is constant. Idempotent up to
    rounding; required before any kNN-based measure so that max-norm
    distances are scale free.
    """
    values = series.values
    if values.shape[0] < 2:
        raise ConstantColumn("cannot standardize a length-1 series")
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1)
    bad = np.flatnonzero(sd == 0.0)
    if bad.size:
        raise ConstantColumn(f"constant column(s): {[series.labels[i] for i in bad]}")
    return MultivariateTimeSeries((values - mean) / sd, series.labels)


def build_lag_matrix(
    series: MultivariateTimeSeries,
    response: int,
    terms: Sequence[LaggedTerm],
    max_lag: int | None = None,
) -> LagMatrix:
    """Assemble the design matrix for regressing `response` on `terms`.

    `max_lag` can be forced above the largest lag in `terms` so that nested
    models are fitted on identical rows; by default it is that largest lag
    (0 for an intercept-only model).
    """
    terms = tuple(terms)
    lag_needed = max((t.lag for t in terms), default=0)
    if max_lag is None:
        max_lag = lag_needed
    elif max_lag < lag_needed:
        raise ValueError(f"max_lag={max_lag} below largest term lag {lag_needed}")
    n = series.n
    if n <= max_lag:
        raise SeriesTooShort(f"n={n} too short for max lag {max_lag}")
    for t in terms:
        if t.var >= series.K:
            raise ValueError(f"term variable {t.var} out of range for K={series.K}")
    n_eff = n - max_lag
    target = series.values[max_lag:, response]
    regressors = np.empty((n_eff, len(terms)))
    for j, t in enumerate(terms):
        regressors[:, j] = series.values[max_lag - t.lag : n - t.lag, t.var]
    target = target.copy()
    target.setflags(write=False)
    regressors.setflags(write=False)
    return LagMatrix(target=target, regressors=regressors, terms=terms, max_lag=max_lag)


def uniform_embedding(K: int, vars: Iterable[int], m: int, tau: int = 1) -> list[LaggedTerm]:
    """Uniform delay embedding: lags 1, 1+tau, ..., 1+(m-1)*tau per variable."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    terms = []
    for v in vars:
        if not 0 <= v < K:
            raise ValueError(f"variable {v} out of range for K={K}")
        terms.extend(LaggedTerm(v, 1 + i * tau) for i in range(m))
    return terms


def save_csv(series: MultivariateTimeSeries, path) -> None:
    """Write the series as CSV: header row of labels, one row per time index."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(series.labels)
        for row in series.values:
            writer.writerow([format(v, ".17g") for v in row])


def load_csv(path) -> MultivariateTimeSeries:
    """Read a series written by :func:`save_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        labels = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return MultivariateTimeSeries(np.asarray(rows, dtype=np.float64), tuple(labels))
