"""OLS VAR fitting and the linear causality measures GCI, CGCI, PCGC, RCGCI.

All indices are log ratios of restricted to unrestricted residual variance,
tested with the Fisher-Snedecor statistic on nested models refit over the
same rows. Models always include an intercept; parameter counts passed to
the F test include it, which leaves the numerator degrees of freedom equal
to the number of dropped driver terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .series import LaggedTerm, LagMatrix, MultivariateTimeSeries, build_lag_matrix
from .significance import f_cdf


class DegenerateTest(ValueError):
    """The unrestricted model has zero residual variance; the F test is undefined."""


@dataclass(frozen=True)
class VarModelFit:
    """An OLS fit of a lagged-term model (restricted or unrestricted)."""

    terms: tuple[LaggedTerm, ...]
    coeffs: np.ndarray
    intercept: float
    residuals: np.ndarray
    sse: float
    resid_var: float
    singular: bool = False

    @property
    def n_params(self) -> int:
        return len(self.terms) + 1


@dataclass(frozen=True)
class LinearCausalityResult:
    index: float
    f_stat: float
    p_value: float
    unrestricted_terms: tuple[LaggedTerm, ...]
    restricted_terms: tuple[LaggedTerm, ...]


def fit_ols(lagmat: LagMatrix) -> VarModelFit:
    """Least-squares fit with intercept; rank deficiency is resolved by the
    pseudo-inverse (singular values below 1e-10 of the largest are dropped)
    and flagged on the result."""
    n_eff, d = lagmat.regressors.shape
    if n_eff <= d + 1:
        raise ValueError(f"need n_eff > d + 1, got n_eff={n_eff}, d={d}")
    design = np.column_stack([np.ones(n_eff), lagmat.regressors])
    beta, _, rank, _ = np.linalg.lstsq(design, lagmat.target, rcond=1e-10)
    residuals = lagmat.target - design @ beta
    sse = float(residuals @ residuals)
    return VarModelFit(
        terms=lagmat.terms,
        coeffs=beta[1:],
        intercept=float(beta[0]),
        residuals=residuals,
        sse=sse,
        resid_var=sse / n_eff,
        singular=rank < d + 1,
    )


def fisher_test(sse_r: float, sse_u: float, p_u: int, p_r: int, n_eff: int) -> tuple[float, float]:
    """F statistic and p-value for dropping p_u - p_r coefficients.

    F = ((SSE_R - SSE_U)/(P_U - P_R)) / (SSE_U/(n - P_R)); numerator
    differences that go negative by numerics are clamped to zero.
    """
    if p_u <= p_r:
        raise ValueError(f"need p_u > p_r, got p_u={p_u}, p_r={p_r}")
    if n_eff <= p_r:
        raise ValueError(f"need n_eff > p_r, got n_eff={n_eff}, p_r={p_r}")
    if sse_u <= 0:
        raise DegenerateTest("unrestricted SSE is zero")
    diff = max(sse_r - sse_u, 0.0)
    d1 = p_u - p_r
    d2 = n_eff - p_r
    f_stat = (diff / d1) / (sse_u / d2)
    p_value = 1.0 - f_cdf(f_stat, d1, d2)
    return f_stat, p_value


def _lag_terms(vars: Sequence[int], P: int) -> list[LaggedTerm]:
    return [LaggedTerm(v, lag) for v in sorted(vars) for lag in range(1, P + 1)]


def _nested_test(
    series: MultivariateTimeSeries,
    response: int,
    terms_u: Sequence[LaggedTerm],
    terms_r: Sequence[LaggedTerm],
    max_lag: int,
) -> LinearCausalityResult:
    fit_u = fit_ols(build_lag_matrix(series, response, terms_u, max_lag=max_lag))
    fit_r = fit_ols(build_lag_matrix(series, response, terms_r, max_lag=max_lag))
    index = max(0.0, math.log(fit_r.resid_var / fit_u.resid_var))
    f_stat, p_value = fisher_test(
        fit_r.sse, fit_u.sse, fit_u.n_params, fit_r.n_params, fit_u.residuals.shape[0]
    )
    return LinearCausalityResult(
        index=index,
        f_stat=f_stat,
        p_value=p_value,
        unrestricted_terms=tuple(terms_u),
        restricted_terms=tuple(terms_r),
    )


def gci(series: MultivariateTimeSeries, x: int, y: int, P: int) -> LinearCausalityResult:
    """Bivariate Granger causality index of X -> Y with VAR order P."""
    if x == y:
        raise ValueError("driver and response must differ")
    terms_u = _lag_terms([x, y], P)
    terms_r = _lag_terms([y], P)
    return _nested_test(series, y, terms_u, terms_r, max_lag=P)


def cgci(series: MultivariateTimeSeries, x: int, y: int, P: int) -> LinearCausalityResult:
    """Conditional GCI: X -> Y given the past of all remaining variables."""
    if x == y:
        raise ValueError("driver and response must differ")
    terms_u = _lag_terms(range(series.K), P)
    terms_r = _lag_terms([v for v in range(series.K) if v != x], P)
    return _nested_test(series, y, terms_u, terms_r, max_lag=P)


def pcgc_select(
    series: MultivariateTimeSeries,
    x: int,
    Ks: int,
    P: int,
    exclude: Sequence[int] = (),
) -> list[int]:
    """Greedy forward selection of the Ks variables most informative for driver x.

    At each step the variable whose lags 1..P most reduce the residual
    variance of the driver's current value is added (under joint Gaussianity
    this is the mutual-information gain). Deterministic; ties break toward
    the lowest variable index.
    """
    pool = [v for v in range(series.K) if v != x and v not in set(exclude)]
    if not 0 <= Ks <= len(pool):
        raise ValueError(f"need 0 <= Ks <= {len(pool)}, got {Ks}")
    selected: list[int] = []
    for _ in range(Ks):
        best_var, best_sse = None, np.inf
        for v in pool:
            if v in selected:
                continue
            fit = fit_ols(build_lag_matrix(series, x, _lag_terms(selected + [v], P), max_lag=P))
            if fit.sse < best_sse:
                best_var, best_sse = v, fit.sse
        selected.append(best_var)
    return selected


def pcgc(series: MultivariateTimeSeries, x: int, y: int, Ks: int, P: int) -> LinearCausalityResult:
    """Partially conditioned GCI: condition only on the Ks selected confounders.

    The response is excluded from the selection pool, so Ks = K - 2 selects
    every confounder and reproduces cgci exactly.
    """
    if x == y:
        raise ValueError("driver and response must differ")
    conditioning = pcgc_select(series, x, Ks, P, exclude=(y,))
    terms_u = _lag_terms(sorted(conditioning + [x, y]), P)
    terms_r = _lag_terms(sorted(conditioning + [y]), P)
    return _nested_test(series, y, terms_u, terms_r, max_lag=P)


# Per-parameter information penalty for the backward-in-time term selection.
# The Akaike value (2.0) keeps the subsequent Fisher test at level alpha as
# the binding filter; a ln(n) penalty makes the combined decision far more
# conservative than alpha.
AIC_PENALTY = 2.0


def rcgci_terms(series: MultivariateTimeSeries, response: int, P: int) -> list[LaggedTerm]:
    """Backward-in-time selection of informative lagged terms for one response.

    Lag depths are visited in order 1..P. Within a depth, the term (one per
    still-active variable) that most improves the information criterion is
    added greedily while the criterion keeps improving; a variable whose
    depth-j term is not kept stops expanding at deeper lags.
    """
    n_eff = series.n - P
    if n_eff <= P + 2:
        raise ValueError("series too short for the requested order")

    def criterion(terms: list[LaggedTerm]) -> float:
        fit = fit_ols(build_lag_matrix(series, response, terms, max_lag=P))
        return n_eff * math.log(max(fit.sse, 1e-300) / n_eff) + AIC_PENALTY * (len(terms) + 1)

    selected: list[LaggedTerm] = []
    current = criterion(selected)
    active = list(range(series.K))
    for depth in range(1, P + 1):
        kept: list[int] = []
        remaining = list(active)
        while remaining:
            best_var, best_ic = None, np.inf
            for v in remaining:
                ic = criterion(selected + [LaggedTerm(v, depth)])
                if ic < best_ic:
                    best_var, best_ic = v, ic
            if best_ic < current:
                selected.append(LaggedTerm(best_var, depth))
                current = best_ic
                kept.append(best_var)
                remaining.remove(best_var)
            else:
                break
        active = sorted(kept)
        if not active:
            break
    return selected


def rcgci_from_terms(
    series: MultivariateTimeSeries,
    x: int,
    y: int,
    P: int,
    terms: Sequence[LaggedTerm],
) -> LinearCausalityResult:
    """RCGCI of X -> Y given an already-selected term set for response y."""
    terms = sorted(terms)
    terms_r = [t for t in terms if t.var != x]
    if len(terms_r) == len(terms):
        # no driver term survived selection: non-causal by construction
        return LinearCausalityResult(
            index=0.0,
            f_stat=0.0,
            p_value=1.0,
            unrestricted_terms=tuple(terms),
            restricted_terms=tuple(terms),
        )
    return _nested_test(series, y, terms, terms_r, max_lag=P)


def rcgci(series: MultivariateTimeSeries, x: int, y: int, P: int) -> LinearCausalityResult:
    """Restricted CGCI: CGCI on the reduced model found by rcgci_terms."""
    if x == y:
        raise ValueError("driver and response must differ")
    return rcgci_from_terms(series, x, y, P, rcgci_terms(series, y, P))
