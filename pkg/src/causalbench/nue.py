"""Nonlinear causality measures: TE, PTE and the mixed-embedding MIME/PMIME.

Transfer entropy is the conditional mutual information between the response's
next value and the driver's past state given the response's own past state;
PTE additionally conditions on the past of every other observed variable.
MIME/PMIME replace the uniform past state with a greedy non-uniform embedding:
lagged terms are added while they contribute significant conditional
information about the response's future, and the causality index is the
normalized information carried by the driver's selected terms.

All measures standardize the input once (idempotent) so that max-norm
neighbor distances are scale free.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtri

from .knninfo import CmiWorkspace, ksg_cmi, ksg_mi
from .series import (
    LaggedTerm,
    MultivariateTimeSeries,
    build_lag_matrix,
    standardize,
    uniform_embedding,
)
from .significance import draw_shift_ensemble, surrogate_pvalue

# index values smaller than this count as "no driver information"
_INDEX_FLOOR = 1e-12


@dataclass(frozen=True)
class SelectionStep:
    """One step of the embedding scheme, kept or terminating."""

    term: LaggedTerm
    cmi: float
    threshold: float
    n_candidates: int
    n_replicas: int
    passed: bool


@dataclass(frozen=True)
class MixedEmbedding:
    """Greedily selected lagged terms plus the audit trail of the selection."""

    terms: tuple[LaggedTerm, ...]
    selection_trace: tuple[SelectionStep, ...]

    def driver_terms(self, var: int) -> tuple[LaggedTerm, ...]:
        return tuple(t for t in self.terms if t.var == var)


@dataclass(frozen=True)
class NonlinearCausalityResult:
    index: float
    p_value: float | None = None
    embedding: MixedEmbedding | None = None
    clamped: bool = False
    raw_index: float | None = None


def _lag_block(column: np.ndarray, lags: Sequence[int], max_lag: int) -> np.ndarray:
    n = column.shape[0]
    out = np.empty((n - max_lag, len(lags)))
    for j, lag in enumerate(lags):
        out[:, j] = column[max_lag - lag : n - lag]
    return out


def mixed_embedding(
    series: MultivariateTimeSeries,
    response: int,
    candidate_vars: Iterable[int],
    L_max: int = 5,
    k: int = 10,
    M_term: int = 100,
    alpha: float = 0.05,
    seed: int = 0,
) -> MixedEmbedding:
    """Greedy non-uniform embedding of the response's future.

    Step 1 picks the candidate lag with maximal mutual information with the
    response's next value; each later step picks the maximal conditional
    mutual information given the terms already selected. The chosen candidate
    is kept only if its (C)MI clears a permutation null: it must exceed both
    the empirical (1-alpha) quantile of M_term shuffled-candidate replicas
    and a normal-approximation quantile at level (1-alpha)^(1/C) for C live
    candidates, which keeps the family-wise error of the argmax selection at
    alpha per step. The scheme stops at the first candidate that fails.
    """
    std = standardize(series)
    vars_sorted = sorted(set(candidate_vars))
    terms = uniform_embedding(std.K, vars_sorted, m=L_max, tau=1)
    lagmat = build_lag_matrix(std, response, terms, max_lag=L_max)
    target = lagmat.target
    n_eff = target.shape[0]
    fail_cap = int(np.floor(alpha * M_term))  # empirical quantile is beaten by <= this many

    selected: list[int] = []
    remaining = list(range(len(terms)))
    trace: list[SelectionStep] = []
    step = 0
    while remaining:
        cond = lagmat.regressors[:, selected] if selected else None
        ws = CmiWorkspace(target, cond, k)
        cmis = np.array([ws.cmi(lagmat.regressors[:, j]) for j in remaining])
        best_pos = int(np.argmax(cmis))  # ties: first index = lowest (var, lag)
        best_j = remaining[best_pos]
        best_cmi = float(cmis[best_pos])

        rng = np.random.default_rng([seed, step])
        column = lagmat.regressors[:, best_j]
        replicas = np.empty(M_term)
        exceed = 0
        evaluated = 0
        for r in range(M_term):
            replicas[r] = ws.cmi(column[rng.permutation(n_eff)])
            evaluated += 1
            if replicas[r] >= best_cmi:
                exceed += 1
                if exceed > fail_cap:
                    break  # cannot clear the empirical quantile any more
        if exceed > fail_cap:
            trace.append(
                SelectionStep(terms[best_j], best_cmi, np.nan, len(remaining), evaluated, False)
            )
            break
        done = replicas[:evaluated]
        thr_empirical = float(np.quantile(done, 1.0 - alpha, method="higher"))
        level = (1.0 - alpha) ** (1.0 / len(remaining))
        thr_family = float(done.mean() + done.std(ddof=1) * ndtri(level))
        threshold = max(thr_empirical, thr_family)
        passed = best_cmi > threshold
        trace.append(
            SelectionStep(terms[best_j], best_cmi, threshold, len(remaining), evaluated, passed)
        )
        if not passed:
            break
        selected.append(best_j)
        remaining.remove(best_j)
        step += 1
    return MixedEmbedding(
        terms=tuple(terms[j] for j in selected), selection_trace=tuple(trace)
    )


def _nue_index(
    series: MultivariateTimeSeries,
    response: int,
    embedding: MixedEmbedding,
    driver: int,
    L_max: int,
    k: int,
) -> tuple[float, bool, float]:
    """Normalized driver information R = I(y+; w_X | w \\ w_X) / I(y+; w) in [0, 1]."""
    driver_terms = embedding.driver_terms(driver)
    if not driver_terms:
        return 0.0, False, 0.0
    std = standardize(series)
    lagmat = build_lag_matrix(std, response, embedding.terms, max_lag=L_max)
    target = lagmat.target
    is_driver = np.array([t.var == driver for t in lagmat.terms])
    w_driver = lagmat.regressors[:, is_driver]
    w_rest = lagmat.regressors[:, ~is_driver] if (~is_driver).any() else None
    numerator = ksg_cmi(w_driver, target, w_rest, k)
    denominator = ksg_mi(lagmat.regressors, target, k)
    if denominator <= 0.0:
        # total information collapsed by estimator noise; treated as no evidence
        return 0.0, True, 0.0
    raw = numerator / denominator
    clamped = raw <= 0.0 or raw > 1.0
    index = min(max(raw, _INDEX_FLOOR), 1.0)
    return index, clamped, raw


def _response_seed(seed: int, response: int) -> int:
    # one embedding per response; standalone pair calls and network sweeps
    # must agree on the stream
    return int(np.random.SeedSequence([seed, response]).generate_state(1)[0])


def mime(
    series: MultivariateTimeSeries,
    x: int,
    y: int,
    L_max: int = 5,
    k: int = 10,
    M_term: int = 100,
    alpha: float = 0.05,
    seed: int = 0,
) -> NonlinearCausalityResult:
    """Mutual information on mixed embedding: candidates are lags of {x, y} only."""
    if x == y:
        raise ValueError("driver and response must differ")
    emb = mixed_embedding(series, y, [x, y], L_max, k, M_term, alpha, _response_seed(seed, y))
    index, clamped, raw = _nue_index(series, y, emb, x, L_max, k)
    return NonlinearCausalityResult(index=index, embedding=emb, clamped=clamped, raw_index=raw)


def pmime(
    series: MultivariateTimeSeries,
    x: int,
    y: int,
    L_max: int = 5,
    k: int = 10,
    M_term: int = 100,
    alpha: float = 0.05,
    seed: int = 0,
) -> NonlinearCausalityResult:
    """Partial MIME: candidates span all K variables, so only direct drivers enter."""
    if x == y:
        raise ValueError("driver and response must differ")
    emb = mixed_embedding(
        series, y, range(series.K), L_max, k, M_term, alpha, _response_seed(seed, y)
    )
    index, clamped, raw = _nue_index(series, y, emb, x, L_max, k)
    return NonlinearCausalityResult(index=index, embedding=emb, clamped=clamped, raw_index=raw)


def pmime_network(
    series: MultivariateTimeSeries,
    L_max: int = 5,
    k: int = 10,
    M_term: int = 100,
    alpha: float = 0.05,
    seed: int = 0,
) -> dict[tuple[int, int], NonlinearCausalityResult]:
    """PMIME for all ordered pairs, computing one embedding per response."""
    results: dict[tuple[int, int], NonlinearCausalityResult] = {}
    for y in range(series.K):
        emb = mixed_embedding(
            series, y, range(series.K), L_max, k, M_term, alpha, _response_seed(seed, y)
        )
        for x in range(series.K):
            if x == y:
                continue
            index, clamped, raw = _nue_index(series, y, emb, x, L_max, k)
            results[(x, y)] = NonlinearCausalityResult(
                index=index, embedding=emb, clamped=clamped, raw_index=raw
            )
    return results


def _uniform_blocks(
    series: MultivariateTimeSeries, x: int, cond_vars: Sequence[int], m: int, tau: int
):
    std = standardize(series)
    max_lag = 1 + (m - 1) * tau
    lags = [1 + i * tau for i in range(m)]
    x_block = _lag_block(std.column(x), lags, max_lag)
    cond = np.hstack([_lag_block(std.column(v), lags, max_lag) for v in cond_vars])
    return std, x_block, cond, lags, max_lag


def _te_like(
    series: MultivariateTimeSeries,
    x: int,
    y: int,
    cond_vars: Sequence[int],
    m: int,
    tau: int,
    k: int,
    surrogates: int,
    seed: int,
) -> NonlinearCausalityResult:
    std, x_block, cond, lags, max_lag = _uniform_blocks(series, x, cond_vars, m, tau)
    target = std.values[max_lag:, y]
    ws = CmiWorkspace(target, cond, k)
    raw = ws.cmi(x_block)
    p_value = None
    if surrogates:
        ensemble = draw_shift_ensemble(std.column(x), surrogates, seed)
        values = np.empty(surrogates)
        for r in range(surrogates):
            values[r] = ws.cmi(_lag_block(ensemble.replica(r), lags, max_lag))
        p_value = surrogate_pvalue(raw, values)
    return NonlinearCausalityResult(index=max(raw, 0.0), p_value=p_value, raw_index=raw)


def te(
    series: MultivariateTimeSeries,
    x: int,
    y: int,
    m: int,
    tau: int = 1,
    k: int = 10,
    surrogates: int = 100,
    seed: int = 0,
) -> NonlinearCausalityResult:
    """Transfer entropy X -> Y with uniform lag blocks and a time-shift surrogate test.

    The p-value ranks the raw estimate among the surrogate values; the
    reported index is clamped at zero.
    """
    if x == y:
        raise ValueError("driver and response must differ")
    return _te_like(series, x, y, [y], m, tau, k, surrogates, seed)


def pte(
    series: MultivariateTimeSeries,
    x: int,
    y: int,
    m: int,
    tau: int = 1,
    k: int = 10,
    surrogates: int = 100,
    seed: int = 0,
) -> NonlinearCausalityResult:
    """Partial transfer entropy: TE conditioned on all remaining variables' pasts."""
    if x == y:
        raise ValueError("driver and response must differ")
    if series.K < 3:
        raise ValueError("PTE needs at least 3 variables")
    cond_vars = [y] + [v for v in range(series.K) if v != x and v != y]
    return _te_like(series, x, y, cond_vars, m, tau, k, surrogates, seed)


def te_index(series, x, y, m, tau=1, k=10) -> float:
    """Raw TE estimate without a significance test (can be slightly negative)."""
    res = te(series, x, y, m, tau, k, surrogates=0)
    return float(res.raw_index)


def pte_index(series, x, y, m, tau=1, k=10) -> float:
    """Raw PTE estimate without a significance test."""
    res = pte(series, x, y, m, tau, k, surrogates=0)
    return float(res.raw_index)
