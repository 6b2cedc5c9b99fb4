"""Turn per-pair measure results into causal networks and score them.

A network over K variables is judged on all K*(K-1) ordered pairs against
the generating system's ground truth: sensitivity (true links found),
specificity (non-links rejected) and the F1 score (harmonic mean of
precision and sensitivity), all in percent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .systems import GroundTruth


class MissingPair(ValueError):
    """Results do not cover every ordered pair of variables."""


@dataclass(frozen=True)
class CausalNetwork:
    """Estimated network: binary adjacency plus per-link strength and p-value."""

    adjacency: np.ndarray
    strength: np.ndarray
    pvalue: np.ndarray | None = None

    @property
    def K(self) -> int:
        return self.adjacency.shape[0]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Scores:
    """Sens/Spec/precision/F1 in percent."""

    sens: float
    spec: float
    precision: float
    f1: float


@dataclass(frozen=True)
class ScoreSummary:
    mean_sens: float
    mean_spec: float
    mean_f1: float
    se_sens: float
    se_spec: float
    se_f1: float
    n: int


def decide_network(
    results: Mapping[tuple[int, int], object],
    alpha: float = 0.05,
    mode: str = "pvalue",
    K: int | None = None,
) -> CausalNetwork:
    """Threshold per-pair results into a binary network.

    mode="pvalue": link iff p_value < alpha (significance-tested measures).
    mode="positive_index": link iff index > 0 (the mixed-embedding measures,
    whose selection scheme already is the test).
    """
    if mode not in ("pvalue", "positive_index"):
        raise ValueError(f"unknown mode {mode!r}")
    if K is None:
        K = 1 + max(max(i, j) for i, j in results.keys())
    adjacency = np.zeros((K, K), dtype=np.int8)
    strength = np.zeros((K, K))
    pvalue = np.full((K, K), np.nan)
    have_p = False
    for i in range(K):
        for j in range(K):
            if i == j:
                continue
            if (i, j) not in results:
                raise MissingPair(f"no result for ordered pair ({i}, {j})")
            res = results[(i, j)]
            strength[i, j] = res.index
            p = getattr(res, "p_value", None)
            if p is not None:
                pvalue[i, j] = p
                have_p = True
            if mode == "pvalue":
                if p is None:
                    raise ValueError(f"pair ({i}, {j}) has no p-value for pvalue mode")
                adjacency[i, j] = 1 if p < alpha else 0
            else:
                adjacency[i, j] = 1 if res.index > 0 else 0
    return CausalNetwork(adjacency, strength, pvalue if have_p else None)


def confusion(est: CausalNetwork, truth: GroundTruth) -> ConfusionCounts:
    """Confusion counts over all ordered off-diagonal pairs."""
    if est.K != truth.K:
        raise ValueError(f"network K={est.K} vs truth K={truth.K}")
    mask = ~np.eye(est.K, dtype=bool)
    e = est.adjacency[mask].astype(bool)
    t = truth.adjacency[mask].astype(bool)
    return ConfusionCounts(
        tp=int(np.sum(e & t)),
        tn=int(np.sum(~e & ~t)),
        fp=int(np.sum(e & ~t)),
        fn=int(np.sum(~e & t)),
    )


def scores(c: ConfusionCounts) -> Scores:
    """Sens/Spec/precision/F1 in percent, with degenerate denominators pinned.

    Conventions: sens = 100 when there are no true links, spec = 100 when
    there are no non-links, precision = 0 when nothing was detected, and
    F1 = 0 whenever precision + sens = 0.
    """
    sens = 100.0 if (c.tp + c.fn) == 0 else 100.0 * c.tp / (c.tp + c.fn)
    spec = 100.0 if (c.tn + c.fp) == 0 else 100.0 * c.tn / (c.tn + c.fp)
    precision = 0.0 if (c.tp + c.fp) == 0 else 100.0 * c.tp / (c.tp + c.fp)
    if precision + sens == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * sens / (precision + sens)
    return Scores(sens=sens, spec=spec, precision=precision, f1=f1)


def aggregate(per_realization_scores: Sequence[Scores]) -> ScoreSummary:
    """Plain means (and standard errors) of per-realization scores.

    F1 is averaged per realization, not recomputed from pooled counts; the
    two orders disagree and published tables follow the former.
    """
    if not per_realization_scores:
        raise ValueError("no scores to aggregate")
    arr = np.array([[s.sens, s.spec, s.f1] for s in per_realization_scores])
    n = arr.shape[0]
    means = arr.mean(axis=0)
    ses = arr.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(3)
    return ScoreSummary(
        mean_sens=float(means[0]),
        mean_spec=float(means[1]),
        mean_f1=float(means[2]),
        se_sens=float(ses[0]),
        se_spec=float(ses[1]),
        se_f1=float(ses[2]),
        n=n,
    )
