"""Benchmark system generators, ground-truth networks and observational noise.

Six coupled systems: S1 linear VAR(4) in 5 variables, S2 linear/nonlinear
stochastic VAR in 5, S3 a ring of coupled Henon maps in K variables with
coupling strength c, S4 = S2 with one variable hidden, S5 coupled Henon-like
maps with a common driver, S6 a nonlinear VAR(3) in 20 variables. Noise is
observational only (added after generation, never fed back).

Every generator is a pure function of (parameters, seed): reruns are
bit-identical. Maps start uniform on [0, 0.1], stochastic systems start from
their noise, and the first 1000 samples are discarded everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .series import MultivariateTimeSeries

BURN_IN = 1000
DIVERGENCE_LIMIT = 1e5
MAX_RESTARTS = 10

SYSTEM_IDS = ("S1", "S2", "S3", "S4", "S5", "S6")
NOISE_KINDS = ("gaussian", "tstudent2", "garch11")

# largest lag appearing in each system's equations; the benchmark uses it
# as the VAR order P and the embedding dimension m
SYSTEM_MAX_LAG = {"S1": 4, "S2": 3, "S3": 2, "S4": 3, "S5": 2, "S6": 3}


class DivergenceAfterRetries(RuntimeError):
    """A chaotic map left its basin of attraction for every restart attempt."""


@dataclass(frozen=True)
class NoiseSpec:
    """Observational noise: kind and amplitude as a fraction of the data sd."""

    kind: str
    level: float

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not self.level > 0:
            raise ValueError(f"noise level must be > 0, got {self.level}")


@dataclass(frozen=True)
class SystemSpec:
    """Full description of one simulated system."""

    id: str
    K: int = 0
    c: float | None = None
    s: float = 0.1
    noise: NoiseSpec | None = None

    def __post_init__(self):
        if self.id not in SYSTEM_IDS:
            raise ValueError(f"system id must be one of {SYSTEM_IDS}, got {self.id!r}")
        fixed_k = {"S1": 5, "S2": 5, "S4": 4, "S5": 5, "S6": 20}
        if self.id in fixed_k:
            k = fixed_k[self.id]
            if self.K not in (0, k):
                raise ValueError(f"{self.id} fixes K={k}")
            object.__setattr__(self, "K", k)
        else:  # S3
            if self.K < 3:
                raise ValueError("S3 requires K >= 3")
            if self.c is None or not 0.0 <= self.c <= 1.0:
                raise ValueError("S3 requires coupling strength c in [0, 1]")

    @property
    def max_lag(self) -> int:
        return SYSTEM_MAX_LAG[self.id]


@dataclass(frozen=True)
class GroundTruth:
    """K x K binary adjacency; entry (i, j) = 1 iff X_i directly drives X_j."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.int8)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if np.any(np.diag(adj) != 0):
            raise ValueError("adjacency diagonal must be zero")
        adj = adj.copy()
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def K(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_links(self) -> int:
        return int(self.adjacency.sum())

    def links(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adjacency))]


def _truth_from_links(K: int, links: Iterable[tuple[int, int]]) -> GroundTruth:
    adj = np.zeros((K, K), dtype=np.int8)
    for i, j in links:
        adj[i, j] = 1
    return GroundTruth(adj)


def transient_discard(raw: np.ndarray, burn: int = BURN_IN) -> np.ndarray:
    """Drop the first `burn` samples of a raw simulation."""
    raw = np.asarray(raw)
    if burn < 0 or burn >= raw.shape[0]:
        raise ValueError(f"burn={burn} out of range for {raw.shape[0]} samples")
    return raw[burn:]


def gen_s1(n: int, seed: int) -> tuple[MultivariateTimeSeries, GroundTruth]:
    """Linear VAR(4) in five variables with seven unidirectional couplings."""
    rng = np.random.default_rng(seed)
    N = n + BURN_IN
    e = rng.standard_normal((N, 5))
    x = np.zeros((N, 5))
    x[:4] = e[:4]
    for t in range(4, N):
        x[t, 0] = 0.4 * x[t - 1, 0] - 0.5 * x[t - 2, 0] + 0.4 * x[t - 1, 4] + e[t, 0]
        x[t, 1] = 0.4 * x[t - 1, 1] - 0.3 * x[t - 4, 0] + 0.4 * x[t - 2, 4] + e[t, 1]
        x[t, 2] = 0.5 * x[t - 1, 2] - 0.7 * x[t - 2, 2] - 0.3 * x[t - 3, 4] + e[t, 2]
        x[t, 3] = 0.8 * x[t - 3, 3] + 0.4 * x[t - 2, 0] + 0.3 * x[t - 3, 1] + e[t, 3]
        x[t, 4] = 0.7 * x[t - 1, 4] - 0.5 * x[t - 2, 4] - 0.4 * x[t - 1, 3] + e[t, 4]
    truth = _truth_from_links(5, [(0, 1), (0, 3), (1, 3), (3, 4), (4, 0), (4, 1), (4, 2)])
    return MultivariateTimeSeries(transient_discard(x)), truth


def gen_s2(n: int, seed: int) -> tuple[MultivariateTimeSeries, GroundTruth]:
    """Stochastic VAR with linear (X1->X3, X4<->X5) and quadratic (X1->X2, X1->X4) couplings."""
    rng = np.random.default_rng(seed)
    N = n + BURN_IN
    e = rng.standard_normal((N, 5))
    x = np.zeros((N, 5))
    x[:3] = e[:3]
    r2 = math.sqrt(2.0)
    for t in range(3, N):
        x[t, 0] = 0.95 * r2 * x[t - 1, 0] - 0.9025 * x[t - 2, 0] + e[t, 0]
        x[t, 1] = 0.5 * x[t - 2, 0] ** 2 + e[t, 1]
        x[t, 2] = -0.4 * x[t - 3, 0] + e[t, 2]
        x[t, 3] = (
            -0.5 * x[t - 2, 0] ** 2
            + 0.25 * r2 * x[t - 1, 3]
            + 0.25 * r2 * x[t - 1, 4]
            + e[t, 3]
        )
        x[t, 4] = -0.25 * r2 * x[t - 1, 3] + 0.25 * r2 * x[t - 1, 4] + e[t, 4]
    truth = _truth_from_links(5, [(0, 1), (0, 2), (0, 3), (3, 4), (4, 3)])
    return MultivariateTimeSeries(transient_discard(x)), truth


def _iterate_map(step, K: int, n: int, seed: int, labels=None):
    # Shared restart logic for the chaotic maps: redraw initial conditions
    # with a derived seed whenever the trajectory leaves the basin.
    for attempt in range(MAX_RESTARTS):
        rng = np.random.default_rng([seed, attempt])
        N = n + BURN_IN
        x = np.empty((N, K))
        x[:2] = rng.uniform(0.0, 0.1, size=(2, K))
        diverged = False
        for t in range(2, N):
            step(x, t)
            if np.abs(x[t]).max() > DIVERGENCE_LIMIT:
                diverged = True
                break
        if not diverged:
            return MultivariateTimeSeries(transient_discard(x), labels or ())
    raise DivergenceAfterRetries(f"map diverged in all {MAX_RESTARTS} restarts (seed {seed})")


def gen_henon(K: int, c: float, n: int, seed: int) -> tuple[MultivariateTimeSeries, GroundTruth]:
    """Ring of coupled Henon maps; interior maps are driven by both neighbors."""
    if K < 3:
        raise ValueError("need K >= 3")
    if not 0.0 <= c <= 0.6:
        raise ValueError(f"coupling strength must be in [0, 0.6], got {c}")

    def step(x, t):
        p, p2 = x[t - 1], x[t - 2]
        x[t, 0] = 1.4 - p[0] ** 2 + 0.3 * p2[0]
        x[t, K - 1] = 1.4 - p[K - 1] ** 2 + 0.3 * p2[K - 1]
        drive = 0.5 * c * (p[:-2] + p[2:]) + (1.0 - c) * p[1:-1]
        x[t, 1:-1] = 1.4 - drive**2 + 0.3 * p2[1:-1]

    series = _iterate_map(step, K, n, seed)
    links = []
    for i in range(1, K - 1):
        links.append((i - 1, i))
        links.append((i + 1, i))
    return series, _truth_from_links(K, links)


def gen_s4(n: int, seed: int) -> tuple[MultivariateTimeSeries, GroundTruth]:
    """S2 with variable X3 hidden from the analysis (4 observed variables)."""
    full, _ = gen_s2(n, seed)
    keep = [0, 1, 3, 4]
    values = full.values[:, keep]
    labels = tuple(full.labels[i] for i in keep)
    # S2 truth restricted to the kept variables: X1->X2, X1->X4, X4<->X5
    truth = _truth_from_links(4, [(0, 1), (0, 2), (2, 3), (3, 2)])
    return MultivariateTimeSeries(values, labels), truth


def gen_s5(n: int, seed: int, c: float = 0.1, s: float = 0.1) -> tuple[MultivariateTimeSeries, GroundTruth]:
    """Henon-like maps where X5 drives all others and a chain runs X1->X2->X3->X4."""

    def step(x, t):
        p, p2 = x[t - 1], x[t - 2]
        common = s * p[4] ** 2
        x[t, 0] = 1.4 - common - (1.0 - s) * p[0] ** 2 + 0.3 * p2[0]
        for i in (1, 2, 3):
            x[t, i] = (
                1.4 - common - c * p[i - 1] * p[i] - (1.0 - c - s) * p[i] ** 2 + 0.3 * p2[i]
            )
        x[t, 4] = 1.4 - p[4] ** 2 + 0.3 * p2[4]

    series = _iterate_map(step, 5, n, seed)
    links = [(4, 0), (4, 1), (4, 2), (4, 3), (0, 1), (1, 2), (2, 3)]
    return series, _truth_from_links(5, links)


def gen_s6(n: int, seed: int) -> tuple[MultivariateTimeSeries, GroundTruth]:
    """Nonlinear VAR(3) in 20 variables with square and product coupling terms."""
    rng = np.random.default_rng(seed)
    N = n + BURN_IN
    e = rng.standard_normal((N, 20))
    x = np.zeros((N, 20))
    x[:3] = e[:3]
    for t in range(3, N):
        p, p2, p3 = x[t - 1], x[t - 2], x[t - 3]
        x[t, 0] = 0.8 * p[0] - 0.1 * p2[2] - 0.3 * p2[18] + e[t, 0]
        x[t, 1] = 0.8 * p[1] - 0.2 * p2[0] * p[14] + e[t, 1]
        x[t, 2] = 0.8 * p[2] + e[t, 2]
        x[t, 3] = 0.8 * p[3] - 0.2 * p2[4] * p[6] + e[t, 3]
        x[t, 4] = 0.8 * p[4] - 0.5 * p[2] ** 2 + e[t, 4]
        x[t, 5] = 0.8 * p[5] - 0.4 * p3[2] + 0.1 * p[9] ** 2 + e[t, 5]
        x[t, 6] = 0.8 * p[6] + e[t, 6]
        x[t, 7] = -0.6 * p[7] + 0.1 * p3[10] * p2[18] + e[t, 7]
        x[t, 8] = 0.8 * p[8] - 0.1 * p[19] + e[t, 8]
        x[t, 9] = 0.8 * p[9] + e[t, 9]
        x[t, 10] = 0.8 * p[10] + 0.1 * p[19] - 0.1 * p2[3] ** 2 + e[t, 10]
        x[t, 11] = 0.8 * p[11] + 0.2 * p2[18] - 0.1 * p[15] ** 2 + e[t, 11]
        x[t, 12] = 0.8 * p[12] + e[t, 12]
        x[t, 13] = 0.8 * p[13] - 0.2 * p3[3] ** 2 + e[t, 13]
        x[t, 14] = 0.8 * p[14] + e[t, 14]
        x[t, 15] = 0.8 * p[15] + 0.1 * p2[18] - 0.3 * p2[2] + e[t, 15]
        x[t, 16] = 0.8 * p[16] - 0.1 * p2[6] ** 2 + e[t, 16]
        x[t, 17] = 0.8 * p[17] - 0.3 * p2[6] + 0.5 * p3[1] * p[19] + e[t, 17]
        x[t, 18] = 0.8 * p[18] + e[t, 18]
        x[t, 19] = 0.8 * p[19] + e[t, 19]
    links = [
        (2, 0), (18, 0),
        (0, 1), (14, 1),
        (4, 3), (6, 3),
        (2, 4),
        (2, 5), (9, 5),
        (10, 7), (18, 7),
        (19, 8),
        (19, 10), (3, 10),
        (18, 11), (15, 11),
        (3, 13),
        (18, 15), (2, 15),
        (6, 16),
        (6, 17), (1, 17), (19, 17),
    ]
    truth = _truth_from_links(20, links)
    return MultivariateTimeSeries(transient_discard(x)), truth


def garch11_process(n: int, rng: np.random.Generator) -> np.ndarray:
    """GARCH(1,1) innovations e_t = sigma_t w_t with
    sigma_t^2 = 0.2 + 0.2 e_{t-1}^2 + 0.75 sigma_{t-1}^2 (unconditional variance 4)."""
    w = rng.standard_normal(n)
    e = np.empty(n)
    sig2 = 4.0  # start at the unconditional variance to avoid a transient
    e[0] = math.sqrt(sig2) * w[0]
    for t in range(1, n):
        sig2 = 0.2 + 0.2 * e[t - 1] ** 2 + 0.75 * sig2
        e[t] = math.sqrt(sig2) * w[t]
    return e


def _trimmed_sd(x: np.ndarray) -> float:
    # central 99%: the df=2 t distribution has infinite variance, so the raw
    # sample sd diverges with n and the level would lose its meaning
    lo, hi = np.quantile(x, [0.005, 0.995])
    core = x[(x >= lo) & (x <= hi)]
    return float(core.std(ddof=1))


def add_noise(series: MultivariateTimeSeries, spec: NoiseSpec, seed: int) -> MultivariateTimeSeries:
    """Add observational noise, rescaled per column to sd = level x column sd."""
    rng = np.random.default_rng(seed)
    values = series.values.copy()
    n = series.n
    for j in range(series.K):
        if spec.kind == "gaussian":
            raw = rng.standard_normal(n)
            measured = raw.std(ddof=1)
        elif spec.kind == "tstudent2":
            raw = rng.standard_t(2, size=n)
            measured = _trimmed_sd(raw)
        else:
            raw = garch11_process(n, rng)
            measured = raw.std(ddof=1)
        target_sd = spec.level * values[:, j].std(ddof=1)
        values[:, j] += raw * (target_sd / measured)
    return MultivariateTimeSeries(values, series.labels)


def generate(spec: SystemSpec, n: int, seed: int) -> tuple[MultivariateTimeSeries, GroundTruth]:
    """Generate one realization of a system, with observational noise if specified."""
    if spec.id == "S1":
        series, truth = gen_s1(n, seed)
    elif spec.id == "S2":
        series, truth = gen_s2(n, seed)
    elif spec.id == "S3":
        series, truth = gen_henon(spec.K, spec.c, n, seed)
    elif spec.id == "S4":
        series, truth = gen_s4(n, seed)
    elif spec.id == "S5":
        series, truth = gen_s5(n, seed, s=spec.s)
    else:
        series, truth = gen_s6(n, seed)
    if spec.noise is not None:
        noise_seed = int(np.random.SeedSequence([seed, 0x5E]).generate_state(1)[0])
        series = add_noise(series, spec.noise, noise_seed)
    return series, truth


def save_truth_csv(truth: GroundTruth, path) -> None:
    """Write the ground truth as an edge list CSV with columns from,to (1-based)."""
    with open(path, "w", newline="") as fh:
        fh.write("from,to\n")
        for i, j in truth.links():
            fh.write(f"{i + 1},{j + 1}\n")
