"""Configuration-driven Monte Carlo benchmark of the causality measures.

An experiment is the Cartesian product (K, c, n, noise level, measure,
realization). Every task derives its seeds from the master seed and its own
parameters, so results are independent of execution order and a rerun of a
partially completed output directory computes only the missing records.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import linear, nue
from .evaluation import CausalNetwork, ConfusionCounts, Scores, confusion, decide_network, scores
from .series import MultivariateTimeSeries
from .systems import SYSTEM_IDS, SYSTEM_MAX_LAG, NOISE_KINDS, NoiseSpec, SystemSpec, generate

MEASURES = ("GCI", "CGCI", "PCGC", "RCGCI", "TE", "PTE", "MIME", "PMIME")
LINEAR_MEASURES = ("GCI", "CGCI", "PCGC", "RCGCI")
DEFAULT_N_LIST = (512, 1024, 2048, 4096)

WORKERS_ENV = "CAUSALBENCH_WORKERS"


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


@dataclass(frozen=True)
class MeasureSpec:
    """One measure plus its free parameters; unset ones resolve per system."""

    name: str
    P: int | None = None
    m: int | None = None
    tau: int = 1
    k: int = 10
    L_max: int = 5
    Ks: int | None = None
    M: int = 100
    M_term: int = 100

    def __post_init__(self):
        if self.name not in MEASURES:
            raise ConfigError(f"unknown measure {self.name!r}; implemented: {MEASURES}")


@dataclass(frozen=True)
class ExperimentConfig:
    system: str
    K_list: tuple[int, ...]
    c_list: tuple[float | None, ...]
    n_list: tuple[int, ...]
    noise_kind: str | None
    noise_levels: tuple[float | None, ...]
    measures: tuple[MeasureSpec, ...]
    realizations: int | None
    alpha: float
    master_seed: int
    output_dir: str | None

    def realizations_for(self, K: int) -> int:
        # published schedule: 100 realizations up to K=5, 30 up to K=10, 10 above;
        # desk-scale runs pass smaller counts explicitly
        if self.realizations is not None:
            return self.realizations
        if K <= 5:
            return 100
        if K <= 10:
            return 30
        return 10


@dataclass(frozen=True)
class Task:
    system: str
    K: int
    c: float | None
    n: int
    noise_kind: str | None
    noise_level: float | None
    measure: MeasureSpec
    realization: int

    def key(self) -> tuple:
        return (
            self.system,
            self.K,
            _fmt(self.c),
            self.n,
            self.noise_kind or "",
            _fmt(self.noise_level),
            self.measure.name,
            self.realization,
        )


@dataclass
class RunRecord:
    system: str
    K: int
    c: float | None
    n: int
    noise_kind: str | None
    noise_level: float | None
    measure: str
    realization: int
    seed: int
    counts: ConfusionCounts
    score: Scores
    pairs: list[tuple[int, int, float, float, int]] = field(default_factory=list)
    wall_time: float = 0.0

    def key(self) -> tuple:
        return (
            self.system,
            self.K,
            _fmt(self.c),
            self.n,
            self.noise_kind or "",
            _fmt(self.noise_level),
            self.measure,
            self.realization,
        )


def _fmt(v) -> str:
    # repr of a float is the shortest string that round-trips exactly
    if v is None:
        return ""
    return repr(float(v))


def stable_seed(*parts) -> int:
    """Deterministic 63-bit seed from a canonical encoding of the parts."""
    key = "|".join("" if p is None else repr(p) for p in parts)
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def default_ks(system: str, K: int) -> int:
    """Conditioning-set size schedule for PCGC."""
    if system in ("S1", "S2", "S5"):
        ks = 2
    elif system == "S4":
        ks = 1
    elif system == "S6":
        ks = 3
    else:  # S3 family: 2/3/4 at K=5/10/15, then linear 4 -> 18 for K 20 -> 100
        if K <= 5:
            ks = 2
        elif K <= 10:
            ks = 3
        elif K < 20:
            ks = 4
        else:
            ks = int(round(4 + 14 * (K - 20) / 80))
    return min(ks, K - 2)


def resolve_measure(measure: MeasureSpec, system: str, K: int) -> MeasureSpec:
    """Fill system-dependent defaults: P and m equal the system's true maximum
    lag, Ks follows the published schedule."""
    max_lag = SYSTEM_MAX_LAG[system]
    return replace(
        measure,
        P=measure.P if measure.P is not None else max_lag,
        m=measure.m if measure.m is not None else max_lag,
        Ks=measure.Ks if measure.Ks is not None else default_ks(system, K),
    )


# ---------------------------------------------------------------------------
# Configuration loading
# ---------------------------------------------------------------------------

_ALLOWED_KEYS = {
    "system",
    "K_list",
    "c_list",
    "n_list",
    "noise",
    "measures",
    "realizations",
    "alpha",
    "master_seed",
    "output_dir",
}


def _parse_measure(entry) -> MeasureSpec:
    if isinstance(entry, str):
        return MeasureSpec(name=entry)
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"measure entries must be a name or an object with 'name': {entry!r}")
    known = {"name", "P", "m", "tau", "k", "L_max", "Ks", "M", "M_term"}
    extra = set(entry) - known
    if extra:
        raise ConfigError(f"unknown measure fields {sorted(extra)} in {entry!r}")
    return MeasureSpec(**entry)


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(raw) - _ALLOWED_KEYS
    if extra:
        raise ConfigError(f"unknown config fields: {sorted(extra)}")
    system = raw.get("system")
    if isinstance(system, dict):
        system = system.get("id")
    if system not in SYSTEM_IDS:
        raise ConfigError(f"system must be one of {SYSTEM_IDS}, got {system!r}")

    fixed_k = {"S1": 5, "S2": 5, "S4": 4, "S5": 5, "S6": 20}
    if system == "S3":
        K_list = tuple(int(k) for k in raw.get("K_list", [5]))
        if any(k < 3 for k in K_list):
            raise ConfigError("S3 requires K >= 3 in K_list")
        c_list = tuple(float(c) for c in raw.get("c_list", [0.3]))
        if any(not 0.0 <= c <= 1.0 for c in c_list):
            raise ConfigError("c_list values must lie in [0, 1]")
    else:
        if "K_list" in raw and tuple(raw["K_list"]) != (fixed_k[system],):
            raise ConfigError(f"{system} fixes K={fixed_k[system]}")
        if "c_list" in raw:
            raise ConfigError("c_list applies to S3 only")
        K_list = (fixed_k[system],)
        c_list = (None,)

    n_list = tuple(int(n) for n in raw.get("n_list", DEFAULT_N_LIST))
    if any(n < 64 for n in n_list):
        raise ConfigError("n_list values must be >= 64")

    noise_kind = None
    noise_levels: tuple[float | None, ...] = (None,)
    if "noise" in raw and raw["noise"] is not None:
        noise = raw["noise"]
        if not isinstance(noise, dict) or "kind" not in noise:
            raise ConfigError("noise must be an object with 'kind' and 'levels'")
        noise_kind = noise["kind"]
        if noise_kind not in NOISE_KINDS:
            raise ConfigError(f"noise kind must be one of {NOISE_KINDS}, got {noise_kind!r}")
        levels = noise.get("levels", [0.1, 0.2, 0.5])
        noise_levels = tuple(float(v) for v in levels)
        if any(not v > 0 for v in noise_levels):
            raise ConfigError("noise levels must be > 0")

    if "measures" not in raw or not raw["measures"]:
        raise ConfigError("config requires a non-empty 'measures' list")
    measures = tuple(_parse_measure(m) for m in raw["measures"])

    realizations = raw.get("realizations")
    if realizations is not None and int(realizations) < 1:
        raise ConfigError("realizations must be >= 1")
    alpha = float(raw.get("alpha", 0.05))
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")

    return ExperimentConfig(
        system=system,
        K_list=K_list,
        c_list=c_list,
        n_list=n_list,
        noise_kind=noise_kind,
        noise_levels=noise_levels,
        measures=measures,
        realizations=None if realizations is None else int(realizations),
        alpha=alpha,
        master_seed=int(raw.get("master_seed", 0)),
        output_dir=raw.get("output_dir"),
    )


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}")
    return parse_config(raw)


# ---------------------------------------------------------------------------
# Measure evaluation
# ---------------------------------------------------------------------------

def _pairs(K: int):
    return [(x, y) for x in range(K) for y in range(K) if x != y]


def measure_network(
    series: MultivariateTimeSeries, measure: MeasureSpec, alpha: float, seed: int
) -> CausalNetwork:
    """Evaluate one measure on every ordered pair and threshold the results.

    `measure` must already be resolved (concrete P/m/Ks). `seed` drives the
    measure's internal randomness (surrogates, permutation replicas).
    """
    K = series.K
    name = measure.name
    results: dict[tuple[int, int], object] = {}
    if name in LINEAR_MEASURES:
        if name == "RCGCI":
            for y in range(K):
                terms = linear.rcgci_terms(series, y, measure.P)
                for x in range(K):
                    if x != y:
                        results[(x, y)] = linear.rcgci_from_terms(series, x, y, measure.P, terms)
        else:
            for x, y in _pairs(K):
                if name == "GCI":
                    results[(x, y)] = linear.gci(series, x, y, measure.P)
                elif name == "CGCI":
                    results[(x, y)] = linear.cgci(series, x, y, measure.P)
                else:
                    results[(x, y)] = linear.pcgc(series, x, y, measure.Ks, measure.P)
        return decide_network(results, alpha, mode="pvalue", K=K)
    if name in ("TE", "PTE"):
        fn = nue.te if name == "TE" else nue.pte
        for x, y in _pairs(K):
            results[(x, y)] = fn(
                series,
                x,
                y,
                m=measure.m,
                tau=measure.tau,
                k=measure.k,
                surrogates=measure.M,
                seed=stable_seed(seed, x, y),
            )
        return decide_network(results, alpha, mode="pvalue", K=K)
    if name == "MIME":
        for x, y in _pairs(K):
            results[(x, y)] = nue.mime(
                series, x, y, measure.L_max, measure.k, measure.M_term, alpha, seed
            )
        return decide_network(results, alpha, mode="positive_index", K=K)
    # PMIME: one embedding per response serves all drivers
    results = nue.pmime_network(series, measure.L_max, measure.k, measure.M_term, alpha, seed)
    return decide_network(results, alpha, mode="positive_index", K=K)


def run_task(config: ExperimentConfig, task: Task) -> RunRecord:
    """Generate the realization for one task, score one measure against truth."""
    start = time.perf_counter()
    noise = (
        NoiseSpec(task.noise_kind, task.noise_level)
        if task.noise_kind is not None and task.noise_level is not None
        else None
    )
    spec = SystemSpec(id=task.system, K=task.K, c=task.c, noise=noise)
    series_seed = stable_seed(
        config.master_seed,
        task.system,
        task.K,
        task.c,
        task.n,
        task.noise_kind,
        task.noise_level,
        task.realization,
    )
    series, truth = generate(spec, task.n, series_seed)
    measure = resolve_measure(task.measure, task.system, task.K)
    measure_seed = stable_seed(series_seed, measure.name)
    network = measure_network(series, measure, config.alpha, measure_seed)
    counts = confusion(network, truth)
    sc = scores(counts)
    pairs = []
    for x, y in _pairs(task.K):
        p = float(network.pvalue[x, y]) if network.pvalue is not None else float("nan")
        pairs.append((x, y, float(network.strength[x, y]), p, int(network.adjacency[x, y])))
    return RunRecord(
        system=task.system,
        K=task.K,
        c=task.c,
        n=task.n,
        noise_kind=task.noise_kind,
        noise_level=task.noise_level,
        measure=measure.name,
        realization=task.realization,
        seed=series_seed,
        counts=counts,
        score=sc,
        pairs=pairs,
        wall_time=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Experiment driver with streaming, resumable output
# ---------------------------------------------------------------------------

RECORD_FIELDS = [
    "system", "K", "c", "n", "noise_kind", "noise_level", "measure", "realization",
    "seed", "tp", "tn", "fp", "fn", "sens", "spec", "precision", "f1", "wall_time",
]
PAIR_FIELDS = [
    "system", "K", "c", "n", "noise_kind", "noise_level", "measure", "realization",
    "from", "to", "strength", "pvalue", "decision",
]


def expand_tasks(config: ExperimentConfig) -> list[Task]:
    tasks = []
    for K in config.K_list:
        for c in config.c_list:
            for n in config.n_list:
                for level in config.noise_levels:
                    kind = config.noise_kind if level is not None else None
                    for measure in config.measures:
                        for r in range(config.realizations_for(K)):
                            tasks.append(
                                Task(config.system, K, c, n, kind, level, measure, r)
                            )
    return tasks


def _record_row(rec: RunRecord) -> list[str]:
    return [
        rec.system, str(rec.K), _fmt(rec.c), str(rec.n), rec.noise_kind or "",
        _fmt(rec.noise_level), rec.measure, str(rec.realization), str(rec.seed),
        str(rec.counts.tp), str(rec.counts.tn), str(rec.counts.fp), str(rec.counts.fn),
        _fmt(rec.score.sens), _fmt(rec.score.spec), _fmt(rec.score.precision),
        _fmt(rec.score.f1), format(rec.wall_time, ".3f"),
    ]


def _pair_rows(rec: RunRecord) -> list[list[str]]:
    head = [rec.system, str(rec.K), _fmt(rec.c), str(rec.n), rec.noise_kind or "",
            _fmt(rec.noise_level), rec.measure, str(rec.realization)]
    rows = []
    for x, y, strength, pvalue, decision in rec.pairs:
        rows.append(head + [str(x + 1), str(y + 1), _fmt(strength),
                            "" if np.isnan(pvalue) else _fmt(pvalue), str(decision)])
    return rows


def _row_to_record(row: dict, pairs: list) -> RunRecord:
    return RunRecord(
        system=row["system"],
        K=int(row["K"]),
        c=float(row["c"]) if row["c"] else None,
        n=int(row["n"]),
        noise_kind=row["noise_kind"] or None,
        noise_level=float(row["noise_level"]) if row["noise_level"] else None,
        measure=row["measure"],
        realization=int(row["realization"]),
        seed=int(row["seed"]),
        counts=ConfusionCounts(int(row["tp"]), int(row["tn"]), int(row["fp"]), int(row["fn"])),
        score=Scores(float(row["sens"]), float(row["spec"]), float(row["precision"]),
                     float(row["f1"])),
        pairs=pairs,
        wall_time=float(row["wall_time"]),
    )


def load_records(output_dir) -> list[RunRecord]:
    """Read back the records (with their pair values) from an output directory."""
    out = Path(output_dir)
    records_path = out / "records.csv"
    if not records_path.exists():
        return []
    pair_map: dict[tuple, list] = {}
    pairs_path = out / "pairs.csv"
    if pairs_path.exists():
        with open(pairs_path, newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["system"], int(row["K"]), row["c"], int(row["n"]),
                       row["noise_kind"], row["noise_level"], row["measure"],
                       int(row["realization"]))
                pair_map.setdefault(key, []).append(
                    (int(row["from"]) - 1, int(row["to"]) - 1, float(row["strength"]),
                     float(row["pvalue"]) if row["pvalue"] else float("nan"),
                     int(row["decision"]))
                )
    records = []
    with open(records_path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["system"], int(row["K"]), row["c"], int(row["n"]),
                   row["noise_kind"], row["noise_level"], row["measure"],
                   int(row["realization"]))
            records.append(_row_to_record(row, pair_map.get(key, [])))
    return records


def _write_csv(path, fields, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        writer.writerows(rows)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> list[RunRecord]:
    """Run every task of the experiment; stream records to the output directory.

    Already-completed records found in the output directory are kept, only
    missing tasks run. Per-task failures are logged to failures.csv and do
    not stop the run. The final CSV content is independent of execution
    order and of the worker count.
    """
    if config.output_dir is None:
        raise ConfigError("config requires output_dir (or pass it on the command line)")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))

    tasks = expand_tasks(config)
    done: dict[tuple, RunRecord] = {rec.key(): rec for rec in load_records(out)}
    todo = [t for t in tasks if t.key() not in done]

    failures: list[tuple[Task, str]] = []
    stream_path = out / "records.csv"
    stream_exists = stream_path.exists()
    with open(stream_path, "a", newline="") as stream:
        writer = csv.writer(stream)
        if not stream_exists:
            writer.writerow(RECORD_FIELDS)

        def consume(task, record):
            done[task.key()] = record
            writer.writerow(_record_row(record))
            stream.flush()

        if workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {pool.submit(run_task, config, t): t for t in todo}
                for fut in as_completed(futures):
                    task = futures[fut]
                    try:
                        consume(task, fut.result())
                    except Exception as exc:  # noqa: BLE001 - recorded, run continues
                        failures.append((task, f"{type(exc).__name__}: {exc}"))
        else:
            for task in todo:
                try:
                    consume(task, run_task(config, task))
                except Exception as exc:  # noqa: BLE001
                    failures.append((task, f"{type(exc).__name__}: {exc}"))

    # canonical rewrite: task order, not completion order
    ordered = [done[t.key()] for t in tasks if t.key() in done]
    _write_csv(out / "records.csv", RECORD_FIELDS, [_record_row(r) for r in ordered])
    pair_rows = []
    for rec in ordered:
        pair_rows.extend(_pair_rows(rec))
    _write_csv(out / "pairs.csv", PAIR_FIELDS, pair_rows)
    if failures:
        _write_csv(
            out / "failures.csv",
            ["system", "K", "c", "n", "noise_kind", "noise_level", "measure",
             "realization", "error"],
            [[t.system, t.K, _fmt(t.c), t.n, t.noise_kind or "", _fmt(t.noise_level),
              t.measure.name, t.realization, msg] for t, msg in failures],
        )
    return ordered


# ---------------------------------------------------------------------------
# Summaries and plot data
# ---------------------------------------------------------------------------

def summarize(records: Sequence[RunRecord]) -> dict:
    """Overall per-measure means (ranked by F1) and per-setting breakdown."""
    by_measure: dict[str, list[RunRecord]] = {}
    by_setting: dict[tuple, list[RunRecord]] = {}
    for rec in records:
        by_measure.setdefault(rec.measure, []).append(rec)
        setting = (rec.measure, rec.system, rec.K, rec.c, rec.n,
                   rec.noise_kind, rec.noise_level)
        by_setting.setdefault(setting, []).append(rec)

    def block(recs):
        return {
            "sens": float(np.mean([r.score.sens for r in recs])),
            "spec": float(np.mean([r.score.spec for r in recs])),
            "f1": float(np.mean([r.score.f1 for r in recs])),
            "records": len(recs),
        }

    overall = [
        {"measure": m, **block(recs)}
        for m, recs in sorted(by_measure.items(), key=lambda kv: -block(kv[1])["f1"])
    ]
    settings = []
    for (m, system, K, c, n, kind, level), recs in sorted(by_setting.items(),
                                                          key=lambda kv: str(kv[0])):
        settings.append(
            {"measure": m, "system": system, "K": K, "c": c, "n": n,
             "noise_kind": kind, "noise_level": level, **block(recs)}
        )
    return {"overall": overall, "by_setting": settings}


def emit_plot_data(records: Sequence[RunRecord], kind: str) -> tuple[list[str], list[list]]:
    """Table for external plotting: one row per K (k_sweep) or noise level
    (noise_sweep) and one column per (measure, accuracy index)."""
    if kind == "k_sweep":
        x_name = "K"
        x_of = lambda r: r.K  # noqa: E731
    elif kind == "noise_sweep":
        x_name = "noise_level"
        x_of = lambda r: r.noise_level  # noqa: E731
    else:
        raise ValueError(f"kind must be k_sweep or noise_sweep, got {kind!r}")
    measures = sorted({r.measure for r in records})
    header = [x_name]
    for m in measures:
        header += [f"{m}_sens", f"{m}_spec", f"{m}_f1"]
    cells: dict[tuple, list[RunRecord]] = {}
    for rec in records:
        cells.setdefault((x_of(rec), rec.measure), []).append(rec)
    rows = []
    for x in sorted({x_of(r) for r in records}):
        row: list = [x]
        for m in measures:
            recs = cells.get((x, m), [])
            if recs:
                row += [float(np.mean([r.score.sens for r in recs])),
                        float(np.mean([r.score.spec for r in recs])),
                        float(np.mean([r.score.f1 for r in recs]))]
            else:
                row += [float("nan")] * 3
        rows.append(row)
    return header, rows
