"""Command-line interface: run experiments, summarize results, export data.

Exit codes: 0 success, 2 configuration error, 3 run completed with per-task
failures (recorded in failures.csv). Worker count comes from --workers or
the CAUSALBENCH_WORKERS environment variable.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from .bench import ConfigError, emit_plot_data, load_config, load_records, run_experiment, summarize
from .series import save_csv
from .systems import NoiseSpec, SystemSpec, generate, save_truth_csv


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
        if args.output_dir:
            config = dataclasses.replace(config, output_dir=args.output_dir)
        run_experiment(config, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    failures = Path(config.output_dir) / "failures.csv"
    if failures.exists():
        print(f"completed with failures, see {failures}", file=sys.stderr)
        return 3
    print(f"records written to {config.output_dir}")
    return 0


def _cmd_summarize(args) -> int:
    records = load_records(args.dir)
    summary = summarize(records)
    out = Path(args.dir) / "summary.json"
    with open(out, "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"{'measure':<8} {'Sens':>8} {'Spec':>8} {'F1':>8} {'records':>8}")
    for row in summary["overall"]:
        print(f"{row['measure']:<8} {row['sens']:>8.2f} {row['spec']:>8.2f} "
              f"{row['f1']:>8.2f} {row['records']:>8d}")
    print(f"summary written to {out}")
    return 0


def _cmd_plotdata(args) -> int:
    records = load_records(args.dir)
    header, rows = emit_plot_data(records, args.kind)
    out = args.output or str(Path(args.dir) / f"{args.kind}.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    print(f"plot data written to {out}")
    return 0


def _cmd_gen(args) -> int:
    try:
        noise = NoiseSpec(args.noise, args.level) if args.noise else None
        spec = SystemSpec(id=args.system, K=args.K, c=args.c, noise=noise)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    series, truth = generate(spec, args.n, args.seed)
    out = Path(args.output)
    save_csv(series, out)
    truth_path = out.with_name(out.stem + "_truth.csv")
    save_truth_csv(truth, truth_path)
    print(f"series written to {out}, ground truth to {truth_path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="causalbench",
        description="Monte Carlo benchmark of linear and kNN-information causality measures",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config", help="path to the experiment configuration")
    p_run.add_argument("-o", "--output-dir", help="override the config's output_dir")
    p_run.add_argument("-w", "--workers", type=int, default=None,
                       help="worker processes (default: CAUSALBENCH_WORKERS or 1)")
    p_run.set_defaults(fn=_cmd_run)

    p_sum = sub.add_parser("summarize", help="rank measures by mean F1 over a results directory")
    p_sum.add_argument("dir")
    p_sum.set_defaults(fn=_cmd_summarize)

    p_plot = sub.add_parser("plotdata", help="export accuracy-vs-K or accuracy-vs-noise tables")
    p_plot.add_argument("dir")
    p_plot.add_argument("--kind", choices=["k_sweep", "noise_sweep"], required=True)
    p_plot.add_argument("-o", "--output")
    p_plot.set_defaults(fn=_cmd_plotdata)

    p_gen = sub.add_parser("gen", help="generate one realization of a system as CSV")
    p_gen.add_argument("system", choices=["S1", "S2", "S3", "S4", "S5", "S6"])
    p_gen.add_argument("--n", type=int, default=2048)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--K", type=int, default=0, help="variable count (S3 only)")
    p_gen.add_argument("--c", type=float, default=None, help="coupling strength (S3 only)")
    p_gen.add_argument("--noise", choices=["gaussian", "tstudent2", "garch11"], default=None)
    p_gen.add_argument("--level", type=float, default=0.2, help="noise level (fraction of sd)")
    p_gen.add_argument("-o", "--output", required=True, help="output CSV path")
    p_gen.set_defaults(fn=_cmd_gen)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
