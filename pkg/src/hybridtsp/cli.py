"""Command-line entry point: ``solve``, ``stats`` and ``plotdata``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .bench import (
    METRICS,
    SOLVERS,
    ExperimentConfig,
    compute_stats,
    emit_results,
    load_results,
    run_sweep,
    write_plot_data,
)
from .geo import default_cities_path

LOG_ENV = "HYBRIDTSP_LOG_LEVEL"


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridtsp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run classical, quantum-only and hybrid solvers")
    solve.add_argument("--cities", default=str(default_cities_path()))
    solve.add_argument("--matrix", default=None, help="cached distance-matrix JSON")
    solve.add_argument("--n", type=int, nargs="+", required=True, help="one or more city counts")
    solve.add_argument("--runs", type=int, default=30)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--backend", choices=("ideal", "nisq"), default="ideal")
    solve.add_argument("--shots", type=int, default=1024)
    solve.add_argument("--reps", type=int, default=3)
    solve.add_argument("--max-iter", type=int, default=100)
    solve.add_argument("--ml", type=_on_off, default=True, metavar="on|off")
    solve.add_argument("--penalty-scale", type=float, default=2.0)
    solve.add_argument("--start", default="Calais")
    solve.add_argument("--trees", type=int, default=300)
    solve.add_argument("--out", required=True)

    stats = sub.add_parser("stats", help="print summary statistics of a results directory")
    stats.add_argument("--in", dest="inp", required=True)
    stats.add_argument("--recompute", action="store_true", help="recompute from raw runs")

    plot = sub.add_parser("plotdata", help="write per-metric plot-data CSVs")
    plot.add_argument("--in", dest="inp", required=True)
    plot.add_argument("--out", required=True)
    return parser


def cmd_solve(args) -> int:
    sizes = args.n
    cfg = ExperimentConfig(
        cities=args.cities,
        n=sizes[0],
        runs=args.runs,
        seed=args.seed,
        backend=args.backend,
        shots=args.shots,
        reps=args.reps,
        max_iter=args.max_iter,
        ml=args.ml,
        penalty_scale=args.penalty_scale,
        start=args.start,
        out=args.out,
        matrix=args.matrix,
        n_trees=args.trees,
    )
    records, stats = run_sweep(cfg, sizes)
    config = cfg.to_dict()
    config["n"] = list(sizes)
    path = emit_results(records, stats, args.out, config)
    _print_stats(stats)
    print(f"wrote {path}")
    return 0


def _print_stats(stats: dict) -> None:
    print(f"{'n':>4} {'solver':<10} {'metric':<6} {'median':>12} {'IQR':>10} {'SD':>10}  95% CI")
    for n in sorted(stats, key=int):
        for solver in SOLVERS:
            if solver not in stats[n]:
                continue
            for metric in METRICS:
                s = stats[n][solver][metric]
                print(
                    f"{n:>4} {solver:<10} {metric:<6} {s['median']:>12.4f} {s['iqr']:>10.4f} "
                    f"{s['sd']:>10.4f}  [{s['ci_low']:.4f}, {s['ci_high']:.4f}]"
                )


def cmd_stats(args) -> int:
    config, records, stats = load_results(args.inp)
    if args.recompute:
        stats = compute_stats(records, config.get("seed", 0))
    _print_stats(stats)
    return 0


def cmd_plotdata(args) -> int:
    _, _, stats = load_results(args.inp)
    for path in write_plot_data(stats, args.out):
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get(LOG_ENV, "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"solve": cmd_solve, "stats": cmd_stats, "plotdata": cmd_plotdata}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, RuntimeError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
