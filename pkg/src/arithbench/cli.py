"""Command line front end.

Subcommands:
  run        execute (or resume) a sweep from a JSON config
  aggregate  summarize a result store into TSV/JSON tables or plot series
  threshold  print the simulated success threshold for a task config
  gradcheck  finite-difference check of every layer's analytic gradients
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .dataset import DatasetSpec
from .gradcheck import FD_TOLERANCE, format_report, run_gradcheck
from .metrics import simulate_threshold
from .sweep import (
    ResultStore,
    ThresholdSettings,
    aggregate_rows,
    load_sweep_config,
    plot_series,
    rows_to_json,
    rows_to_tsv,
    run_sweep,
)


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_sweep_config(args.config)
    if args.keep_traces:
        config = dataclasses.replace(config, keep_traces=True)
    stats = run_sweep(config, args.out, workers=args.workers)
    print(
        f"done: total={stats.total} rejected={stats.rejected} "
        f"skipped={stats.already_done} executed={stats.executed} errors={stats.errors}"
    )
    return 1 if stats.errors else 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    store = ResultStore(args.store)
    records = store.records()
    if not records:
        print("store is empty", file=sys.stderr)
        return 1
    group_by = tuple(args.group_by.split(","))
    rows = aggregate_rows(records, group_by)
    if args.plot_x:
        out = json.dumps(plot_series(rows, args.plot_x, group_by), indent=2) + "\n"
    elif args.format == "json":
        out = rows_to_json(rows, group_by)
    else:
        out = rows_to_tsv(rows)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    return 0


def _cmd_threshold(args: argparse.Namespace) -> int:
    with open(args.config, encoding="utf-8") as fh:
        data = json.load(fh)
    spec = DatasetSpec.from_json(data["task"])
    settings = ThresholdSettings(
        epsilon=float(data.get("epsilon", ThresholdSettings.epsilon)),
        n_sim=int(data.get("n_sim", ThresholdSettings.n_sim)),
        seed=int(data.get("seed", ThresholdSettings.seed)),
    )
    thr = simulate_threshold(spec, settings.epsilon, settings.n_sim, settings.seed)
    print(json.dumps({"task": spec.to_json(), **settings.to_json(), "value": thr.value}))
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    results = run_gradcheck(instances=args.instances, seed=args.seed)
    print(format_report(results, args.tolerance))
    return 0 if all(r.passed(args.tolerance) for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arithbench",
        description="Benchmark harness for arithmetic-unit extrapolation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute or resume a sweep")
    p_run.add_argument("--config", required=True, help="sweep config JSON")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument(
        "--keep-traces",
        action="store_true",
        help="store the full per-checkpoint metric trace of every trial",
    )
    p_run.set_defaults(func=_cmd_run)

    p_agg = sub.add_parser("aggregate", help="summarize a result store")
    p_agg.add_argument("--store", required=True, help="results.jsonl path")
    p_agg.add_argument("--group-by", default="model,op", help="comma-separated fields")
    p_agg.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p_agg.add_argument(
        "--plot-x", default=None, help="emit success-rate series against this field"
    )
    p_agg.add_argument("--out", default=None, help="write instead of stdout")
    p_agg.set_defaults(func=_cmd_aggregate)

    p_thr = sub.add_parser("threshold", help="simulate a success threshold")
    p_thr.add_argument(
        "--config",
        required=True,
        help='JSON file: {"task": {...}, "epsilon": ..., "n_sim": ..., "seed": ...}',
    )
    p_thr.set_defaults(func=_cmd_threshold)

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p_gc.add_argument("--instances", type=int, default=20)
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.add_argument("--tolerance", type=float, default=FD_TOLERANCE)
    p_gc.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
