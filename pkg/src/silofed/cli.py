"""Command-line entry point.

Subcommands:
  run      execute the strategies listed in a config, write metrics + manifest
  compare  run all four strategies (or a filtered subset) and print a table
  report   summarize an existing metrics CSV

Exit codes: 0 success, 1 runtime failure, 2 bad usage or bad config. The
default output directory can be set with the SILOFED_OUT_DIR environment
variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .config import ConfigError, load_config
from .harness import RUN_STRATEGIES, SlotMetrics, export_metrics, load_metrics, run_experiment

OUT_DIR_ENV = "SILOFED_OUT_DIR"


def _resolve_out(args: argparse.Namespace) -> str:
    out = args.out or os.environ.get(OUT_DIR_ENV)
    if not out:
        raise ConfigError(f"no output directory: pass --out or set {OUT_DIR_ENV}")
    os.makedirs(out, exist_ok=True)
    return out


def _load(args: argparse.Namespace):
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _write_outputs(config, metrics: list[SlotMetrics], out: str) -> str:
    csv_path = os.path.join(out, "metrics.csv")
    export_metrics(metrics, csv_path)
    manifest = {"config": config.to_dict(), "master_seed": config.seed}
    with open(os.path.join(out, "run_manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return csv_path


def _final_slot_table(metrics: list[SlotMetrics]) -> str:
    final = max(m.slot for m in metrics)
    strategies = sorted({m.strategy for m in metrics})
    clients = sorted({m.client_id for m in metrics})
    cells = {(m.strategy, m.client_id): m for m in metrics if m.slot == final}
    width = max(14, max(len(s) for s in strategies) + 2)
    lines = [f"final-slot accuracy (slot {final}, mean over seeds)"]
    lines.append("".join(["strategy".ljust(width)] + [f"client {c}".rjust(12) for c in clients]))
    for s in strategies:
        row = [s.ljust(width)]
        for c in clients:
            m = cells.get((s, c))
            row.append(("-" if m is None else f"{m.acc_mean:.3f}").rjust(12))
        lines.append("".join(row))
    return "\n".join(lines)


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    out = _resolve_out(args)
    metrics = run_experiment(config)
    csv_path = _write_outputs(config, metrics, out)
    print(f"wrote {csv_path} ({len(metrics)} rows, strategies: {', '.join(config.strategies)})")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    config = _load(args)
    if args.strategies:
        wanted = tuple(s.strip() for s in args.strategies.split(","))
        bad = [s for s in wanted if s not in RUN_STRATEGIES]
        if bad:
            raise ConfigError(f"--strategies: unknown strategy {bad[0]!r}; valid: {', '.join(RUN_STRATEGIES)}")
        strategies = wanted
    else:
        strategies = RUN_STRATEGIES
    config = replace(config, strategies=strategies)
    out = _resolve_out(args)
    metrics = run_experiment(config)
    csv_path = _write_outputs(config, metrics, out)
    print(_final_slot_table(metrics))
    print(f"wrote {csv_path}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        metrics = load_metrics(args.csv)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read metrics: {exc}", file=sys.stderr)
        return 2
    if not metrics:
        print(f"no data in {args.csv}")
        return 0
    final = max(m.slot for m in metrics)
    clients = sorted({m.client_id for m in metrics})
    strategies = sorted({m.strategy for m in metrics})
    print(f"final slot: {final}")
    for s in strategies:
        cells = [m for m in metrics if m.strategy == s and m.slot == final]
        parts = ", ".join(f"client {m.client_id}: {m.acc_mean:.3f} (+/- {m.acc_std:.3f})" for m in cells)
        print(f"  {s}: {parts}")
    print("best strategy per client:")
    for c in clients:
        cands = [m for m in metrics if m.client_id == c and m.slot == final]
        best = max(cands, key=lambda m: (m.acc_mean, m.strategy))
        print(f"  client {c}: {best.strategy} ({best.acc_mean:.3f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="silofed", description="cross-silo federated learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the strategies listed in the config")
    p_run.add_argument("config", help="YAML experiment config")
    p_run.add_argument("--out", help=f"output directory (default: ${OUT_DIR_ENV})")
    p_run.add_argument("--seed", type=int, help="override the config's master seed")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run all four strategies and print a comparison table")
    p_cmp.add_argument("config", help="YAML experiment config")
    p_cmp.add_argument("--out", help=f"output directory (default: ${OUT_DIR_ENV})")
    p_cmp.add_argument("--seed", type=int, help="override the config's master seed")
    p_cmp.add_argument("--strategies", help="comma-separated subset to run (default: all)")
    p_cmp.set_defaults(func=cmd_compare)

    p_rep = sub.add_parser("report", help="summarize a metrics CSV")
    p_rep.add_argument("csv", help="metrics CSV produced by run/compare")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
