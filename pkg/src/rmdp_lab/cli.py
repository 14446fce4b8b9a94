"""Command line: ``run``, ``table`` and ``plot``.

Exit codes: 0 on success, 2 on configuration or argument errors, 1 on
runtime errors (including individual runs that failed).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    ConfigError,
    aggregate,
    emit_csv,
    emit_svg_curves,
    load_config,
    mean_curves,
    read_records,
    run_experiment,
    with_seed,
    write_outputs,
)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rmdp-lab", description="Run exploration experiments and summarise their records.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True, help="JSON experiment config")
    run.add_argument("--out", help="output directory (overrides output_dir in the config)")
    run.add_argument("--parallel", type=int, default=None, help="worker processes (RMDP_LAB_THREADS wins)")
    run.add_argument("--seed", type=int, default=None, help="base seed (overrides base_seed)")

    table = sub.add_parser("table", help="mean and 10/90 percentiles at one step")
    table.add_argument("--records", required=True, help="directory holding records.csv")
    table.add_argument("--at-step", type=int, required=True)
    table.add_argument("--metric", default="cum_reward_per_step")

    plot = sub.add_parser("plot", help="SVG of the mean curve of a metric")
    plot.add_argument("--records", required=True, help="directory holding records.csv")
    plot.add_argument("--metric", default="cum_reward_per_step")
    plot.add_argument("--out", help="SVG path (default <records>/<metric>.svg)")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = with_seed(cfg, args.seed)
    out = args.out or cfg.output_dir
    if not out:
        raise ConfigError("no output directory: pass --out or set output_dir")
    result = run_experiment(cfg, args.parallel)
    paths = write_outputs(cfg, result, out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    if result.failures:
        print(f"{len(result.failures)} run(s) failed, see {paths['failures']}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _load(records_dir):
    path = Path(records_dir) / "records.csv"
    return read_records(path)


def _cmd_table(args) -> int:
    records = _load(args.records)
    if not records:
        raise ConfigError("records file is empty")
    try:
        stats = aggregate(records, args.at_step, args.metric)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    width = max(len(s.algorithm) for s in stats.algorithms)
    print(f"{'algorithm':<{width}}  {'runs':>5}  {'mean':>10}  {'p10':>10}  {'p90':>10}")
    for s in stats.algorithms:
        print(f"{s.algorithm:<{width}}  {s.runs:>5}  {s.mean:>10.4f}  {s.p10:>10.4f}  {s.p90:>10.4f}")
    emit_csv(stats, Path(args.records) / f"table_{args.metric}_{args.at_step}.csv")
    return EXIT_OK


def _cmd_plot(args) -> int:
    records = _load(args.records)
    try:
        curves = mean_curves(records, args.metric)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out) if args.out else Path(args.records) / f"{args.metric}.svg"
    emit_svg_curves(curves, out, x_label="t", y_label=args.metric)
    print(f"plot: {out}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "table": _cmd_table, "plot": _cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
