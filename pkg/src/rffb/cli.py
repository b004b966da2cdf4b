"""Command line entry point ``rffb``."""

import argparse
import json
import sys
from pathlib import Path

from . import bounds, experiments
from .errors import ConfigError, InvalidArgument
from .plotting import plot_report


def _cmd_run(args):
    cfg = experiments.load_config(args.config)
    report = experiments.run_config(cfg, jobs=args.jobs)
    name = cfg.get("name") or Path(args.config).stem
    out_dir = args.out or cfg.get("output") or "."
    csv_path, json_path = experiments.write_outputs(report, out_dir, name)
    svg_path = plot_report(report, Path(out_dir) / f"{name}.svg")
    failed = sum(r["verdict"] == "fail" for r in report["rows"])
    print(f"{report['kind']}: {len(report['rows'])} rows, {failed} failed, "
          f"{report['runtime_seconds']:.1f}s")
    for p in (csv_path, json_path, svg_path):
        print(f"  wrote {p}")
    return 0 if report["passed"] else 1


def _cmd_plot(args):
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(args.report, f"cannot read report: {exc}") from None
    plot_report(report, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_bounds(args):
    q = bounds.BoundQuery(args.R, args.D, args.eps, d=args.d, delta=args.delta)
    rows = bounds.compare_bounds(q)
    print(f"R={q.R:g} D={q.D} eps={q.epsilon:g} d={q.d}")
    print(f"{'bound':<16}{'side':<7}{'value':>14}{'log value':>14}")
    for r in rows:
        print(f"{r.name:<16}{r.side:<7}{r.value:>14.6g}{r.log_value:>14.6g}")
    if not any(r.name == "lower_prob" for r in rows):
        print(f"lower_prob omitted: needs eps <= g(R)/3 = {bounds.g_of_R(q.R) / 3:.6g}")
    print(f"tightest upper: {bounds.tightest_upper(rows)}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="rffb", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    r.add_argument("--out", help="output directory (default: config 'output' or .)")
    r.set_defaults(func=_cmd_run)

    pl = sub.add_parser("plot", help="render a report JSON to SVG")
    pl.add_argument("report")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=_cmd_plot)

    b = sub.add_parser("bounds", help="evaluate and compare the bounds at one point")
    b.add_argument("--R", type=float, required=True)
    b.add_argument("--D", type=int, required=True)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--d", type=int, default=1)
    b.add_argument("--delta", type=float, default=0.05)
    b.set_defaults(func=_cmd_bounds)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidArgument, ValueError) as exc:
        print(f"rffb: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
