"""Command line entry point: ``arratia-lab <experiment> [flags]``."""

from __future__ import annotations

import argparse
import sys

from arratia_lab.experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run
from arratia_lab.report import summary, write_report

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_floats(text):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arratia-lab", description="Run Arratia flow experiments.")
    sub = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS + ("all",):
        s = sub.add_parser(name)
        s.add_argument("--seed", type=int, default=20240101)
        s.add_argument("--replicas", type=int)
        s.add_argument("--dt", type=float)
        s.add_argument("--scheme", choices=["grid", "bridge"])
        s.add_argument("--window", type=float, help="radius R of the widths window")
        s.add_argument("--grid-step", type=float, help="finite element step h")
        s.add_argument("--comb-pairs", type=int, help="comb truncation M (all t values)")
        s.add_argument("--t", type=_positive_floats, help="comma-separated times")
        s.add_argument("--eps", type=float, help="mollifier variance (gram only)")
        s.add_argument("--out", default="results")
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--no-figures", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    names = EXPERIMENTS if args.experiment == "all" else (args.experiment,)
    status = EXIT_OK
    for name in names:
        cfg = ExperimentConfig(
            experiment=name, replicas=args.replicas, seed=args.seed, dt=args.dt,
            scheme=args.scheme, window=args.window, grid_step=args.grid_step,
            comb_pairs=args.comb_pairs, t=args.t, eps=args.eps, out=args.out,
            workers=args.workers,
        )
        try:
            rep = run(cfg)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        files = write_report(rep, args.out, figures=not args.no_figures)
        print(summary(rep))
        for f in files:
            print(f"wrote {f}")
        if rep.verdict == "fail":
            status = EXIT_FAIL
    return status


if __name__ == "__main__":
    sys.exit(main())
