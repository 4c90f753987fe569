"""CLI: render figures from the benchmark and regret CSVs."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, SchemaError, plot_regret, plot_runtime


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="plots", description="Render benchmark and regret figures")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind, helptext in (("runtime", "per-iteration runtime figure"),
                           ("regret", "regret-vs-round figure")):
        sp = sub.add_parser(kind, help=helptext)
        sp.add_argument("input", help="input CSV")
        sp.add_argument("-o", "--output", required=True, help="image path")
        sp.add_argument("--ci", type=float, default=0.95,
                        help="confidence level for runtime bands")
        if kind == "regret":
            sp.add_argument("--normalized", action="store_true",
                            help="add regret/sqrt(t) and regret/ln(t) panels")
    return p


def cli_main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(input_csv=args.input, kind=args.kind,
                          output=args.output, ci_level=args.ci,
                          normalized=getattr(args, "normalized", False))
        path = plot_runtime(spec) if args.kind == "runtime" else \
            plot_regret(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
