"""Command-line entry point: projection benchmark, regret experiments, and
checkpoint summaries, all emitting RFC-4180 CSV."""

from __future__ import annotations

import argparse
import logging
import sys

from . import bench
from .environment import load_env_config, make_env_spec
from .model import load_config


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="semibandits",
        description="Combinatorial semi-bandit benchmark and regret harness")
    sub = p.add_subparsers(dest="command", required=True)

    bp = sub.add_parser("bench-proj",
                        help="per-iteration projection runtime study")
    bp.add_argument("--out", required=True, help="output CSV path ('-' = stdout)")
    bp.add_argument("--m", type=int, default=5)
    bp.add_argument("--iters", type=int, default=25)
    bp.add_argument("--eps", type=float, default=1e-9)
    bp.add_argument("--seed", type=int, default=0)
    bp.add_argument("--K-min", type=int, default=10, dest="k_min")
    bp.add_argument("--K-max", type=int, default=100, dest="k_max")
    bp.add_argument("--K-step", type=int, default=10, dest="k_step")

    rp = sub.add_parser("regret", help="run regret experiments")
    rp.add_argument("--algo", choices=("ftrl", "osmd"), default="ftrl")
    rp.add_argument("--regularizer", choices=("shannon", "quadratic", "tsallis"),
                    default="tsallis", help="potential for the osmd engine")
    rp.add_argument("--K", type=int, default=8)
    rp.add_argument("--m", type=int, default=2)
    rp.add_argument("--d", type=int, default=3)
    rp.add_argument("--T", type=int, default=4096)
    rp.add_argument("--regime", choices=tuple(bench.REGIME_NAMES),
                    nargs="+", default=["stoch"])
    rp.add_argument("--C", type=float, default=0.0,
                    help="corruption budget (corrupt regime)")
    rp.add_argument("--seeds", type=int, default=20,
                    help="number of independent runs per regime")
    rp.add_argument("--seed", type=int, default=0, help="base seed")
    rp.add_argument("--eps", type=float, default=1e-9)
    rp.add_argument("--out", required=True)
    rp.add_argument("--config", default=None,
                    help="problem config file overriding size flags")
    rp.add_argument("--schedule-scale", type=float,
                    default=bench.DESK_SCHEDULE["schedule_scale"],
                    help="joint rescaling of the c1/c2 schedule constants "
                         "(1.0 = canonical)")
    rp.add_argument("--exploration-scale", type=float,
                    default=bench.DESK_SCHEDULE["exploration_scale"])
    rp.add_argument("--mgr-scale", type=float,
                    default=bench.DESK_SCHEDULE["mgr_scale"])
    rp.add_argument("--theta-out", default=None,
                    help="JSON sidecar with the ground-truth coefficients")

    sp = sub.add_parser("summarize", help="checkpoint summary of a regret CSV")
    sp.add_argument("input", help="regret CSV produced by the regret command")
    sp.add_argument("--out", default="-")
    return p


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "bench-proj":
            records = bench.bench_projection(
                m=args.m, k_grid=range(args.k_min, args.k_max + 1, args.k_step),
                iters=args.iters, eps=args.eps, seed=args.seed)
            bench.write_bench_csv(args.out, records)
            return 0
        if args.command == "regret":
            K, m, d, T = args.K, args.m, args.d, args.T
            seed, eps = args.seed, args.eps
            schedule = {"schedule_scale": args.schedule_scale,
                        "exploration_scale": args.exploration_scale,
                        "mgr_scale": args.mgr_scale}
            env_overrides = None
            if args.config:
                cfg = load_config(args.config)
                K, m, d, T = cfg.K, cfg.m, cfg.d, cfg.T
                seed, eps = cfg.seed, cfg.eps_proj
                try:
                    env_overrides = load_env_config(args.config)
                except KeyError:
                    pass    # no [environment] section; flags rule
            regimes = [bench.REGIME_NAMES[r] for r in args.regime]
            records, failures = bench.regret_experiment(
                regimes, args.algo, K, m, d, T, args.seeds, seed=seed,
                C=args.C, eps=eps, reg_name=args.regularizer,
                schedule=schedule, env_overrides=env_overrides)
            bench.write_run_csv(args.out, records)
            if args.theta_out:
                for regime in regimes:
                    spec = make_env_spec(regime, K, m, d, seed=seed,
                                         corruption_budget=args.C, T=T)
                    path = (args.theta_out if len(regimes) == 1 else
                            f"{args.theta_out}.{regime}")
                    spec.export_theta(path)
            return 1 if failures else 0
        if args.command == "summarize":
            rows = bench.summarize_file(args.input)
            bench.write_summary_csv(args.out, rows)
            return 0
    except BrokenPipeError:
        return 1
    except Exception as exc:
        logging.getLogger(__name__).error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
