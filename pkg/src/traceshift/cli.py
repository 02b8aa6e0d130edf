"""Command-line front end.

Verbs:
    traceshift run <config>
    traceshift verify --suite {identities|bounds|ssf} --seed S --dim N --order n
    traceshift bump --a A --b B --eps E --samples M
    traceshift constants --store PATH [--order K --instances M --seed S]

Exit codes: 0 all checks passed (or informational), 1 at least one check
failed, 2 usage or configuration error.  TRACESHIFT_OUTDIR sets the default
output directory.
"""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, load_config
from .constants import ConstantStore, output_dir
from .errors import ConfigError, TraceshiftError
from .harness import run_experiment, suite_bounds, suite_identities, suite_ssf


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="traceshift",
        description="Trace-functional perturbation checks on weighted matrix algebras")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a declarative experiment config")
    p_run.add_argument("config", help="path to a key = value config file")

    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("--suite", required=True, choices=("identities", "bounds", "ssf"))
    p_ver.add_argument("--seed", type=int, default=1)
    p_ver.add_argument("--dim", type=int, default=5)
    p_ver.add_argument("--order", type=int, default=2)
    p_ver.add_argument("--grid-size", type=int, default=257)
    p_ver.add_argument("--workers", type=int, default=1)
    p_ver.add_argument("--out", default=None)

    p_bump = sub.add_parser("bump", help="sample the plateau bump to CSV")
    p_bump.add_argument("--a", type=float, required=True)
    p_bump.add_argument("--b", type=float, required=True)
    p_bump.add_argument("--eps", type=float, required=True)
    p_bump.add_argument("--samples", type=int, default=512)
    p_bump.add_argument("--depth", type=int, default=4)
    p_bump.add_argument("--out", default=None)

    p_const = sub.add_parser("constants", help="show or extend the empirical constant store")
    p_const.add_argument("--store", required=True)
    p_const.add_argument("--order", type=int, default=0,
                         help="estimate constants up to this order (0 = show only)")
    p_const.add_argument("--instances", type=int, default=40)
    p_const.add_argument("--seed", type=int, default=1)
    p_const.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            report = run_experiment(load_config(args.config))
        elif args.command == "verify":
            outdir = args.out or output_dir()
            if args.suite == "identities":
                report = suite_identities(args.seed, args.dim, args.order,
                                          workers=args.workers)
            elif args.suite == "bounds":
                report = suite_bounds(args.seed, args.dim, args.order,
                                      workers=args.workers)
            else:
                report = suite_ssf(args.seed, args.dim, args.order,
                                   grid_size=args.grid_size, workers=args.workers)
            report.write(outdir)
        elif args.command == "bump":
            cfg = ExperimentConfig(task="bump", a=args.a, b=args.b, eps=args.eps,
                                   samples=args.samples, depth=args.depth,
                                   output=args.out)
            report = run_experiment(cfg)
        elif args.command == "constants":
            if args.order > 0:
                cfg = ExperimentConfig(task="constants", order=args.order,
                                       instances=args.instances, seed=args.seed,
                                       store=args.store, output=args.out)
                report = run_experiment(cfg)
            else:
                store = ConstantStore(args.store)
                for key, rec in store.snapshot().items():
                    print(f"{key}: sup={rec['value']:.6g} (n={rec['count']})")
                return 0
        else:  # pragma: no cover - argparse guards
            parser.error(f"unknown command {args.command}")
            return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TraceshiftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summary = report.summary()
    print(f"{report.name}: {summary['pass']} pass, {summary['info']} info, "
          f"{summary['fail']} fail")
    return 1 if report.any_fail else 0


if __name__ == "__main__":
    raise SystemExit(main())
