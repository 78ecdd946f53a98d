"""Command line entry point ``ichol-half``."""
from __future__ import annotations

import argparse
import logging
import sys

from .experiment import (MATRIX_DIR_ENV, SUITESPARSE_IDS, ExperimentConfig,
                         ExperimentError, reports_to_csv, reports_to_json,
                         run_experiment, suitesparse_url)
from .factorize import IcOptions
from .fixtures import FIXTURES
from .halffloat import FORMATS
from .krylov import IrConfig


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ichol-half",
        description="Incomplete Cholesky preconditioners computed in emulated "
                    "low precision, used inside mixed precision iterative "
                    "refinement.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline on one or more matrices")
    run.add_argument("--matrix", action="append", required=True,
                     help="Matrix Market path, fixture:NAME[:k=v,...], or a "
                          f"SuiteSparse id looked up in ${MATRIX_DIR_ENV}; "
                          "repeat for a batch")
    run.add_argument("--level", type=int, default=2, help="IC level of fill (default 2)")
    run.add_argument("--precision", choices=sorted(FORMATS), default="fp16")
    run.add_argument("--tau-u", type=float, default=None,
                     help="B1 threshold (default depends on precision)")
    group = run.add_mutually_exclusive_group()
    group.add_argument("--lookahead", dest="lookahead", action="store_true",
                       default=True, help="test future pivots early (default)")
    group.add_argument("--no-lookahead", dest="lookahead", action="store_false")
    group.add_argument("--gmw", type=float, metavar="BETA", default=None,
                       help="GMW(BETA) local pivot modification (disables look-ahead)")
    run.add_argument("--shift-init", type=float, default=1e-3)
    run.add_argument("--max-restarts", type=int, default=40)
    run.add_argument("--flush-tol", type=float, default=1e-5,
                     help="drop scaled entries below this before squeezing")
    run.add_argument("--solver", choices=("gmres", "cg"), default="gmres")
    run.add_argument("--inner-tol", type=float, default=None)
    run.add_argument("--max-inner", type=int, default=1000)
    run.add_argument("--max-outer", type=int, default=20)
    run.add_argument("--delta", type=float, default=None)
    run.add_argument("--seed", type=int, default=0,
                     help="seed for synthetic fixtures")
    run.add_argument("--format", choices=("json", "csv"), default=None,
                     help="output format (default: from --out suffix, else json)")
    run.add_argument("--out", default="-", help="output file (default stdout)")

    sub.add_parser("fixtures", help="list built-in fixture names")
    sub.add_parser("urls", help="print download URLs of the SuiteSparse test set")
    return p


def _configs(args):
    ic = IcOptions(precision=args.precision, tau_u=args.tau_u,
                   lookahead=args.lookahead and args.gmw is None, gmw=args.gmw,
                   shift_init=args.shift_init, max_restarts=args.max_restarts)
    ir_kw = dict(max_inner=args.max_inner, itmax_outer=args.max_outer,
                 solver=args.solver)
    if args.inner_tol is not None:
        ir_kw["inner_tol"] = args.inner_tol
    if args.delta is not None:
        ir_kw["delta"] = args.delta
    ir = IrConfig(**ir_kw)
    fmt = args.format or ("csv" if args.out.endswith(".csv") else "json")
    return [ExperimentConfig(matrix=m, level=args.level, ic=ic, ir=ir,
                             output=fmt, seed=args.seed, flush_tol=args.flush_tol)
            for m in args.matrix]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "fixtures":
        for name in FIXTURES:
            print(name)
        return 0
    if args.command == "urls":
        for ident in SUITESPARSE_IDS:
            print(f"{ident}\t{suitesparse_url(ident)}")
        return 0

    try:
        cfgs = _configs(args)
    except ValueError as exc:
        print(f"ichol-half: {exc}", file=sys.stderr)
        return 2
    reports = []
    status = 0
    for cfg in cfgs:
        try:
            reports.append(run_experiment(cfg))
        except (ExperimentError, FileNotFoundError) as exc:
            print(f"ichol-half: {cfg.matrix}: {exc}", file=sys.stderr)
            status = 1
    text = (reports_to_csv if cfgs[0].output == "csv" else reports_to_json)(reports)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
