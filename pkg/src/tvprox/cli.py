"""Command line entry point ``tvprox``.

Exit status: 0 on success, 2 when a solver stops before meeting its
tolerance (the result is still written), 3 on I/O, format or argument
errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import apps
from .core import SolverOptions
from .io import FormatError, read_array, read_csv, read_matrix_csv, read_tvt, write_array
from .tvnd import AxisSpec, prox_tv2d, prox_tvnd

EXIT_OK = 0
EXIT_NONCONVERGED = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as non-convergence
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


def _float(text):
    v = float(text)
    if math.isnan(v):
        raise argparse.ArgumentTypeError("NaN is not allowed")
    return v


def _options(args):
    kw = {}
    if getattr(args, "tol", None) is not None:
        kw["gap_tol"] = args.tol
        kw["stop_tol"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        kw["max_iter"] = args.max_iter
    if getattr(args, "workers", None) is not None:
        kw["workers"] = args.workers
    return SolverOptions(**kw)


def _emit(path, X):
    if path is None:
        np.savetxt(sys.stdout, np.asarray(X).reshape(-1, 1), fmt="%.17g")
    else:
        write_array(path, X)


def _status(rep, quiet=False):
    if not quiet:
        print(
            f"solver={rep.solver} iterations={rep.iterations} gap={rep.duality_gap:.3g} "
            f"converged={rep.converged} time={rep.wall_time:.4f}s",
            file=sys.stderr,
        )
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_prox1d(args):
    y = read_csv(args.input)
    if args.weights is not None:
        lam = read_csv(args.weights)
        if lam.size != y.size - 1:
            raise FormatError(f"weights need {y.size - 1} entries, found {lam.size}")
        if np.any(lam < 0):
            raise FormatError("weights must be nonnegative")
    else:
        lam = args.lam
    x, rep = apps.solve_1d(y, lam, args.p, args.solver, _options(args))
    _emit(args.output, x)
    return _status(rep, args.quiet)


def cmd_prox2d(args):
    Y = read_array(args.input)
    if Y.ndim != 2:
        raise FormatError("prox2d needs a 2D image")
    X, rep = prox_tv2d(Y, (args.lambda_rows, args.p), (args.lambda_cols, args.q), args.combiner, _options(args))
    _emit(args.output, X)
    return _status(rep, args.quiet)


def cmd_proxnd(args):
    Y = read_tvt(args.input) if args.input.lower().endswith(".tvt") else read_array(args.input)
    spec = AxisSpec.parse(args.spec, Y.ndim)
    X, rep = prox_tvnd(Y, spec, args.combiner, _options(args))
    _emit(args.output, X)
    return _status(rep, args.quiet)


def cmd_flsa(args):
    Y = read_array(args.input)
    if Y.ndim == 1:
        _emit(args.output, apps.flsa(Y, args.l1, args.l2))
        return EXIT_OK
    X, rep = apps.flsa_2d(Y, args.l1, args.l2, args.combiner, _options(args))
    _emit(args.output, X)
    return _status(rep, args.quiet)


def cmd_fusedlasso(args):
    A = read_matrix_csv(args.design)
    y = read_csv(args.response)
    prob = apps.FusedLassoProblem(A, y, args.l1, args.l2, args.loss, args.p)
    x, rep = apps.solve_fused_lasso(prob, _options(args), tol=args.rel_tol)
    _emit(args.output, x)
    if "intercept" in rep.extra and not args.quiet:
        print(f"intercept={rep.extra['intercept']:.17g}", file=sys.stderr)
    return _status(rep, args.quiet)


def cmd_denoise(args):
    Y = read_array(args.input)
    if args.spec is not None:
        spec = AxisSpec.parse(args.spec, Y.ndim)
    elif args.lam is not None:
        spec = AxisSpec.uniform(Y.ndim, args.lam, args.p)
    else:
        raise UsageError("denoise needs --lambda or --spec")
    X, rep = apps.denoise(Y, spec, args.combiner, _options(args))
    _emit(args.output, X)
    return _status(rep, args.quiet)


def cmd_isnr(args):
    mu, mu0, X = (read_array(p) for p in (args.original, args.noisy, args.restored))
    print(f"{apps.isnr(mu, mu0, X):.6f}")
    return EXIT_OK


def cmd_bench(args):
    solvers = [s for s in args.solvers.split(",") if s]
    grid = None
    if args.grid:
        grid = [float(g) for g in args.grid.split(",")]
        if args.scenario != "penalty":
            grid = [int(g) for g in grid]
    report = apps.bench(
        args.scenario, solvers, p=args.p, grid=grid, repeats=args.repeats, seed=args.seed, max_n=args.max_n
    )
    try:
        with open(args.emit, "w") as fh:
            json.dump(report, fh, indent=1)
    except OSError as exc:
        raise FormatError(f"cannot write {args.emit}: {exc}") from exc
    failed = sum("error" in c for c in report["cells"])
    if not args.quiet:
        print(f"{len(report['cells'])} cells, {failed} failed -> {args.emit}", file=sys.stderr)
    return EXIT_OK


def build_parser():
    ap = _Parser(prog="tvprox", description="Total-variation proximity operators.")
    ap.add_argument("--quiet", action="store_true", help="no status line on stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, tol=True):
        if tol:
            p.add_argument("--tol", type=_float, help="gap / stopping tolerance")
        p.add_argument("--max-iter", type=int, dest="max_iter")
        p.add_argument("--workers", type=int)
        p.add_argument("--output", "-o", help="output file (.csv, .pgm, .tvt); stdout if omitted")

    p = sub.add_parser("prox1d", help="1D TV prox of a CSV signal")
    p.add_argument("--input", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", type=_float, dest="lam")
    g.add_argument("--weights", help="CSV with n-1 per-edge penalties (p = 1)")
    p.add_argument("--p", type=_float, default=1.0)
    p.add_argument("--solver", choices=sorted(apps.SOLVERS), default="auto")
    common(p)
    p.set_defaults(func=cmd_prox1d)

    p = sub.add_parser("prox2d", help="2D anisotropic TV prox of an image")
    p.add_argument("--input", required=True)
    p.add_argument("--lambda-rows", type=_float, dest="lambda_rows", required=True)
    p.add_argument("--lambda-cols", type=_float, dest="lambda_cols", required=True)
    p.add_argument("--p", type=_float, default=1.0, help="norm on row differences")
    p.add_argument("--q", type=_float, default=1.0, help="norm on column differences")
    p.add_argument("--combiner", choices=("dr", "pd", "admm"), default="dr")
    common(p)
    p.set_defaults(func=cmd_prox2d)

    p = sub.add_parser("proxnd", help="N-D anisotropic TV prox of a TVT1 tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--spec", required=True, help="axis terms k=lam:p, comma separated")
    p.add_argument("--combiner", choices=("ppd", "admm"), default="ppd")
    common(p)
    p.set_defaults(func=cmd_proxnd)

    p = sub.add_parser("flsa", help="fused-lasso signal approximator (1D CSV or 2D image)")
    p.add_argument("--input", required=True)
    p.add_argument("--l1", type=_float, required=True)
    p.add_argument("--l2", type=_float, required=True)
    p.add_argument("--combiner", choices=("dr", "pd", "admm"), default="dr")
    common(p)
    p.set_defaults(func=cmd_flsa)

    p = sub.add_parser("fusedlasso", help="fused lasso regression or classification")
    p.add_argument("--design", required=True, help="CSV matrix, one row per sample")
    p.add_argument("--response", required=True, help="single-column CSV")
    p.add_argument("--l1", type=_float, default=0.0)
    p.add_argument("--l2", type=_float, default=0.0)
    p.add_argument("--loss", choices=("ls", "logistic"), default="ls")
    p.add_argument("--p", type=_float, default=1.0)
    p.add_argument("--rel-tol", type=_float, dest="rel_tol", default=1e-10)
    common(p, tol=False)
    p.set_defaults(func=cmd_fusedlasso)

    p = sub.add_parser("denoise", help="TV denoising of an image or tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--lambda", type=_float, dest="lam")
    p.add_argument("--p", type=_float, default=1.0)
    p.add_argument("--spec", help="axis terms k=lam:p, overrides --lambda")
    p.add_argument("--combiner", choices=("dr", "pd", "admm", "ppd"))
    common(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("isnr", help="ISNR in dB of a restoration")
    p.add_argument("--original", required=True)
    p.add_argument("--noisy", required=True)
    p.add_argument("--restored", required=True)
    p.set_defaults(func=cmd_isnr)

    p = sub.add_parser("bench", help="run a benchmark scenario and write JSON")
    p.add_argument("--scenario", choices=apps.BENCH_SCENARIOS, required=True)
    p.add_argument("--emit", required=True)
    p.add_argument("--solvers", default="classic,linearized,hybrid,pn")
    p.add_argument("--p", type=_float, default=1.0)
    p.add_argument("--grid", help="comma separated sizes (or lambdas for 'penalty')")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-n", type=int, dest="max_n", default=10**6)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, UsageError, ValueError) as exc:
        print(f"tvprox {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except RuntimeError as exc:
        print(f"tvprox {args.command}: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
