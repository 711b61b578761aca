"""Command line interface: ``omegalab <command> [options]``.

Exit codes: 0 success, 1 usage or input error, 2 infeasible configuration,
3 tolerance failure (including a failed sample audit).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

from ..errors import (
    CapacityError,
    CutoffError,
    DegenerateFormsError,
    DomainError,
    InfeasibleConfigError,
    InsufficientPrimesError,
    ToleranceError,
)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_TOLERANCE = 0, 1, 2, 3
CACHE_ENV = "OMEGALAB_CACHE_DIR"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--cache-dir", default=d(None), help=f"prime cache directory (default: ${CACHE_ENV})")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads")
    p.add_argument("--format", choices=("csv", "json"), default=d("csv"), help="output format")
    p.add_argument("--seed", type=int, default=d(None), help="override the seed")


def _int_arg(text: str) -> int:
    try:
        v = float(text) if any(c in text.lower() for c in "e.") else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if isinstance(v, float):
        if not v.is_integer():
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
        v = int(v)
    return v


def _triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected P,Q,H")
    return tuple(float(p) for p in parts)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    parser = _Parser(prog="omegalab", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        return sub.add_parser(name, help=help_text, parents=[common], description=help_text)

    p = add("primes", "list or count the primes up to a limit")
    p.add_argument("--limit", type=_int_arg, required=True)
    p.add_argument("--count", action="store_true", help="print only the number of primes")

    p = add("sieve", "factor every integer in (x, x + len]")
    p.add_argument("--x", type=_int_arg, required=True)
    p.add_argument("--len", type=_int_arg, required=True)

    p = add("pik", "count integers with omega(n) = k in (x, x + len]")
    p.add_argument("--x", type=_int_arg, required=True)
    p.add_argument("--len", type=_int_arg, required=True)
    p.add_argument("--k", type=int, help="omit to print the whole omega histogram")

    p = add("friable", "count bound-friable integers in (x, x + len]")
    p.add_argument("--x", type=_int_arg, required=True)
    p.add_argument("--len", type=_int_arg, required=True)
    p.add_argument("--bound", type=_int_arg, required=True)

    p = add("dickman", "tabulate the Dickman function")
    p.add_argument("--umax", type=float, default=30.0)
    p.add_argument("--step", type=float, default=1.0 / 128)
    p.add_argument("--tol", type=float, default=1e-13)
    p.add_argument("--u", type=float, action="append", default=[], help="evaluation point (repeatable)")
    p.add_argument("--out", help="binary table file")
    p.add_argument("--csv", help="CSV grid file")

    p = add("lambda", "evaluate the Euler-product factor lambda(z)")
    p.add_argument("--z", type=complex, required=True, help="e.g. 0.5 or 0.5+0.2j")
    p.add_argument("--cutoff", type=_int_arg, default=10**6)
    p.add_argument("--tol", type=float, help="fail (exit 3) if the tail bound exceeds this")

    p = add("sset", "build, save or measure an S configuration")
    p.add_argument("--mode", choices=("manual", "smallk", "paper"), default="manual")
    p.add_argument("--X", type=_int_arg, required=True)
    p.add_argument("--layer", type=_triple, action="append", default=[], help="P,Q,H (repeatable)")
    p.add_argument("--infinity", type=_triple, help="P,Q,H of the layer at infinity")
    p.add_argument("--eps", type=float)
    p.add_argument("--r", type=float, default=1.0)
    for name in ("h", "delta", "theta", "K", "P1", "Pinf", "Qinf"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--out", help="write the configuration text here")
    p.add_argument("--measure", metavar="SET", help="count SET and SET minus S on [X, 2X]")

    p = add("seldel", "recover omega counts by a Cauchy contour integral")
    p.add_argument("--x", type=_int_arg, required=True)
    p.add_argument("--len", type=_int_arg, required=True)
    p.add_argument("--k", type=int, action="append", required=True, help="repeatable")
    p.add_argument("--nodes", type=int, default=64)
    p.add_argument("--friable", type=_int_arg, help="weight by the indicator of bound-friable n")

    p = add("poly", "Dirichlet polynomial checks: factorisation or mean values")
    p.add_argument("--mode", choices=("facto", "mvt"), default="facto")
    p.add_argument("--X", type=_int_arg, required=True)
    p.add_argument("--layer", type=_triple, action="append", default=[])
    p.add_argument("--infinity", type=_triple)
    p.add_argument("--set", default="all", help="all, E3, friable:100, random:0.05")
    p.add_argument("--j", default="1", help="layer index or 'inf'")
    p.add_argument("--samples", type=int, default=200, help="number of heights t")
    p.add_argument("--T", type=float, default=100.0)
    p.add_argument("--quad-step", type=float, default=0.05)

    p = add("experiment", "run or list experiments")
    esub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    r = esub.add_parser("run", help="run a spec file", parents=[common])
    r.add_argument("spec", help="TOML spec file")
    r.add_argument("--out-dir", default=".", help="directory for the report files")
    r.add_argument("--stem", help="base name of the report files (default: spec file stem)")
    r.add_argument("--timing", action="store_true", help="record runtime_ms")
    r.add_argument("--no-figures", action="store_true")
    r.add_argument("--audit", type=int, default=5, help="samples recounted by trial division")
    esub.add_parser("list", help="list experiment kinds", parents=[common])
    return parser


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _emit_rows(args, header: list, rows: list) -> None:
    if args.format == "json":
        json.dump([dict(zip(header, r)) for r in rows], sys.stdout, indent=2)
        sys.stdout.write("\n")
        return
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def _emit_value(args, name: str, value, **context) -> None:
    if args.format == "json":
        json.dump({**context, name: value}, sys.stdout)
        sys.stdout.write("\n")
    else:
        print(value)


def _cache_dir(args):
    return args.cache_dir or os.environ.get(CACHE_ENV) or None


def _primes_for(args, top: int):
    from ..sieve import load_primes

    return load_primes(math.isqrt(int(top)), _cache_dir(args))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_primes(args) -> int:
    from ..sieve import load_primes

    table = load_primes(args.limit, _cache_dir(args))
    if args.count:
        _emit_value(args, "count", len(table), limit=args.limit)
    else:
        _emit_rows(args, ["p"], [[int(p)] for p in table.primes])
    return EXIT_OK


def cmd_sieve(args) -> int:
    from ..sieve import sieve_interval

    t = sieve_interval(args.x, args.len, _primes_for(args, args.x + args.len), threads=args.threads)
    rows = []
    for e in t.entries():
        text = "*".join(f"{p}^{a}" if a > 1 else str(p) for p, a in e.factors)
        rows.append([e.n, e.omega, e.bigomega, e.largest_prime, text])
    _emit_rows(args, ["n", "omega", "bigomega", "largest_prime", "factors"], rows)
    return EXIT_OK


def cmd_pik(args) -> int:
    from ..sieve import count_pik, omega_histogram

    primes = _primes_for(args, args.x + args.len)
    if args.k is None:
        hist = omega_histogram(args.x, args.len, primes, threads=args.threads)
        _emit_rows(args, ["k", "count"], [[k, int(c)] for k, c in enumerate(hist)])
    else:
        n = count_pik(args.x, args.len, args.k, primes, threads=args.threads)
        _emit_value(args, "count", n, x=args.x, len=args.len, k=args.k)
    return EXIT_OK


def cmd_friable(args) -> int:
    from ..sieve import count_friable

    n = count_friable(args.x, args.len, args.bound, _primes_for(args, args.x + args.len), threads=args.threads)
    _emit_value(args, "count", n, x=args.x, len=args.len, bound=args.bound)
    return EXIT_OK


def cmd_dickman(args) -> int:
    from ..specialfn import dickman_build

    table = dickman_build(args.umax, args.step, args.tol)
    if args.out:
        table.save(args.out)
    if args.csv:
        table.to_csv(args.csv)
    us = args.u or [1.0, 2.0, 3.0, 5.0, 10.0]
    rows = [[u, repr(float(table.rho(u)))] for u in us]
    if args.format == "json":
        json.dump({"umax": table.umax, "step": table.step,
                   "integrator_agreement": table.integrator_agreement,
                   "identity_residual": table.identity_residual,
                   "values": [{"u": u, "rho": float(table.rho(u))} for u in us]}, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        _emit_rows(args, ["u", "rho"], rows)
    return EXIT_OK


def cmd_lambda(args) -> int:
    from ..specialfn import lambda_fn

    lv = lambda_fn(args.z, args.cutoff, tol=args.tol)
    val = complex(lv.value)
    if args.format == "json":
        json.dump({"z": [args.z.real, args.z.imag], "re": val.real, "im": val.imag,
                   "tail_bound": lv.tail_bound, "cutoff": lv.cutoff}, sys.stdout)
        sys.stdout.write("\n")
    else:
        _emit_rows(args, ["re", "im", "tail_bound", "cutoff"],
                   [[repr(val.real), repr(val.imag), repr(lv.tail_bound), lv.cutoff]])
    return EXIT_OK


def cmd_sset(args) -> int:
    from ..sieve import parse_integer_set
    from ..sset import build_config_manual, build_config_paper, build_config_smallk, measure_complement

    if args.mode == "manual":
        config = build_config_manual(args.layer, args.X, args.infinity, r=args.r)
    elif args.mode == "smallk":
        if args.eps is None:
            raise _UsageError("--mode smallk needs --eps")
        config = build_config_smallk(args.X, args.eps)
    else:
        need = ("h", "eps", "delta", "theta", "K", "P1", "Pinf", "Qinf")
        missing = [n for n in need if getattr(args, n) is None]
        if missing:
            raise _UsageError("--mode paper needs " + ", ".join("--" + n for n in missing))
        config = build_config_paper(args.X, args.h, args.r, args.eps, args.delta, args.theta, args.K,
                                    args.P1, args.Pinf, args.Qinf)
    text = config.to_text()
    if args.out:
        Path(args.out).write_text(text)
    if not config.feasible:
        sys.stdout.write(text)
        for v in config.violations:
            print(f"infeasible: {v}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.measure:
        m = measure_complement(args.X, config, parse_integer_set(args.measure),
                               primes=_primes_for(args, 2 * args.X), threads=args.threads)
        _emit_rows(args, ["count_A", "count_A_minus_S", "bound_rhs"],
                   [[m.count_A, m.count_A_minus_S, repr(m.bound_rhs)]])
    elif not args.out:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_seldel(args) -> int:
    from ..seldel import WeightedOmega, cauchy_pik, constant_one, friable_indicator

    f = friable_indicator(args.friable) if args.friable is not None else constant_one()
    data = WeightedOmega.build(args.x, args.len, f, _primes_for(args, args.x + args.len), args.threads)
    rows = []
    for k in args.k:
        est = cauchy_pik(args.x, args.len, k, f, args.nodes, data=data)
        exact = math.fsum(data.weights[data.omega == k].tolist())
        rows.append([k, args.nodes, repr(est), exact, repr(abs(est - exact))])
    _emit_rows(args, ["k", "nodes", "estimate", "exact", "abs_err"], rows)
    return EXIT_OK


def cmd_poly(args) -> int:
    from .experiments import RunOptions, run_experiment
    from .spec import ExperimentSpec

    kind = "facto_check" if args.mode == "facto" else "mvt_diag"
    spec = ExperimentSpec(kind=kind, X=args.X, samples=args.samples, seed=args.seed or 0,
                          layers=tuple(args.layer), infinity=args.infinity, set=args.set,
                          j=args.j if args.j == "inf" else int(args.j), T=args.T, quad_step=args.quad_step)
    report = run_experiment(spec, RunOptions(args.threads, _cache_dir(args)))
    agg = {k: v for k, v in report.aggregate.items()
           if k not in ("mean_ratio", "median_ratio", "exceptional_fraction", "min_ratio", "max_ratio", "std_ratio")}
    if args.format == "json":
        sys.stdout.write(json.dumps(agg, indent=2, default=str) + "\n")
    else:
        _emit_rows(args, ["key", "value"], [[k, v] for k, v in agg.items()])
    if kind == "facto_check" and not agg["identity_holds"]:
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiments import RunOptions, run_experiment
    from .report import write_bundle
    from .spec import KIND_DOCS, KINDS, load_spec

    if args.action == "list":
        _emit_rows(args, ["kind", "description"], [[k, KIND_DOCS[k]] for k in KINDS])
        return EXIT_OK
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    opts = RunOptions(threads=max(1, args.threads), cache_dir=_cache_dir(args), audit=args.audit)
    report = run_experiment(spec, opts, timing=args.timing)
    stem = args.stem or Path(args.spec).stem
    paths = write_bundle(report, args.out_dir, stem, figures=not args.no_figures)
    for p in paths:
        print(p)
    audit = report.aggregate.get("audit")
    if audit is not None and not audit["passed"]:
        print(f"audit mismatch at samples {audit['mismatches']}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


COMMANDS = {
    "primes": cmd_primes,
    "sieve": cmd_sieve,
    "pik": cmd_pik,
    "friable": cmd_friable,
    "dickman": cmd_dickman,
    "lambda": cmd_lambda,
    "sset": cmd_sset,
    "seldel": cmd_seldel,
    "poly": cmd_poly,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except InfeasibleConfigError as exc:
        for v in exc.violations:
            print(f"infeasible: {v}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ToleranceError, CutoffError) as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (_UsageError, DomainError, DegenerateFormsError, InsufficientPrimesError, CapacityError,
            FileNotFoundError, ValueError, IndexError) as exc:
        print(f"omegalab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
