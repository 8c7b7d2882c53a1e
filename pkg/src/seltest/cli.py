"""Command-line entry points.

Subcommands: test1, test2, meantest (run a test on a CSV), simulate
(write a synthetic dataset), replicate (re-run a benchmark table).
Exit codes: 0 success, 1 configuration or data error, 2 statistical
infeasibility (empty sample or thin near-one window). Thread count
defaults to the SELTEST_THREADS environment variable, then all cores.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .data import BandwidthPlan
from .errors import (
    ConfigurationError,
    DataError,
    EmptySampleError,
    SeltestError,
    ThinSetError,
)
from .io import ColumnRoles, emit_report, load_csv, save_plots
from .meantest import run_meantest
from .montecarlo import DgpConfig, generate_dgp, replicate_table
from .rng import RngStream
from .test1 import run_test1
from .test2 import run_test2

__all__ = ["main", "run_cli"]


def _default_threads() -> int:
    env = os.environ.get("SELTEST_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parse_taus(spec: str) -> np.ndarray:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigurationError("tau range must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        taus = np.round(np.arange(start, stop + step / 2, step), 10)
    else:
        taus = np.array([float(t) for t in spec.split(",")])
    if taus.size == 0 or np.any((taus <= 0) | (taus >= 1)):
        raise ConfigurationError("tau values must lie strictly inside (0, 1)")
    return taus


def _add_data_args(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="input CSV (header required)")
    p.add_argument("--outcome", required=True, help="outcome column name")
    p.add_argument("--selection", required=True, help="0/1 selection column name")
    p.add_argument("--x", required=True, help="comma-separated outcome covariates")
    p.add_argument("--zc", default="", help="comma-separated continuous predictors")
    p.add_argument("--zd", default="", help="comma-separated discrete predictors")
    p.add_argument("--p-col", default=None, help="column with known propensity scores")
    p.add_argument("--trim", type=float, default=0.0,
                   help="per-tail trimming fraction of selected x (default 0)")


def _add_common_args(p: argparse.ArgumentParser):
    p.add_argument("--R", type=int, default=400, help="bootstrap replications")
    p.add_argument("--alpha", default="0.05,0.10",
                   help="comma-separated significance levels")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output", default=None, help="output path (default stdout)")
    p.add_argument("--format", default="json", choices=("json", "csv", "text"))
    p.add_argument("--plot", default=None, help="prefix for static plot files")


def _add_bandwidth_args(p: argparse.ArgumentParser, default_c: float):
    p.add_argument("--c-x", type=float, default=default_c,
                   help="scaling constant of the h_x rule of thumb")
    p.add_argument("--h-x", type=float, default=None, help="fixed h_x override")
    p.add_argument("--cv", action="store_true",
                   help="pick h_x by cross-validation instead of the rule")
    p.add_argument("--order", type=int, default=3, help="local polynomial order")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="seltest",
        description="Nonparametric sample-selection tests for conditional "
        "quantile and mean functions",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("test1", help="omnibus omitted-predictor test")
    _add_data_args(p1)
    _add_common_args(p1)
    _add_bandwidth_args(p1, 4.0)
    p1.add_argument("--tau", default="0.1:0.9:0.1", help="tau grid (a:b:step or list)")

    p2 = sub.add_parser("test2", help="identification-at-infinity test")
    _add_data_args(p2)
    _add_common_args(p2)
    _add_bandwidth_args(p2, 3.5)
    p2.add_argument("--tau", default="0.1:0.9:0.1")
    p2.add_argument("--delta", type=float, default=None, help="window centre 1-H")
    p2.add_argument("--h-p", type=float, default=None, help="window width")
    p2.add_argument("--epsilon", type=float, default=0.1)
    p2.add_argument("--c-scale", type=float, default=1.0,
                    help="scaling constant of h_p(eta)")

    pm = sub.add_parser("meantest", help="conditional-mean variant of test 1")
    _add_data_args(pm)
    _add_common_args(pm)
    pm.add_argument("--c-x", type=float, default=0.25)
    pm.add_argument("--h-x", type=float, default=None)
    pm.add_argument("--multiplier", default="rademacher",
                    choices=("rademacher", "mammen"))

    ps = sub.add_parser("simulate", help="write a synthetic dataset to CSV")
    ps.add_argument("--design", default="normal",
                    choices=("normal", "binomial", "poisson", "discrete-uniform"))
    ps.add_argument("--rho", type=float, default=0.0)
    ps.add_argument("--gamma1", type=float, default=0.0)
    ps.add_argument("--sigma", type=float, default=1.0)
    ps.add_argument("--n", type=int, default=1000)
    ps.add_argument("--outcome-kind", default="cubic-quantile",
                    choices=("cubic-quantile", "quadratic-mean"))
    ps.add_argument("--instrument-variance", type=float, default=1.0)
    ps.add_argument("--seed", type=int, required=True)
    ps.add_argument("--output", required=True)

    pr = sub.add_parser("replicate", help="re-run a benchmark table case")
    pr.add_argument("--table", required=True, help="e.g. T1-caseI, T2-caseI*, S1-caseII")
    pr.add_argument("--scale", type=float, default=1.0,
                    help="fraction of the full replication count")
    pr.add_argument("--seed", type=int, required=True)
    pr.add_argument("--threads", type=int, default=None)
    pr.add_argument("--alpha", default="0.05,0.10")
    pr.add_argument("--output", default=None)
    return ap


def _roles_from_args(args) -> ColumnRoles:
    split = lambda s: [c for c in s.split(",") if c]  # noqa: E731
    return ColumnRoles(
        outcome=args.outcome,
        selection=args.selection,
        x=split(args.x),
        zc=split(args.zc),
        zd=split(args.zd),
        p=args.p_col,
    )


def _emit(report, args) -> None:
    text = emit_report(report, args.format, args.output)
    if args.output is None:
        sys.stdout.write(text)
    if args.plot:
        save_plots(report, args.plot)


def _cmd_test1(args) -> int:
    data, p = load_csv(args.input, _roles_from_args(args))
    plan = BandwidthPlan(
        c_x=args.c_x, r=args.order,
        h_x=np.full(data.d_x, args.h_x) if args.h_x else None,
    )
    report = run_test1(
        data,
        plan=plan,
        R=args.R,
        alphas=[float(a) for a in args.alpha.split(",")],
        stream=RngStream(args.seed),
        tau_grid=_parse_taus(args.tau),
        p_score=p,
        hx_method="cv" if args.cv else "rule",
        trim=args.trim,
    )
    _emit(report, args)
    return 0


def _cmd_test2(args) -> int:
    data, p = load_csv(args.input, _roles_from_args(args))
    plan = BandwidthPlan(
        c_x=args.c_x, r=args.order,
        h_x=np.full(data.d_x, args.h_x) if args.h_x else None,
        delta=args.delta, h_p=args.h_p,
        epsilon=args.epsilon, c_scale=args.c_scale,
    )
    report = run_test2(
        data,
        plan=plan,
        tau_grid=_parse_taus(args.tau),
        R=args.R,
        alphas=[float(a) for a in args.alpha.split(",")],
        stream=RngStream(args.seed),
        p_score=p,
        hx_method="cv" if args.cv else "rule",
        trim=args.trim,
    )
    _emit(report, args)
    return 0


def _cmd_meantest(args) -> int:
    data, p = load_csv(args.input, _roles_from_args(args))
    plan = BandwidthPlan(
        c_x=args.c_x,
        h_x=np.full(data.d_x, args.h_x) if args.h_x else None,
    )
    report = run_meantest(
        data,
        plan=plan,
        R=args.R,
        alphas=[float(a) for a in args.alpha.split(",")],
        stream=RngStream(args.seed),
        p_score=p,
        multiplier=args.multiplier,
        trim=args.trim,
    )
    _emit(report, args)
    return 0


def _cmd_simulate(args) -> int:
    config = DgpConfig(
        design=args.design, rho=args.rho, gamma1=args.gamma1, sigma=args.sigma,
        n=args.n, outcome=args.outcome_kind,
        instrument_variance=args.instrument_variance,
    )
    data, p = generate_dgp(config, RngStream(args.seed))
    z = data.zc if data.zc is not None else data.zd
    lines = ["y,x,z,s,p_true"]
    for i in range(data.n):
        y = "" if data.s[i] == 0 else repr(float(data.y[i]))
        lines.append(
            f"{y},{data.x[i, 0]!r},{float(z[i, 0])!r},{int(data.s[i])},{p[i]!r}"
        )
    text = "\n".join(lines) + "\n"
    with open(args.output, "w") as fh:
        fh.write(text)
    return 0


def _cmd_replicate(args) -> int:
    threads = args.threads if args.threads is not None else _default_threads()
    _, table = replicate_table(
        args.table,
        scale=args.scale,
        stream=RngStream(args.seed),
        alphas=[float(a) for a in args.alpha.split(",")],
        threads=threads,
    )
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)
    return 0


_COMMANDS = {
    "test1": _cmd_test1,
    "test2": _cmd_test2,
    "meantest": _cmd_meantest,
    "simulate": _cmd_simulate,
    "replicate": _cmd_replicate,
}


def run_cli(argv=None) -> int:
    """Parse arguments and run; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except (ThinSetError, EmptySampleError) as e:
        print(f"seltest: {e}", file=sys.stderr)
        return 2
    except (ConfigurationError, DataError) as e:
        print(f"seltest: {e}", file=sys.stderr)
        return 1
    except SeltestError as e:
        print(f"seltest: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
