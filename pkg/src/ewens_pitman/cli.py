"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 usage error (bad flags, invalid
parameters or unreadable input).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import covariance, exact_moments, martingale, montecarlo, oracle
from .ep_sampler import ModelParams, PartitionState, geometric_schedule, run
from .exceptions import DomainError, IngestError, ParameterError
from .statistics import alpha_ci

__all__ = ["main", "ingest_partition", "export_partition", "build_parser"]


# ------------------------------------------------------------------ ingest

def ingest_partition(path) -> PartitionState:
    """Read ``r,count`` lines (``#`` starts a comment) into a counts-only state."""
    counts: dict[int, int] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [x.strip() for x in line.split(",")]
            if len(parts) != 2:
                raise IngestError(f"{path}:{lineno}: expected 'r,count', got {raw.rstrip()!r}")
            try:
                r, c = int(parts[0]), int(parts[1])
            except ValueError:
                raise IngestError(f"{path}:{lineno}: non-integer field in {raw.rstrip()!r}") from None
            if r < 1:
                raise IngestError(f"{path}:{lineno}: block size must be >= 1, got {r}")
            if c < 0:
                raise IngestError(f"{path}:{lineno}: count must be >= 0, got {c}")
            if r in counts:
                raise IngestError(f"{path}:{lineno}: block size {r} listed twice")
            counts[r] = c
    state = PartitionState.from_counts(counts)
    if state.n == 0:
        raise IngestError(f"{path}: no blocks (n = 0)")
    return state


def export_partition(state: PartitionState, fh):
    """Inverse of :func:`ingest_partition`."""
    fh.write(f"# n={state.n} K={state.k_total}\n")
    for r in state.present_sizes():
        fh.write(f"{r},{state.count(r)}\n")


# ------------------------------------------------------------------ helpers

def _number(text: str):
    """Parse ``0.5`` as float and ``1/2`` as an exact fraction."""
    try:
        if "/" in text:
            return Fraction(text)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _params(args, exact=False) -> ModelParams:
    a, t = args.alpha, args.theta
    if exact:
        a, t = Fraction(str(a)) if isinstance(a, float) else a, \
            Fraction(str(t)) if isinstance(t, float) else t
    return ModelParams(a, t)


def _emit(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


# ------------------------------------------------------------------ commands

def cmd_simulate(args) -> int:
    params = _params(args)
    cps = geometric_schedule(args.n, args.ratio)
    rec = run(params, args.n, cps, args.d, np.random.default_rng(args.seed),
              mode=args.mode, keep_state=args.export is not None)
    _emit(rec.to_csv(), args.output)
    if args.export:
        with open(args.export, "w") as fh:
            export_partition(rec.final_state, fh)
    return 0


def cmd_estimate(args) -> int:
    if args.input:
        state = ingest_partition(args.input)
    else:
        if args.alpha is None or args.theta is None or args.n is None:
            raise ParameterError("estimate needs --input or --alpha/--theta/--n")
        rec = run(_params(args), args.n, [args.n], 1, np.random.default_rng(args.seed),
                  keep_state=True, mode="counts" if args.n > 10**8 else "auto")
        state = rec.final_state
    ci = alpha_ci(state, args.gamma)
    out = {"n": state.n, "K": state.k_total, "alpha_hat": ci.estimate,
           "ci_low": ci.low, "ci_high": ci.high, "gamma": args.gamma}
    if ci.clipped:
        out["clipped"] = True
    if ci.degenerate:
        out["degenerate"] = True
    _emit(_dumps(out), args.output)
    return 0


def cmd_verify_cov(args) -> int:
    params = _params(args)
    params.require_asymptotic()
    lemma = {str(d): covariance.lemma_cov_check(d, params.a) for d in range(1, args.d_max + 1)}
    report = {"alpha": params.a, "lemma_max_abs_error": max(lemma.values()),
              "lemma_tolerance": 1e-10}
    ok = report["lemma_max_abs_error"] < 1e-10
    if args.replicates:
        plan = montecarlo.ExperimentPlan(params, args.n, args.replicates, args.d,
                                         args.seed, args.threads, args.gamma)
        summary = montecarlo.run_experiment(plan)
        cmp_ = montecarlo.compare_cov(summary, params, args.d, args.n)
        report["plan"] = plan.echo()
        report["compare"] = cmp_
        report["gamma_d"] = covariance.gamma_closed_form(args.d, params.a).entries.tolist()
        ok = ok and cmp_["all_within"] and (args.d == 1 or cmp_["offdiag_negative"])
    report["pass"] = bool(ok)
    _emit(_dumps(report), args.output)
    return 0 if ok else 1


def cmd_verify_martingale(args) -> int:
    params = _params(args)
    params.require_asymptotic()
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    checked = 0
    for _ in range(args.states):
        n = int(rng.integers(1, args.n_max + 1))
        st = run(params, n, [n], 1, rng, keep_state=True).final_state
        for r in range(1, min(args.r_max, n) + 1):
            worst = max(worst, martingale.one_step_check(st, r, params))
            checked += 1
    ok = worst <= args.tol
    report = {"alpha": params.a, "theta": params.t, "states": args.states,
              "checks": checked, "r_max": args.r_max, "max_rel_error": worst,
              "tolerance": args.tol, "pass": bool(ok)}
    if args.qv_csv:
        rows = martingale.qv_experiment(params, args.qv_r, args.qv_n, 1, args.seed)
        with open(args.qv_csv, "w") as fh:
            martingale.martingale_csv(rows[0], fh)
    _emit(_dumps(report), args.output)
    return 0 if ok else 1


_STATS = ("pmf-K", "mean-K", "mean-Kr", "factorial-Kr", "joint", "conditional-Kr",
          "sibuya-sum", "second-moment-Q")


def cmd_moments(args) -> int:
    exact = args.backend == "exact"
    params = _params(args, exact=exact)
    backend = args.backend
    n, r, p, q, k = args.n, args.r, args.p, args.q, args.k
    s = args.stat
    if s == "pmf-K":
        v = exact_moments.pmf_K(n, k, params, backend)
    elif s == "mean-K":
        v = exact_moments.mean_K(n, params, backend)
    elif s == "mean-Kr":
        v = exact_moments.mean_Kr(n, r, params, backend)
    elif s == "factorial-Kr":
        v = exact_moments.factorial_moment_Kr(n, r, p, params, backend)
    elif s == "joint":
        v = exact_moments.joint_moment(n, r, p, q, params, backend)
    elif s == "conditional-Kr":
        v = exact_moments.conditional_moment_Kr(n, k, r, p, params, backend)
    elif s == "sibuya-sum":
        v = exact_moments.sibuya_sum_pmf(k, n, params.exact()[0] if exact else params.a,
                                         backend)
    else:
        v = exact_moments.second_moment_q(n, r, params, backend)
    out = {"n": n, "r": r, "p": p, "q": q, "value": float(v), "backend": backend,
           "stat": s}
    if isinstance(v, Fraction):
        out["value_exact"] = str(v)
    _emit(_dumps(out), args.output)
    return 0


def cmd_oracle_check(args) -> int:
    results = oracle.run_checks(n_max=args.n_max)
    ok = all(r.passed for r in results)
    _emit(_dumps({"n_max": args.n_max, "checks": [r.as_dict() for r in results],
                  "pass": ok}), args.output)
    return 0 if ok else 1


def cmd_ci_coverage(args) -> int:
    params = _params(args)
    plan = montecarlo.ExperimentPlan(params, args.n, args.replicates, 1, args.seed,
                                     args.threads, args.gamma)
    summary = montecarlo.run_experiment(plan)
    cov = summary.ci_coverage
    out = {"plan": plan.echo(), "coverage": cov, "nominal": 1 - args.gamma,
           "var_alpha_hat_scaled": summary.var_alpha_hat_scaled,
           "mean_alpha_hat": summary.mean_alpha_hat}
    code = 0
    if args.check:
        lo, hi = 1 - args.gamma - args.band, 1 - args.gamma + args.band
        out["band"] = [lo, hi]
        out["pass"] = bool(lo <= cov <= hi)
        code = 0 if out["pass"] else 1
    if args.raw:
        with open(args.raw, "w") as fh:
            montecarlo.raw_csv(plan, summary, fh)
    _emit(_dumps(out), args.output)
    return code


def cmd_neg_moments(args) -> int:
    params = _params(args)
    grid = [int(float(x)) for x in args.grid.split(",") if x.strip()]
    rep = montecarlo.neg_moment_scan(params, args.q, grid, args.replicates,
                                     args.seed, args.threads)
    rep["max_ratio"] = args.max_ratio
    rep["pass"] = bool(rep["max_over_min"] < args.max_ratio)
    _emit(_dumps(rep), args.output)
    return 0 if rep["pass"] else 1


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ewens-pitman",
        description="Simulation and exact computation for Ewens-Pitman partitions.",
    )
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    threads = os.cpu_count() or 1

    def model(p, required=True):
        p.add_argument("--alpha", type=_number, required=required,
                       help="discount parameter in [0, 1); '1/2' is read exactly")
        p.add_argument("--theta", type=_number, required=required,
                       help="strength parameter, > -alpha")

    def out(p):
        p.add_argument("--output", "-o", default=None, help="output file (default stdout)")

    def seed(p, default=0):
        p.add_argument("--seed", type=int, default=default, help="master random seed")

    def par(p):
        p.add_argument("--threads", type=int, default=threads,
                       help="worker threads (default: available CPUs); never changes results")

    p = sub.add_parser("simulate", help="one trajectory as CSV n,K,K1..Kd")
    model(p)
    p.add_argument("--n", type=int, required=True, help="number of elements")
    p.add_argument("--d", type=int, default=5, help="recorded depth K1..Kd")
    p.add_argument("--ratio", type=float, default=2.0, help="geometric checkpoint ratio")
    p.add_argument("--mode", choices=["auto", "rejection", "scan", "counts"], default="auto",
                   help="block-selection method")
    p.add_argument("--export", default=None, help="also write final counts as r,count lines")
    seed(p)
    out(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="alpha_hat and confidence interval as JSON")
    model(p, required=False)
    p.add_argument("--input", default=None, help="r,count file to ingest instead of simulating")
    p.add_argument("--n", type=int, default=None, help="simulate a partition of [n]")
    p.add_argument("--gamma", type=float, default=0.05, help="1 - confidence level")
    seed(p)
    out(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("verify-cov", help="covariance identity and Monte Carlo Cov(Q) check")
    model(p)
    p.add_argument("--d", type=int, default=3, help="dimension of the Q-vector")
    p.add_argument("--d-max", type=int, default=30, help="largest d for the identity check")
    p.add_argument("--n", type=int, default=10**5, help="partition size per replicate")
    p.add_argument("--replicates", type=int, default=0,
                   help="Monte Carlo replicates (0 = identity check only)")
    p.add_argument("--gamma", type=float, default=0.05, help="CI level used in the summary")
    seed(p)
    par(p)
    out(p)
    p.set_defaults(func=cmd_verify_cov)

    p = sub.add_parser("verify-martingale", help="one-step martingale check on fuzzed states")
    model(p)
    p.add_argument("--states", type=int, default=1000, help="number of fuzzed states")
    p.add_argument("--n-max", type=int, default=2000, help="largest state size")
    p.add_argument("--r-max", type=int, default=8, help="largest r")
    p.add_argument("--tol", type=float, default=1e-10, help="relative tolerance")
    p.add_argument("--qv-csv", default=None,
                   help="also dump one path as CSV n,r,S,M_scaled,qv_normalized")
    p.add_argument("--qv-r", type=int, default=1, help="r for the CSV dump")
    p.add_argument("--qv-n", type=int, default=10**4, help="path length for the CSV dump")
    seed(p)
    out(p)
    p.set_defaults(func=cmd_verify_martingale)

    p = sub.add_parser("moments", help="exact finite-n moment as JSON")
    model(p)
    p.add_argument("--stat", choices=_STATS, required=True, help="quantity to compute")
    p.add_argument("--n", type=int, required=True, help="number of elements")
    p.add_argument("--r", type=int, default=1, help="block size r")
    p.add_argument("--p", type=int, default=1, help="power of K_{r,n}")
    p.add_argument("--q", type=int, default=0, help="power of K_n (may be negative)")
    p.add_argument("--k", type=int, default=1, help="value of K_n (pmf, conditional, sibuya-sum)")
    p.add_argument("--backend", choices=["exact", "float"], default="float",
                   help="exact reads decimal inputs as exact rationals")
    out(p)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("oracle-check", help="all exact formulae against enumeration")
    p.add_argument("--n-max", type=int, default=8, help="largest n (<= 10)")
    out(p)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("ci-coverage", help="empirical coverage of the alpha interval")
    model(p)
    p.add_argument("--n", type=int, default=10**5, help="partition size per replicate")
    p.add_argument("--replicates", type=int, default=10**4, help="number of replicates")
    p.add_argument("--gamma", type=float, default=0.05, help="1 - confidence level")
    p.add_argument("--check", action="store_true",
                   help="fail unless coverage lies within --band of 1 - gamma")
    p.add_argument("--band", type=float, default=0.01, help="half-width for --check")
    p.add_argument("--raw", default=None, help="per-replicate CSV replicate,alpha_hat,Q1")
    seed(p)
    par(p)
    out(p)
    p.set_defaults(func=cmd_ci_coverage)

    p = sub.add_parser("neg-moments", help="boundedness of E[(K_n/n^alpha)^-q] along a grid")
    model(p)
    p.add_argument("--q", type=float, default=1.0, help="order of the negative moment")
    p.add_argument("--grid", default="100,1000,10000,100000", help="comma-separated n values")
    p.add_argument("--replicates", type=int, default=2000, help="paths per grid")
    p.add_argument("--max-ratio", type=float, default=2.0, help="fail if max/min reaches this")
    seed(p)
    par(p)
    out(p)
    p.set_defaults(func=cmd_neg_moments)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        parser.print_usage(sys.stderr)
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ParameterError, DomainError, IngestError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
