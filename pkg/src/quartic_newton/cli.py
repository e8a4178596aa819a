"""Command line: generate, solve, rate-check, verify, bench.

Exit codes: 0 success; 1 input error; 2 iteration budget exhausted;
3 contraction-rate violation; 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .bench import run_bench, solver_kwargs
from .generators import KINDS, GeneratorError, generate
from .io import (ProblemFileError, dumps_json, load_form, load_problem, save_problem, write_run)
from .solvers import (METHODS, IterateRecord, RunLog, SolverConfig, SolverError,
                      prox_outer_loop, reference_optimum, regularized_solve, rqn, solve)
from .subproblem import SubproblemError
from .verify import SUITES, form_suite_for, gap_ratios, rate_fit, run_suite

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_RATE, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("quartic_newton")


def _default_seed() -> int:
    try:
        return int(os.environ.get("QN_SEED", "0"))
    except ValueError:
        return 0


def _param(text: str):
    key, _, raw = text.partition("=")
    if not key or not _:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quartic-newton", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a seeded problem file")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=_default_seed())
    g.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    g.add_argument("--probes", type=int, default=100_000, help="random probes validating F*")
    g.add_argument("--out", required=True)

    def solver_flags(sp):
        sp.add_argument("--problem", required=True)
        sp.add_argument("--method", required=True, help="|".join(METHODS))
        sp.add_argument("--eps", type=float, default=1e-10)
        sp.add_argument("--max-iter", type=int, default=500)
        sp.add_argument("--tau", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--q", type=float)
        sp.add_argument("--seed", type=int, default=_default_seed())
        sp.add_argument("--R", type=float, help="distance bound for 'reg'")
        sp.add_argument("--L", type=float, help="upper bound on D^4 f for 'reg'")
        sp.add_argument("--M4", type=float, help="bound on |D^4 f| for 'prox'")
        sp.add_argument("--beta", type=float, default=0.5)
        sp.add_argument("--outer", type=int, default=1, help="outer prox steps for 'prox'")

    s = sub.add_parser("solve", help="run a solver and write a log")
    solver_flags(s)
    s.add_argument("--out", required=True, help="output prefix (PREFIX.csv, PREFIX.json)")
    s.add_argument("--no-timing", action="store_true", help="write wall_ns = 0")

    r = sub.add_parser("rate-check", help="measure per-iteration contraction")
    solver_flags(r)
    r.add_argument("--expected-alpha", type=float)

    v = sub.add_parser("verify", help="randomized inequality checks")
    v.add_argument("--suite", choices=SUITES, default="all")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int, default=_default_seed())
    v.add_argument("--form", help="JSON file with a dense symmetric tensor to check")
    v.add_argument("--out", help="write the reports as JSON")

    b = sub.add_parser("bench", help="contraction experiment over seeds")
    b.add_argument("--method", choices=("dqnm", "rqn", "qrnm"), required=True)
    b.add_argument("--kind", choices=KINDS)
    b.add_argument("--n", type=int, nargs="+", default=[2, 4, 6])
    b.add_argument("--seeds", type=int, default=10)
    b.add_argument("--seed", type=int, default=_default_seed())
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", help="CSV summary")
    return p


# --- commands ------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.n < 1:
        print("error: --n must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        doc = generate(args.kind, args.n, args.seed, dict(args.param), probes=args.probes)
    except GeneratorError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    save_problem(doc, args.out)
    return EXIT_OK


def _config(args) -> SolverConfig:
    if args.method not in METHODS:
        raise SolverError(f"unknown method {args.method!r}; choose from {METHODS}")
    return SolverConfig(args.method, args.tau, args.gamma, args.q, args.eps, args.max_iter)


def _run(args, lp, cfg) -> tuple[RunLog, dict]:
    """Dispatch one solve; returns the log and extra header fields."""
    p, known = lp.problem, lp.known
    if cfg.method == "reg":
        R = args.R
        if R is None and "x_star" in known:
            R = max(p.metric.norm(lp.x0 - np.asarray(known["x_star"])), 1e-12)
        L = args.L if args.L is not None else known.get("L")
        if R is None or L is None:
            raise SolverError("'reg' needs --R and --L (or x_star and L in the problem file)")
        run = regularized_solve(p, lp.x0, cfg.eps, R, L, cfg)
        return run, {"F_original": run.params["F_original"]}
    if cfg.method == "prox":
        M4 = args.M4 if args.M4 is not None else known.get("M4", known.get("L"))
        if M4 is None:
            raise SolverError("'prox' needs --M4 (or M4 in the problem file)")
        outer = prox_outer_loop(p, lp.x0, M4, args.outer, args.beta, cfg.eps, cfg=cfg)
        return _prox_log(outer, p, lp.x0, cfg), {}
    kw = solver_kwargs(lp, cfg.method)
    if cfg.method == "rqn" and not kw:
        # no constants on file: estimate them from the form
        return rqn(p, lp.x0, cfg, seed=args.seed), {}
    return solve(p, lp.x0, cfg, **kw), {}


def _prox_log(outer, p, x0, cfg) -> RunLog:
    recs = [IterateRecord(0, np.asarray(x0, float), outer.F[0], None, 0.0, 0, 0)]
    x_prev = np.asarray(x0, float)
    for k, st in enumerate(outer.steps, start=1):
        recs.append(IterateRecord(k, st.x_hat, outer.F[k], None, p.metric.norm(st.x_hat - x_prev),
                                  st.stage1_iters, 0))
        x_prev = st.x_hat
    ok = all(s.accept for s in outer.steps) or (
        len(outer.F) > 1 and abs(outer.F[-2] - outer.F[-1]) <= cfg.eps)
    params = {"accepted": [bool(s.accept) for s in outer.steps],
              "M": [s.M for s in outer.steps]}
    return RunLog("prox", recs, "converged" if ok else "max_iter", params, cfg)


def cmd_solve(args) -> int:
    try:
        lp = load_problem(args.problem)
        cfg = _config(args)
        run, extra = _run(args, lp, cfg)
    except (ProblemFileError, SolverError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SubproblemError as e:
        print(f"error: subproblem failed: {e}", file=sys.stderr)
        return EXIT_BUDGET
    write_run(run, args.out, timing=not args.no_timing, extra=extra)
    last = run.records[-1]
    gap = "nan" if last.xi is None else f"{last.F - last.xi:.3e}"
    print(f"{run.method}: status={run.status} k={last.k} F={last.F:.17g} gap={gap}")
    return EXIT_OK if run.converged else EXIT_BUDGET


def cmd_rate_check(args) -> int:
    try:
        lp = load_problem(args.problem)
        cfg = _config(args)
        if cfg.method not in ("dqnm", "rqn", "qrnm"):
            raise SolverError("rate-check supports dqnm, rqn and qrnm")
        run, _ = _run(args, lp, cfg)
        kw = solver_kwargs(lp, cfg.method)
        F_star, _ = reference_optimum(lp.problem, run.x, cfg, **kw)
    except (ProblemFileError, SolverError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if "F_star" in lp.known:
        F_star = min(F_star, lp.known["F_star"])
    alpha = args.expected_alpha if args.expected_alpha is not None else run.params["alpha"]
    gaps = run.F - F_star
    ratios = gap_ratios(gaps, 1e-12)
    print(f"{'k':>4} {'gap':>12} {'ratio':>10}")
    for k, g in enumerate(gaps):
        rr = f"{ratios[k - 1]:10.6f}" if 0 < k <= len(ratios) else " " * 10
        print(f"{k:4d} {g:12.4e} {rr}")
    max_ratio, geo, degenerate = rate_fit(run.F, F_star, floor=1e-12)
    bound = 1.0 - alpha
    verdict = "PASS" if max_ratio <= bound + 1e-9 else "FAIL"
    print(f"max_ratio={max_ratio:.6f} geo_mean={geo:.6f} bound=1-{alpha:.6f}={bound:.6f} {verdict}")
    return EXIT_OK if verdict == "PASS" else EXIT_RATE


def cmd_verify(args) -> int:
    if args.trials < 0:
        print("error: --trials must be >= 0", file=sys.stderr)
        return EXIT_INPUT
    if args.trials == 0:
        log.warning("--trials 0: nothing checked")
    try:
        if args.form:
            reports = form_suite_for(load_form(args.form), args.trials, args.seed)
        else:
            reports = run_suite(args.suite, args.trials, args.seed)
    except ProblemFileError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    for r in reports:
        mark = "ok  " if r.passed else "FAIL"
        print(f"{mark} {r.name:22s} trials={r.trials:6d} failures={r.failures:4d} "
              f"worst={r.worst_violation:.3e} tol={r.tolerance:.0e}")
    if args.out:
        Path(args.out).write_text(dumps_json([r.to_dict() for r in reports]))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def cmd_bench(args) -> int:
    seeds = range(args.seed, args.seed + args.seeds)
    results = run_bench(args.method, args.n, seeds, args.kind, args.workers)
    rows = [r.row() for r in results]
    if args.out and rows:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v)
                            for k, v in row.items()})
    worst = max((r.max_ratio / r.bound for r in results), default=math.nan)
    n_pass = sum(r.passed for r in results)
    print(f"{args.method}: {n_pass}/{len(results)} instances within 1-alpha; "
          f"worst ratio/bound = {worst:.4f}")
    return EXIT_OK if n_pass == len(results) else EXIT_RATE


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "rate-check": cmd_rate_check,
            "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.cmd](args)


if __name__ == "__main__":
    sys.exit(main())
