"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines also appear in the pytest terminal summary.
"""

import json
import time

import numpy as np
import pytest

from quartic_newton.bench import DEFAULT_KIND, GAP_FLOOR, RATIO_SLACK, run_contraction
from quartic_newton.cli import main
from quartic_newton.forms import EuclideanPower, SumOfLinearQuartics, polarize
from quartic_newton.generators import (generate, random_convex_form, random_metric,
                                       random_psd)
from quartic_newton.io import build_problem
from quartic_newton.linalg import Metric
from quartic_newton.objective import (L1, BallIndicator, BoxIndicator, CompositeProblem,
                                      ConvexQuartic, Zero)
from quartic_newton.solvers import (SolverConfig, dqnm_alpha, prox_inner_solve, qrnm_parameters,
                                    regularization_iteration_bound, regularized_solve,
                                    rqn_parameters, tau_star)
from quartic_newton.subproblem import QuarticModel, solve_model, solve_unconstrained
from quartic_newton.verify import run_suite

RESULTS: dict[int, str] = {}


def report(number: int, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


# 1 -----------------------------------------------------------------------------

def test_criterion_1_parameter_constants():
    t0 = time.perf_counter()
    t = tau_star()
    a_star = dqnm_alpha()
    _, a_sharp = rqn_parameters(1.0)
    g_star, a_2star, _ = qrnm_parameters(1.0)
    elapsed = time.perf_counter() - t0
    checks = {
        "tau*": abs(t - 0.49285344470683137) <= 1e-12 and abs(54 * t**4 - 9 * t**2 - 1) <= 1e-14,
        # closed form (3t-1)/(3t+1); 0.193080 to six places
        "alpha*": abs(a_star - 0.19307996159403925) <= 1e-12 and a_star > 0.193,
        "alpha#(1)": abs(a_sharp - 1 / (5 + 5 ** (1 / 3))) <= 1e-12
        and abs(a_sharp - 0.14903183080637985) <= 1e-12 and a_sharp > 0.149,
        "gamma*(1)": abs(g_star - 11 / 24) <= 1e-12,
        "alpha**(1)": abs(a_2star - 3 / 19) <= 1e-12,
        "runtime": elapsed < 1.0,
    }
    bad = [k for k, v in checks.items() if not v]
    report(1, not bad, f"tau*={t:.10f} alpha*={a_star:.10f} alpha#={a_sharp:.10f} "
           f"gamma*={g_star:.10f} alpha**={a_2star:.10f} ({elapsed * 1e3:.1f} ms)"
           + (f" failed: {bad}" if bad else ""))


# 2 -----------------------------------------------------------------------------

REQUIRED_CHECKS = {"theorem21", "d3_bound", "sandwich", "qreg_bounds", "glip", "qf_bounds",
                   "uniform_convexity", "operator_inequality"}


def test_criterion_2_inequality_suites():
    t0 = time.perf_counter()
    reports = run_suite("all", 1000, 2024)
    elapsed = time.perf_counter() - t0
    names = {r.name for r in reports}
    bad = [r.name for r in reports if r.failures or r.trials < 1000]
    missing = REQUIRED_CHECKS - names
    ok = not bad and not missing and elapsed < 60
    worst = max(reports, key=lambda r: r.worst_violation / r.tolerance)
    total = sum(r.failures for r in reports)
    report(2, ok, f"{len(reports)} checks x 1000 trials, {total} failures, failing={bad} "
           f"missing={sorted(missing)}; tightest {worst.name} at "
           f"{worst.worst_violation / worst.tolerance:.2e} of tolerance ({elapsed:.1f} s)")


# 3 -----------------------------------------------------------------------------

def _abs_contractions(T, x):
    A, ax = np.abs(T), np.abs(x)
    return (np.einsum("ijkl,i,j,k,l->", A, ax, ax, ax, ax),
            np.einsum("ijkl,j,k,l->i", A, ax, ax, ax),
            np.einsum("ijkl,k,l->ij", A, ax, ax))


def test_criterion_3_structured_vs_dense():
    # norm-wise errors against |T|[|x|]^p, the rounding scale of each contraction
    t0 = time.perf_counter()
    rng = np.random.default_rng(33)
    worst = 0.0
    for i in range(100):
        n = int(rng.integers(1, 7))
        form = random_convex_form(rng, n, random_metric(rng, n), ("power", "sum", "dense")[i % 3])
        dense = polarize(form)
        for _ in range(10):
            x = rng.standard_normal(n) * np.exp(rng.uniform(-2, 2))
            s4, s3, s2 = _abs_contractions(dense.T, x)
            worst = max(worst,
                        abs(dense.eval4(x) - form.eval4(x)) / s4,
                        np.linalg.norm(dense.contract3(x) - form.contract3(x)) / np.linalg.norm(s3),
                        np.linalg.norm(dense.contract2(x) - form.contract2(x)) / np.linalg.norm(s2))
    elapsed = time.perf_counter() - t0
    report(3, worst <= 1e-12 and elapsed < 30,
           f"100 forms, worst relative deviation {worst:.2e} (tol 1e-12, {elapsed:.1f} s)")


# 4 -----------------------------------------------------------------------------

def test_criterion_4_contraction():
    t0 = time.perf_counter()
    lines, ok = [], True
    for method in ("dqnm", "rqn", "qrnm"):
        results = [run_contraction(method, 2 + i % 7, i) for i in range(50)]
        failed = [r.seed for r in results if not r.passed]
        # long-run optimum cross-checked against the certificates
        cert_gap = max(abs(r.F_star - r.xi_star) / (1 + abs(r.F_star)) for r in results)
        frac = max(r.max_ratio / r.bound for r in results)
        cert_frac = max(r.max_cert_ratio / r.bound for r in results)
        ok &= not failed and cert_gap <= 1e-9
        lines.append(f"{method}({DEFAULT_KIND[method]}): {50 - len(failed)}/50 pass, "
                     f"max ratio/(1-alpha)={frac:.3f}, cert {cert_frac:.3f}, "
                     f"|F*-xi*|<={cert_gap:.1e}")
    elapsed = time.perf_counter() - t0
    report(4, ok and elapsed < 300,
           "; ".join(lines) + f" (gap floor {GAP_FLOOR:g}, slack {RATIO_SLACK:g}, {elapsed:.1f} s)")


# 5 -----------------------------------------------------------------------------

def _regularization_instances():
    """Problems with a constructed minimizer ``s`` and value ``F*``.

    Returns ``(problem, x0, x_star, F_star, L)`` with ``0 <= D^4 f <= L``.
    """
    out = []
    m1 = Metric.identity(1)
    out.append((CompositeProblem(ConvexQuartic([1.5], 0.0, [0.0], [[0.0]],
                                               EuclideanPower(1 / 24, m1)), Zero(), m1),
                np.array([-0.5]), np.array([1.5]), 0.0, 1.0))
    rng = np.random.default_rng(55)
    for i in range(9):
        n = 2 + i % 5
        m = random_metric(rng, n, "dense" if i % 2 else "identity")
        s = rng.standard_normal(n)
        F_star = float(rng.standard_normal())
        k = int(rng.integers(1, n))  # fewer terms than n: D^4 f is only semidefinite
        a = rng.standard_normal((k, n))
        c = rng.uniform(0.2, 1.0, k)
        f4 = SumOfLinearQuartics(a, c, 0.0, m)
        Q = random_psd(rng, n, rank=int(rng.integers(0, n)), scale=0.5)
        f = ConvexQuartic(s, F_star, np.zeros(n), Q, f4)
        L = 24.0 * float(sum(ci * m.dual_norm(ai) ** 4 for ai, ci in zip(a, c)))
        x0 = s + rng.uniform(0.5, 2.0) * rng.standard_normal(n) / np.sqrt(n)
        out.append((CompositeProblem(f, Zero(), m), x0, s, F_star, L))
    return out


def test_criterion_5_regularization():
    t0 = time.perf_counter()
    worst_err, worst_frac, ok = -np.inf, 0.0, True
    for eps in (1e-2, 1e-4):
        for p, x0, s, F_star, L in _regularization_instances():
            R = p.metric.norm(x0 - s)
            run = regularized_solve(p, x0, eps, R, L, SolverConfig("reg", max_iter=5000))
            err = run.params["F_original"] - F_star
            bound = regularization_iteration_bound(L, R, eps, p.value(x0) - F_star)
            frac = run.iterations / bound
            ok &= run.converged and err <= eps and frac <= 1.5
            worst_err = max(worst_err, err / eps)
            worst_frac = max(worst_frac, frac)
    elapsed = time.perf_counter() - t0
    report(5, ok and elapsed < 120,
           f"20 solves (eps 1e-2, 1e-4): max (F-F*)/eps={worst_err:.3f}, "
           f"max iterations/bound={worst_frac:.3f} (limit 1.5, {elapsed:.1f} s)")


# 6 -----------------------------------------------------------------------------

def test_criterion_6_prox_inner():
    t0 = time.perf_counter()
    rng = np.random.default_rng(66)
    accepted = eps_optimal = 0
    worst_gm, worst_budget, ok = -np.inf, 0.0, True
    eps, beta = 1e-4, 0.5
    for i in range(100):
        n = 1 + i % 6
        psi = ("ball", "box")[i % 2]
        doc = generate("lse_reg", n, 1000 + i, {"H_factor": 0.0, "psi": psi, "radius": 2.0,
                                               "metric": "diag"}, validate=False)
        lp = build_problem(doc)
        p, M4 = lp.problem, lp.known["M4"]
        xbar = p.psi.project(lp.x0 + rng.standard_normal(n), p.metric)
        res = prox_inner_solve(p, xbar, M4, beta, None, eps)
        gm = (res.grad_map_sq - res.grad_map_bound) / (1 + abs(res.grad_map_bound))
        worst_gm = max(worst_gm, gm)
        worst_budget = max(worst_budget, res.stage1_iters / max(res.budget, 1))
        stationary = res.rhs / beta <= eps
        accepted += res.accept
        eps_optimal += (not res.accept) and stationary
        ok &= res.grad_map_ok and res.stage1_iters <= 1.5 * res.budget
        ok &= res.accept or stationary
    elapsed = time.perf_counter() - t0
    report(6, ok, f"100 runs: {accepted} accepted, {eps_optimal} eps-stationary; "
           f"worst gradient-mapping violation {max(worst_gm, 0.0):.1e} (tol 1e-9 rel), "
           f"max stage-1 iterations/budget={worst_budget:.3f} (limit 1.5, {elapsed:.1f} s)")


# 7 -----------------------------------------------------------------------------

def _probe_values(model, H):
    """Model values (smooth plus psi) at the rows of ``H``; inf outside dom psi."""
    B = model.metric.B
    BH = H @ B
    s = np.einsum("ij,ij->i", H, BH)
    val = H @ model.g + 0.5 * np.einsum("ij,ij->i", H @ model.A, H) + model.c4 * s * s
    X = model.anchor + H
    psi = model.psi
    if isinstance(psi, BallIndicator):
        D = X - psi.center
        inside = np.einsum("ij,ij->i", D @ B, D) <= psi.radius**2 * (1 + 1e-12)
        val = np.where(inside, val, np.inf)
    elif isinstance(psi, BoxIndicator):
        inside = np.all((X >= psi.lo) & (X <= psi.hi), axis=1)
        val = np.where(inside, val, np.inf)
    elif isinstance(psi, L1):
        val = val + psi.weight * np.abs(X).sum(axis=1)
    return val


def _feasible_probes(model, h_star, rng, count):
    n = model.n
    scales = np.exp(rng.uniform(np.log(1e-7), np.log(3.0), count))[:, None]
    H = h_star + scales * rng.standard_normal((count, n))
    psi = model.psi
    X = model.anchor + H
    if isinstance(psi, BallIndicator):
        Lc = np.linalg.cholesky(model.metric.B)
        D = X - psi.center
        r = np.sqrt(np.einsum("ij,ij->i", D @ model.metric.B, D))
        D = np.where((r > psi.radius)[:, None], D * (psi.radius / r)[:, None], D)
        X = psi.center + D
        del Lc
    elif isinstance(psi, BoxIndicator):
        X = np.clip(X, psi.lo, psi.hi)
    return X - model.anchor


def test_criterion_7_subproblem():
    t0 = time.perf_counter()
    m1 = Metric.identity(1)
    h_cubic = solve_unconstrained(QuarticModel([-1.0], [[1.0]], 1.0, m1)).h[0]
    h_quartic = solve_unconstrained(QuarticModel([-1.0], [[0.0]], 1.0, m1)).h[0]
    roots_ok = abs(h_cubic - 0.5) <= 1e-10 and abs(h_quartic - 4 ** (-1 / 3)) <= 1e-10

    rng = np.random.default_rng(77)
    worst, ok = -np.inf, roots_ok
    for i in range(200):
        n = int(rng.integers(1, 9))
        kind = ("zero", "ball", "box", "l1")[i % 4]
        m = random_metric(rng, n, "diag" if kind in ("box", "l1") else "dense")
        psi = {"zero": Zero(), "ball": BallIndicator(0.3 * rng.standard_normal(n), 0.5, m),
               "box": BoxIndicator(-np.ones(n), np.ones(n)), "l1": L1(0.3)}[kind]
        model = QuarticModel(rng.standard_normal(n) * np.exp(rng.uniform(-3, 2)),
                             random_psd(rng, n, rank=int(rng.integers(0, n + 1))),
                             float(np.exp(rng.uniform(-3, 2))), m, psi,
                             psi.project(0.3 * rng.standard_normal(n), m))
        sol = solve_model(model)
        best = sol.total
        vals = _probe_values(model, _feasible_probes(model, sol.h, rng, 10_000))
        gap = (best - np.min(vals)) / (1 + abs(best))
        worst = max(worst, gap)
        ok &= gap <= 1e-12
    elapsed = time.perf_counter() - t0
    report(7, ok, f"200 models x 1e4 probes: worst (model* - probe)/(1+|model*|)={worst:.1e}; "
           f"roots h={float(h_cubic)!r}, h={float(h_quartic)!r} ({elapsed:.1f} s)")


# 8 -----------------------------------------------------------------------------

def test_criterion_8_determinism(tmp_path):
    t0 = time.perf_counter()
    same = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        prob = d / "p.json"
        assert main(["generate", "--kind", "sum_quartic", "--n", "4", "--seed", "8",
                     "--param", "metric=dense", "--probes", "2000", "--out", str(prob)]) == 0
        for method in ("rqn", "qrnm", "reg"):
            assert main(["solve", "--problem", str(prob), "--method", method, "--eps", "1e-8",
                         "--R", "5", "--no-timing", "--out", str(d / method)]) == 0
        prob2 = d / "q.json"
        assert main(["generate", "--kind", "quadratic_plus_quartic", "--n", "3", "--seed", "8",
                     "--probes", "2000", "--out", str(prob2)]) == 0
        assert main(["solve", "--problem", str(prob2), "--method", "dqnm", "--no-timing",
                     "--out", str(d / "dqnm")]) == 0
        assert main(["verify", "--suite", "all", "--trials", "20", "--seed", "8",
                     "--out", str(d / "verify.json")]) == 0
        assert main(["bench", "--method", "qrnm", "--n", "3", "--seeds", "3",
                     "--out", str(d / "bench.csv")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    for name in names:
        same.append((tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes())
    hashes = {json.loads((tmp_path / "a" / f"{m}.json").read_text())["content_hash"]
              for m in ("dqnm", "rqn", "qrnm", "reg")}
    elapsed = time.perf_counter() - t0
    report(8, all(same) and len(hashes) == 4,
           f"{sum(same)}/{len(same)} files byte-identical across repeated runs ({elapsed:.1f} s)")
