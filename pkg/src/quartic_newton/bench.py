"""Contraction-rate experiments on generated instances."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .generators import generate
from .io import LoadedProblem, build_problem
from .solvers import RunLog, SolverConfig, SolverError, reference_optimum, solve
from .verify import gap_ratios

# instance family used for each method's contraction experiment
DEFAULT_KIND = {"dqnm": "quadratic_plus_quartic", "rqn": "sum_quartic", "qrnm": "sum_quartic"}
GAP_FLOOR = 1e-12
RATIO_SLACK = 1e-10


@dataclass
class ContractionResult:
    method: str
    kind: str
    n: int
    seed: int
    q: float
    alpha: float
    iterations: int
    status: str
    F_star: float
    xi_star: float
    max_ratio: float
    max_cert_ratio: float
    sandwich_ok: bool

    @property
    def bound(self) -> float:
        return 1.0 - self.alpha

    @property
    def passed(self) -> bool:
        return (self.status == "converged" and self.sandwich_ok
                and self.max_ratio <= self.bound + RATIO_SLACK
                and self.max_cert_ratio <= self.bound + RATIO_SLACK)

    def row(self) -> dict:
        d = asdict(self)
        d.update(bound=self.bound, passed=self.passed)
        return d


def solver_kwargs(lp: LoadedProblem, method: str) -> dict:
    """Method-specific constants from a problem's ``known`` block."""
    k = lp.known
    if method == "rqn" and "mu" in k and "L" in k:
        # f4 convention for the relaxed method
        return {"mu": k["mu"] / 24.0, "L": k["L"] / 24.0}
    if method == "qrnm":
        if lp.spec is None:
            raise SolverError("problem file carries no (mu, L) for QRNM")
        return {"spec": lp.spec}
    return {}


def instance_params(method: str, kind: str, n: int, seed: int) -> dict:
    rng = np.random.default_rng([seed, 11])
    if kind == "sum_quartic":
        return {"sigma": float(rng.uniform(0.0, 0.3)), "terms": n, "quad": float(rng.uniform(0, 2)),
                "metric": "dense" if seed % 2 else "identity"}
    if kind == "quadratic_plus_quartic":
        return {"quartic": float(rng.uniform(0.02, 1.0)), "quad": float(rng.uniform(0.0, 2.0)),
                "distance": float(rng.uniform(0.5, 4.0)), "metric": "dense" if seed % 2 else "identity"}
    return {}


def run_contraction(method: str, n: int, seed: int, kind: str | None = None,
                    params: dict | None = None, eps: float = 1e-13,
                    max_iter: int = 500) -> ContractionResult:
    kind = kind or DEFAULT_KIND[method]
    params = instance_params(method, kind, n, seed) if params is None else params
    lp = build_problem(generate(kind, n, seed, params, validate=False))
    cfg = SolverConfig(method, eps=eps, max_iter=max_iter)
    kw = solver_kwargs(lp, method)
    run = solve(lp.problem, lp.x0, cfg, **kw)
    F_star, xi_star = reference_optimum(lp.problem, run.x, cfg, **kw)
    if "F_star" in lp.known:
        F_star = min(F_star, lp.known["F_star"])
    return summarize(run, F_star, xi_star, method, kind, n, seed)


def summarize(run: RunLog, F_star: float, xi_star: float, method: str, kind: str, n: int,
              seed: int) -> ContractionResult:
    F = run.F
    xi = run.xi
    ratios = gap_ratios(F - F_star, GAP_FLOOR)
    cert = F - xi
    cert_ratios = gap_ratios(cert[np.isfinite(cert)], GAP_FLOOR)
    tol = 1e-12 * (1.0 + abs(F_star))
    fin = xi[np.isfinite(xi)]
    sandwich = bool(np.all(fin <= F_star + tol) and np.all(np.diff(fin) >= -tol)
                    and np.all(np.diff(F) <= tol))
    return ContractionResult(
        method, kind, n, seed, float(run.params.get("q", 1.0)), float(run.params["alpha"]),
        run.iterations, run.status, F_star, xi_star,
        float(ratios.max()) if ratios.size else 0.0,
        float(cert_ratios.max()) if cert_ratios.size else 0.0, sandwich)


def _job(args):
    return run_contraction(*args)


def run_bench(method: str, n_values, seeds, kind: str | None = None,
              workers: int = 1) -> list[ContractionResult]:
    jobs = [(method, n, s, kind) for n in n_values for s in seeds]
    if workers <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_job, jobs))


def expected_alpha_floor(method: str, q: float) -> float:
    """Guaranteed contraction floor for a method at a given q."""
    from .solvers import dqnm_alpha, qrnm_parameters, rqn_parameters
    if method == "dqnm":
        return dqnm_alpha()
    if method == "rqn":
        return rqn_parameters(q)[1]
    return qrnm_parameters(q)[1]


def iterations_to(eps: float, alpha: float, gap0: float) -> float:
    return math.log(max(gap0 / eps, 1.0)) / -math.log(1.0 - alpha)
