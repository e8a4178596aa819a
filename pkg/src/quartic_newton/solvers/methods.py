"""Damped, relaxed and Q-regular quartic Newton iterations with certificates.

Each iteration at ``x`` minimizes an upper model

    f(x) + <grad f(x), h> + a_up <hess f(x) h, h> + c_up ||h||^4 + psi(x + h)

and, for the certificate, the matching alpha = 1 lower model with
coefficients ``(a_low, c_low)``.  Coefficient table (``s`` is the scale of a
Euclidean-power ``f4``; ``mu, L`` bound ``f4`` for RQN and ``D^4 f`` for QRNM):

    method  a_up             c_up              a_low             c_low
    DQNM    (1+3t)/(6t)      (1+2t) s          (3t-1)/(6t)       (1-2t) s
    RQN     (1+3t)/(6t)      (1+2t) L          (3t-1)/(6t)       (1-2t) mu
    QRNM    (1+3g)/(6g)      (1+2g) L / 24     (3g-1)/(6g)       mu kappa(g) / 24

The subproblem takes ``<A h, h>/2``, so ``A = 2 a hess f(x)``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..forms import EuclideanPower, estimate_mu_L
from ..linalg import Metric
from ..objective import CompositeProblem, ConvexQuartic, QRegularSpec, Zero
from ..subproblem import ModelSolution, QuarticModel, solve_model
from .parameters import (clamp_open, dqnm_alpha, kappa_gamma, qrnm_alpha, qrnm_parameters,
                         rqn_alpha, rqn_parameters, tau_star)

log = logging.getLogger(__name__)

METHODS = ("dqnm", "rqn", "qrnm", "reg", "prox")


class SolverError(ValueError):
    pass


@dataclass
class SolverConfig:
    method: str = "qrnm"
    tau: float | None = None
    gamma: float | None = None
    q: float | None = None
    eps: float = 1e-10
    max_iter: int = 500
    tol: float = 1e-13
    max_sub_iter: int = 20000

    def __post_init__(self):
        if self.method not in METHODS:
            raise SolverError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.eps >= 0:
            raise SolverError("eps must be nonnegative")
        if self.max_iter < 0:
            raise SolverError("max_iter must be nonnegative")
        if self.tau is not None:
            self.tau = clamp_open(self.tau)
        if self.gamma is not None:
            self.gamma = clamp_open(self.gamma)


@dataclass
class IterateRecord:
    k: int
    x: np.ndarray
    F: float
    xi: float | None
    step_norm: float
    sub_iters: int
    wall_ns: int

    @property
    def gap(self) -> float:
        return self.F - self.xi if self.xi is not None else np.nan


@dataclass(frozen=True)
class Certificate:
    xi_star: float
    k: int


@dataclass
class RunLog:
    method: str
    records: list[IterateRecord]
    status: str  # "converged" | "max_iter" | "stalled"
    params: dict = field(default_factory=dict)
    config: SolverConfig | None = None

    @property
    def x(self) -> np.ndarray:
        return self.records[-1].x

    @property
    def F(self) -> np.ndarray:
        return np.array([r.F for r in self.records])

    @property
    def xi(self) -> np.ndarray:
        return np.array([np.nan if r.xi is None else r.xi for r in self.records])

    @property
    def certificate(self) -> Certificate | None:
        best = None
        for r in self.records:
            if r.xi is not None and (best is None or r.xi > best.xi_star):
                best = Certificate(r.xi, r.k)
        return best

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def iterations(self) -> int:
        return self.records[-1].k

    def header(self) -> dict:
        cfg = asdict(self.config) if self.config is not None else {}
        return {"method": self.method, "status": self.status, "params": self.params, "config": cfg}


@dataclass(frozen=True)
class _Coefficients:
    a_up: float
    c_up: float
    a_low: float
    c_low: float
    alpha: float


def _model(problem: CompositeProblem, m: Metric, x, g, Hk, a, c) -> QuarticModel:
    return QuarticModel(g, 2.0 * a * Hk, c, m, problem.psi, x)


def _iterate(problem: CompositeProblem, x0, cfg: SolverConfig, coef: _Coefficients, name: str,
             metric: Metric | None = None, params: dict | None = None,
             stop: Callable[[int, np.ndarray, float, float], bool] | None = None) -> RunLog:
    m = metric or problem.metric
    psi = problem.psi
    x = np.asarray(x0, dtype=float).copy()
    if not psi.contains(x):
        raise SolverError("starting point is outside dom psi")
    x = psi.project(x, m)
    records: list[IterateRecord] = []
    xi_best = -np.inf
    step, sub_iters = 0.0, 0
    status = "max_iter"
    t0 = time.perf_counter_ns()
    for k in range(cfg.max_iter + 1):
        fx = problem.f.value(x)
        F = fx + psi.value(x)
        g = problem.f.grad(x)
        Hk = problem.f.hess(x)
        if coef.c_low > 0:
            low = solve_model(_model(problem, m, x, g, Hk, coef.a_low, coef.c_low), cfg.tol,
                              cfg.max_sub_iter)
            xi_best = max(xi_best, fx + low.lower_bound)
            sub_iters += low.iters
        xi = xi_best if np.isfinite(xi_best) else None
        records.append(IterateRecord(k, x.copy(), F, xi, step, sub_iters,
                                     time.perf_counter_ns() - t0))
        if stop is not None:
            if stop(k, x, F, xi):
                status = "converged"
                break
        elif xi is not None and F - xi <= cfg.eps:
            status = "converged"
            break
        if k == cfg.max_iter:
            break
        up: ModelSolution = solve_model(_model(problem, m, x, g, Hk, coef.a_up, coef.c_up),
                                        cfg.tol, cfg.max_sub_iter)
        sub_iters = up.iters
        if not np.any(up.h):
            status = "stalled" if xi is None or F - xi > cfg.eps else "converged"
            log.debug("%s: zero step at k=%d", name, k)
            break
        x_new = psi.project(x + up.h, m)
        step = m.norm(x_new - x)
        x = x_new
    return RunLog(name, records, status, params or {}, cfg)


def _f4_of(problem: CompositeProblem):
    f = problem.f
    if not isinstance(f, ConvexQuartic):
        raise SolverError("this method needs a ConvexQuartic smooth part")
    return f.f4


def dqnm(problem: CompositeProblem, x0, cfg: SolverConfig | None = None) -> RunLog:
    """Damped quartic Newton method; ``f4`` must be a Euclidean power."""
    cfg = cfg or SolverConfig("dqnm")
    f4 = _f4_of(problem)
    if not isinstance(f4, EuclideanPower):
        raise SolverError("DQNM needs f4 = H ||.||^4 (Euclidean power); use RQN for general forms")
    if not f4.H > 0:
        raise SolverError("DQNM needs a positive-definite quartic part")
    if not isinstance(problem.psi, Zero) and not np.array_equal(f4.metric.B, problem.metric.B):
        raise SolverError("f4 metric must match the problem metric when psi is present")
    t = cfg.tau if cfg.tau is not None else tau_star()
    s = f4.H
    coef = _Coefficients((1 + 3 * t) / (6 * t), (1 + 2 * t) * s, (3 * t - 1) / (6 * t),
                         (1 - 2 * t) * s, dqnm_alpha(cfg.tau))
    return _iterate(problem, x0, cfg, coef, "dqnm", metric=f4.metric,
                    params={"tau": t, "alpha": coef.alpha, "f4_scale": s})


def rqn(problem: CompositeProblem, x0, cfg: SolverConfig | None = None,
        mu: float | None = None, L: float | None = None, seed: int = 0) -> RunLog:
    """Relaxed quartic Newton method with ``mu ||h||^4 <= f4[h]^4 <= L ||h||^4``."""
    cfg = cfg or SolverConfig("rqn")
    f4 = _f4_of(problem)
    if mu is None or L is None:
        mu_hat, L_hat = estimate_mu_L(f4, problem.metric, seed=seed)
        mu = mu_hat if mu is None else mu
        L = L_hat if L is None else L
    if not (mu > 0 and L >= mu):
        raise SolverError("RQN needs 0 < mu <= L (positive-definite quartic part)")
    q = cfg.q if cfg.q is not None else mu / L
    if not 0 < q <= 1:
        raise SolverError(f"q must lie in (0, 1], got {q}")
    if cfg.tau is None:
        t, alpha = rqn_parameters(q)
    else:
        t, alpha = cfg.tau, rqn_alpha(cfg.tau, q)
    coef = _Coefficients((1 + 3 * t) / (6 * t), (1 + 2 * t) * L, (3 * t - 1) / (6 * t),
                         (1 - 2 * t) * mu, alpha)
    return _iterate(problem, x0, cfg, coef, "rqn",
                    params={"tau": t, "alpha": alpha, "q": q, "mu": mu, "L": L})


def qrnm_coefficients(spec: QRegularSpec, gamma: float | None = None) -> tuple[float, _Coefficients]:
    if not spec.mu > 0:
        raise SolverError("QRNM needs mu > 0; use the regularized driver (method 'reg') for mu = 0")
    q = spec.q
    if gamma is None:
        gamma, alpha, kappa = qrnm_parameters(q)
    else:
        kappa = kappa_gamma(gamma, q)
        if kappa < 0:
            raise SolverError(f"kappa(gamma) = {kappa:.3e} < 0 for gamma = {gamma}, q = {q}")
        alpha = qrnm_alpha(gamma, q)
    g = gamma
    return g, _Coefficients((1 + 3 * g) / (6 * g), (1 + 2 * g) * spec.L / 24.0,
                            (3 * g - 1) / (6 * g), spec.mu * kappa / 24.0, alpha)


def qrnm(problem: CompositeProblem, spec: QRegularSpec, x0, cfg: SolverConfig | None = None,
         stop=None) -> RunLog:
    """Quartic regularization of Newton's method for Q-regular ``f``.

    ``spec`` bounds ``D^4 f``.  Stops once ``F(x_k) - xi_k <= eps`` unless a
    custom ``stop(k, x, F, xi)`` is supplied.
    """
    cfg = cfg or SolverConfig("qrnm")
    gamma, coef = qrnm_coefficients(spec, cfg.gamma)
    return _iterate(problem, x0, cfg, coef, "qrnm", stop=stop,
                    params={"gamma": gamma, "alpha": coef.alpha, "q": spec.q,
                            "mu": spec.mu, "L": spec.L})


def solve(problem: CompositeProblem, x0, cfg: SolverConfig, spec: QRegularSpec | None = None,
          mu: float | None = None, L: float | None = None) -> RunLog:
    if cfg.method == "dqnm":
        return dqnm(problem, x0, cfg)
    if cfg.method == "rqn":
        return rqn(problem, x0, cfg, mu, L)
    if cfg.method == "qrnm":
        if spec is None:
            raise SolverError("QRNM needs a Q-regularity spec (mu, L)")
        return qrnm(problem, spec, x0, cfg)
    raise SolverError(f"method {cfg.method!r} is driven from solvers.regularization")


def reference_optimum(problem: CompositeProblem, x0, cfg: SolverConfig, extra: int = 50,
                      **kw) -> tuple[float, float]:
    """Long-run estimate of ``F*``: solve to gap 1e-14, then ``extra`` more iterations.

    Returns ``(F_star, xi_star)``; raises if the certificate exceeds the
    estimate beyond rounding.
    """
    long_cfg = SolverConfig(cfg.method, cfg.tau, cfg.gamma, cfg.q, eps=1e-14,
                            max_iter=cfg.max_iter + 2000, tol=cfg.tol,
                            max_sub_iter=cfg.max_sub_iter)
    run = solve(problem, x0, long_cfg, **kw)
    more_cfg = SolverConfig(cfg.method, cfg.tau, cfg.gamma, cfg.q, eps=0.0, max_iter=extra,
                            tol=cfg.tol, max_sub_iter=cfg.max_sub_iter)
    run2 = solve(problem, run.x, more_cfg, **kw)
    F_star = float(min(run.F.min(), run2.F.min()))
    xs = np.concatenate([run.xi, run2.xi])
    xi_star = float(np.nanmax(xs)) if np.any(np.isfinite(xs)) else -np.inf
    if xi_star > F_star + 1e-12 * (1.0 + abs(F_star)):
        raise SolverError(f"certificate {xi_star} exceeds long-run optimum {F_star}")
    return F_star, xi_star
