"""Regularized driver for ``mu = 0`` and the proximal-point inner solver.

The inner solver minimizes ``F(x) + (H/24)||x - xbar||^4`` with ``H = 2 M4``
in two stages: QRNM until ``2 M (F_H(x_k) - xi_k) <= (beta eps / D_psi)^2``,
then one gradient-mapping step.  ``M`` always comes from the level-set
Hessian bound ``4 ||hess phi(x)|| + (2/3) L D^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..linalg import Metric, operator_norm
from ..objective import (CompositeProblem, Psi, QRegularSpec, SmoothOracle, prox_regularized,
                         regularize)
from .methods import RunLog, SolverConfig, SolverError, qrnm

_EPS = np.finfo(float).eps


def regularization_iteration_bound(L: float, R: float, eps: float, gap0: float) -> float:
    """``(22/3) (1 + L R^4 / (12 eps))^{1/3} ln(2 gap0 / eps)``."""
    return (22.0 / 3.0) * (1.0 + L * R**4 / (12.0 * eps)) ** (1.0 / 3.0) * \
        math.log(max(2.0 * gap0 / eps, 1.0))


def regularized_solve(problem: CompositeProblem, x0, eps: float, R: float, L: float,
                      cfg: SolverConfig | None = None) -> RunLog:
    """eps-solution for ``0 <= D^4 f <= L`` given ``||x0 - x*|| <= R``.

    Runs QRNM on the regularized objective to certificate gap ``eps/2``.  The
    returned log's records refer to the regularized objective; ``params``
    carries ``F_original`` at the final point.
    """
    base = cfg or SolverConfig("reg")
    reg_problem, spec = regularize(problem, x0, eps, R, L)
    inner = SolverConfig("qrnm", None, base.gamma, None, eps / 2.0, base.max_iter, base.tol,
                         base.max_sub_iter)
    run = qrnm(reg_problem, spec, x0, inner)
    run.method = "reg"
    run.params.update(H=12.0 * eps / R**4, eps=eps, R=R, L_f=L,
                      F_original=problem.value(run.x))
    return run


def grad_map_step(phi: SmoothOracle, psi: Psi, xbar, M: float, m: Metric) -> tuple[np.ndarray, float]:
    """Prox step on the linearization of ``phi`` at ``xbar`` with curvature ``M``.

    Returns ``T`` and the dual norm of
    ``Phi'(T) = grad phi(T) - grad phi(xbar) - M B (T - xbar)``, a subgradient
    of ``phi + psi`` at ``T``.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    xbar = np.asarray(xbar, dtype=float)
    gbar = phi.grad(xbar)
    T = psi.prox(xbar - m.solve(gbar) / M, 1.0 / M, m)
    phi_prime = phi.grad(T) - gbar - M * (m.B @ (T - xbar))
    return T, m.dual_norm(phi_prime)


def hessian_bound(phi: SmoothOracle, psi: Psi, xbar, spec: QRegularSpec, phi_lower: float | None,
                  m: Metric) -> float:
    """Bound on ``||hess phi||`` over ``{Phi <= Phi(xbar)}``.

    ``phi_lower`` is a certified lower bound on ``min Phi`` (e.g. a QRNM
    certificate); it turns ``Phi(xbar) - Phi*`` into a computable overestimate.
    """
    if phi_lower is None or not np.isfinite(phi_lower):
        raise SolverError("hessian_bound needs a finite lower bound on the optimal value")
    if not spec.mu > 0:
        raise SolverError("hessian_bound needs mu > 0")
    gap = max(phi.value(xbar) + psi.value(xbar) - phi_lower, 0.0)
    D = 2.0 * (72.0 / spec.mu * gap) ** 0.25
    return 4.0 * operator_norm(phi.hess(xbar), m) + (2.0 / 3.0) * spec.L * D * D


def stage1_iteration_bound(M: float, gap: float, D_psi: float, beta: float, eps: float) -> int:
    """``ceil((22/3^{2/3}) ln(2 M gap D^2 / (beta^2 eps^2)))``."""
    arg = 2.0 * M * gap * D_psi**2 / (beta**2 * eps**2)
    return int(math.ceil((22.0 / 3.0 ** (2.0 / 3.0)) * math.log(max(arg, 1.0))))


@dataclass
class ProxInnerResult:
    x_hat: np.ndarray
    accept: bool
    lhs: float                 # ||grad F_H(x_hat) + g_hat||^*
    rhs: float                 # beta ||grad f(x_hat) + g_hat||^*
    g_hat: np.ndarray
    M: float
    stage1_iters: int
    budget: int
    grad_map_sq: float         # (||Phi'(T)||^*)^2
    grad_map_bound: float      # 2 M (Phi(x_k) - Phi(T))
    rounding: float            # absolute rounding allowance for the previous comparison
    run: RunLog = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def grad_map_ok(self) -> bool:
        return self.grad_map_sq <= self.grad_map_bound * (1 + 1e-9) + self.rounding


def prox_inner_solve(problem: CompositeProblem, xbar, M4: float, beta: float, D_psi: float | None,
                     eps: float, cfg: SolverConfig | None = None) -> ProxInnerResult:
    """Approximate prox point of ``F`` at ``xbar`` satisfying the acceptance test

        ||grad F_H(x_hat) + g_hat||^* <= beta ||grad f(x_hat) + g_hat||^*,  g_hat in d psi(x_hat).
    """
    if not M4 > 0:
        raise SolverError("M4 must be positive")
    if not 0 < beta < 1:
        raise SolverError("beta must lie in (0, 1)")
    m, psi = problem.metric, problem.psi
    D_psi = psi.diameter(m) if D_psi is None else D_psi
    if not np.isfinite(D_psi):
        raise SolverError("prox_inner_solve needs a bounded domain (finite D_psi)")
    xbar = np.asarray(xbar, dtype=float)
    H = 2.0 * M4
    phi = prox_regularized(problem.f, xbar, H, m)
    spec = QRegularSpec(M4, 3.0 * M4)
    target = (beta * eps / D_psi) ** 2
    state: dict = {}

    def stop(k, x, F, xi):
        if xi is None:
            return False
        M = hessian_bound(phi, psi, x, spec, xi, m)
        state.update(M=M, k=k)
        if k == 0:
            state.update(M0=M, gap0=F - xi)
        return 2.0 * M * (F - xi) <= target

    base = cfg or SolverConfig("prox")
    inner = SolverConfig("qrnm", None, None, None, 0.0, base.max_iter, base.tol, base.max_sub_iter)
    run = qrnm(CompositeProblem(phi, psi, m), spec, xbar, inner, stop=stop)
    if not run.converged:
        raise SolverError(f"stage 1 budget exhausted after {run.iterations} iterations")
    xk, M = run.x, state["M"]

    T, gm_norm = grad_map_step(phi, psi, xk, M, m)
    g_hat = -phi.grad(xk) - M * (m.B @ (T - xk))
    Phi_k = phi.value(xk) + psi.value(xk)
    Phi_T = phi.value(T) + psi.value(T)
    lhs = m.dual_norm(phi.grad(T) + g_hat)
    rhs = beta * m.dual_norm(problem.f.grad(T) + g_hat)

    M2 = operator_norm(problem.f.hess(xbar), m)
    gap0 = state["gap0"]
    diagnostics = {
        "M_closed_form": 4 * M2 + 48 * math.sqrt(2 * gap0 / M4),
        "M_closed_form_substituted": 4 * M2 + 48 * math.sqrt(2) * math.sqrt(M4 * gap0),
        "M0": state["M0"],
        "gap0": gap0,
        "F_hat": problem.value(T),
    }
    return ProxInnerResult(
        x_hat=T, accept=bool(lhs <= rhs), lhs=lhs, rhs=rhs, g_hat=g_hat, M=M,
        stage1_iters=run.iterations,
        budget=stage1_iteration_bound(state["M0"], gap0, D_psi, beta, eps) + 2,
        grad_map_sq=gm_norm**2, grad_map_bound=2.0 * M * (Phi_k - Phi_T),
        rounding=2.0 * M * 8.0 * _EPS * max(abs(Phi_k), 1.0),
        run=run, diagnostics=diagnostics)


@dataclass
class ProxOuterLog:
    steps: list[ProxInnerResult]
    x: np.ndarray
    F: list[float]


def prox_outer_loop(problem: CompositeProblem, x0, M4: float, n_outer: int, beta: float,
                    eps: float, D_psi: float | None = None,
                    cfg: SolverConfig | None = None) -> ProxOuterLog:
    """Plain (unaccelerated) proximal-point loop with moving prox center."""
    x = np.asarray(x0, dtype=float)
    steps, Fs = [], [problem.value(x)]
    for _ in range(n_outer):
        res = prox_inner_solve(problem, x, M4, beta, D_psi, eps, cfg)
        steps.append(res)
        x = res.x_hat
        Fs.append(problem.value(x))
    return ProxOuterLog(steps, x, Fs)
