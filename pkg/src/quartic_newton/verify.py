"""Finite-difference oracles and randomized inequality checkers.

Every checker returns a ``CheckReport``.  Scalar inequalities ``lhs <= rhs``
are scored by the relative violation ``(lhs - rhs) / (1 + sum |terms|)``;
matrix inequalities ``X >= 0`` by ``-lambda_min(X) / (1 + sum ||operands||)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .forms import DenseTensor, EuclideanPower, QuarticForm, SumOfLinearQuartics, norm_f
from .generators import random_convex_form, random_convex_quartic, random_metric, random_psd
from .linalg import Metric, operator_norm
from .objective import (CompositeProblem, ConvexQuartic, LogSumExp, QRegularSpec,
                        SmoothOracle, prox_regularized)
from .solvers.parameters import kappa_gamma, qrnm_parameters

log = logging.getLogger(__name__)

# --- finite differences ------------------------------------------------------

FD_BASE_STEP = {1: 1e-3, 2: 3e-3, 3: 6e-3, 4: 1e-2}
_FD_HALF_WIDTH = {1: 3, 2: 3, 3: 4, 4: 4}


@lru_cache(maxsize=None)
def _stencil(order: int) -> tuple[tuple[int, float], ...]:
    """Central weights on ``-K..K`` exact for polynomials of degree ``2K``."""
    K = _FD_HALF_WIDTH[order]
    pts = list(range(-K, K + 1))
    size = len(pts)
    # solve sum_j w_j j^i = order! delta_{i,order} exactly
    A = [[Fraction(p) ** i for p in pts] + [Fraction(math.factorial(order) if i == order else 0)]
         for i in range(size)]
    for col in range(size):
        piv = next(r for r in range(col, size) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        for r in range(size):
            if r != col and A[r][col] != 0:
                fac = A[r][col] / A[col][col]
                A[r] = [a - fac * b for a, b in zip(A[r], A[col])]
    return tuple((p, float(A[i][size] / A[i][i])) for i, p in enumerate(pts) if A[i][size] != 0)


def fd_step(x, h, order: int) -> float:
    return FD_BASE_STEP[order] * (1.0 + np.linalg.norm(x)) / (1.0 + np.linalg.norm(h))


def fd_directional(f: SmoothOracle | Callable, x, h, order: int) -> float:
    """Approximates ``D^p f(x)[h]^p`` from function values along ``x + t h``."""
    if order not in FD_BASE_STEP:
        raise ValueError("order must be 1, 2, 3 or 4")
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    t = fd_step(x, h, order)
    val = f.value if hasattr(f, "value") else f
    return sum(w * val(x + (j * t) * h) for j, w in _stencil(order)) / t**order


# --- reports -----------------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    trials: int
    failures: int
    worst_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class _Tally:
    def __init__(self, name: str, tol: float):
        self.name, self.tol = name, tol
        self.trials = self.failures = 0
        self.worst = -math.inf

    def scalar(self, lhs: float, rhs: float, *terms: float):
        """Score ``lhs <= rhs``."""
        scale = 1.0 + abs(lhs) + abs(rhs) + sum(abs(t) for t in terms)
        self._record((lhs - rhs) / scale)

    def psd(self, X: np.ndarray, *operands: np.ndarray):
        """Score ``X >= 0``."""
        scale = 1.0 + sum(np.linalg.norm(O, 2) for O in operands)
        self._record(-float(np.linalg.eigvalsh(0.5 * (X + X.T))[0]) / scale)

    def _record(self, v: float):
        self.worst = max(self.worst, v)
        if v > self.tol:
            self.failures += 1

    def trial(self):
        self.trials += 1

    def report(self) -> CheckReport:
        worst = self.worst if self.trials else 0.0
        return CheckReport(self.name, self.trials, self.failures, float(max(worst, 0.0)), self.tol)


def _points(rng, n, k=2):
    scale = np.exp(rng.uniform(-2.0, 1.0, k))
    return [s * rng.standard_normal(n) for s in scale]


# --- quartic forms -----------------------------------------------------------

def check_theorem21(form: QuarticForm, trials: int, seed: int, tol: float = 1e-9) -> CheckReport:
    """Positivity of ``f4[x]^2[y]^2`` and its three consequences."""
    rng = np.random.default_rng(seed)
    t = _Tally("theorem21", tol)
    for _ in range(trials):
        t.trial()
        x, y = _points(rng, form.n)
        Xx, Xy, Xxy = form.contract2(x), form.contract2(y), form.contract11(x, y)
        dx, dy = form.eval4(x), form.eval4(y)
        xxyy = float(y @ Xx @ y)
        xxxy = float(form.contract3(x) @ y)
        t.scalar(0.0, xxyy)
        t.psd(Xx + Xy - 2.0 * Xxy, Xx, Xy, 2.0 * Xxy)
        t.scalar(xxyy**2, dx * dy)
        t.scalar(xxxy**2, dx * xxyy)
    return t.report()


def _abs_magnitude(form: QuarticForm, x) -> float:
    """Sum of absolute terms in ``f4[x]^4``; equals the value for sign-free structured forms."""
    if isinstance(form, DenseTensor):
        ax = np.abs(x)
        return float(np.einsum("ijkl,i,j,k,l->", np.abs(form.T), ax, ax, ax, ax))
    return abs(form.eval4(x))


def check_homogeneity(form: QuarticForm, trials: int, seed: int, tol: float = 1e-12) -> CheckReport:
    rng = np.random.default_rng(seed)
    tally = _Tally("homogeneity", tol)
    for _ in range(trials):
        tally.trial()
        x = rng.standard_normal(form.n)
        d = form.eval4(x)
        mag = _abs_magnitude(form, x)
        for s in (-2.0, 0.5, 3.0):
            v = abs(form.eval4(s * x) - s**4 * d) / (1e-300 + s**4 * mag)
            tally._record(v)
    return tally.report()


def check_uniform_convexity(form: QuarticForm, trials: int, seed: int,
                            tol: float = 1e-9) -> CheckReport:
    """Degree-four uniform convexity of ``d = f4[.]^4`` and its quadratic growth bound."""
    rng = np.random.default_rng(seed)
    t = _Tally("uniform_convexity", tol)
    for _ in range(trials):
        t.trial()
        x, y = _points(rng, form.n)
        h = y - x
        dx, dy = form.eval4(x), form.eval4(y)
        lin = 4.0 * float(form.contract3(x) @ h)
        quad = 12.0 * float(h @ form.contract2(x) @ h)
        dh = form.eval4(h)
        t.scalar(dx + lin + dh / 3.0, dy, dh)
        t.scalar(dx + lin + quad / 6.0, dy, quad)
    return t.report()


def qf_hessian_quadratic(form: QuarticForm, x, h) -> float:
    """``<hess Q_f(x) h, h>`` for ``Q_f = ||.||_f^2 / 2``."""
    d = form.eval4(x)
    a = float(h @ form.contract2(x) @ h)
    b = float(form.contract3(x) @ h)
    return 3.0 * a / math.sqrt(d) - 2.0 * b * b / d**1.5


def check_qf_bounds(form: QuarticForm, trials: int, seed: int, tol: float = 1e-9) -> CheckReport:
    """Two-sided curvature bounds of ``Q_f`` (positive-definite forms, ``x != 0``)."""
    rng = np.random.default_rng(seed)
    t = _Tally("qf_bounds", tol)
    for _ in range(trials):
        x, h = _points(rng, form.n)
        d = form.eval4(x)
        if not d > 0:
            continue
        t.trial()
        mid = qf_hessian_quadratic(form, x, h)
        lower = 12.0 * float(h @ form.contract2(x) @ h) / (12.0 * math.sqrt(d))
        upper = 3.0 * norm_f(form, h) ** 2
        t.scalar(lower, mid)
        t.scalar(mid, upper)
    return t.report()


def check_operator_inequality(n: int, trials: int, seed: int, tol: float = 1e-9,
                              metric: Metric | None = None) -> CheckReport:
    """``A B^{-1} A <= L A`` for PSD ``A`` and ``L >= ||A||``."""
    rng = np.random.default_rng(seed)
    t = _Tally("operator_inequality", tol)
    for _ in range(trials):
        t.trial()
        k = n if n else int(rng.integers(2, 9))
        m = metric or random_metric(rng, k)
        A = random_psd(rng, k, int(rng.integers(1, k + 1)))
        L = operator_norm(A, m) * (1.0 + float(rng.uniform(0.0, 0.5)) * (rng.random() < 0.5))
        ABA = A @ m.solve(A)
        t.psd(L * A - ABA, L * A, ABA)
    return t.report()


# --- quartic polynomials -----------------------------------------------------

def check_d3_bound(qq: ConvexQuartic, trials: int, seed: int, tol: float = 1e-9) -> CheckReport:
    """``D^3 f(x)[h] <= (1/tau) hess f(x) + 12 tau f4[h]^2`` for ``tau`` in ``(0, 10]``."""
    rng = np.random.default_rng(seed)
    t = _Tally("d3_bound", tol)
    for _ in range(trials):
        t.trial()
        x, h = _points(rng, qq.n)
        tau = float(rng.uniform(1e-3, 10.0))
        H, D3, F2 = qq.hess(x), qq.d3_dir(x, h), qq.f4.contract2(h)
        t.psd(H / tau + 12.0 * tau * F2 - D3, H / tau, 12.0 * tau * F2, D3)
    return t.report()


def _model_terms(f: SmoothOracle, x, y):
    h = y - x
    return f.value(x), float(f.grad(x) @ h), float(h @ f.hess(x) @ h), f.value(y)


def check_sandwich(qq: ConvexQuartic, tau: float, trials: int, seed: int,
                   tol: float = 1e-9) -> CheckReport:
    """Lower and upper quadratic-plus-quartic models bracket ``f``."""
    if not 1.0 / 3.0 < tau < 0.5:
        raise ValueError("tau must lie in (1/3, 1/2)")
    rng = np.random.default_rng(seed)
    t = _Tally("sandwich", tol)
    for _ in range(trials):
        t.trial()
        x, y = _points(rng, qq.n)
        fx, lin, quad, fy = _model_terms(qq, x, y)
        d = qq.f4.eval4(y - x)
        low = fx + lin + (3 * tau - 1) / (6 * tau) * quad + (1 - 2 * tau) * d
        up = fx + lin + (3 * tau + 1) / (6 * tau) * quad + (1 + 2 * tau) * d
        t.scalar(low, fy, fx, lin, quad, d)
        t.scalar(fy, up, fx, lin, quad, d)
    return t.report()


def check_qreg_bounds(f: SmoothOracle, spec: QRegularSpec, gamma: float | None, trials: int,
                      seed: int, m: Metric | None = None, center=None, radius: float = 2.0,
                      tol: float = 1e-9) -> CheckReport:
    """Q-regular lower/upper growth bounds and the refined lower bound at ``gamma*``.

    ``gamma=None`` draws a fresh ``gamma`` in ``[1/3, 1/2]`` per trial.
    """
    m = m or Metric.identity(f.n)
    rng = np.random.default_rng(seed)
    t = _Tally("qreg_bounds", tol)
    q = spec.q
    c = np.zeros(f.n) if center is None else np.asarray(center, dtype=float)
    c_q = q ** (1.0 / 3.0)
    for _ in range(trials):
        t.trial()
        x = c + radius * rng.uniform() * rng.standard_normal(f.n) / math.sqrt(f.n)
        y = c + radius * rng.uniform() * rng.standard_normal(f.n) / math.sqrt(f.n)
        g = float(rng.uniform(1.0 / 3.0, 0.5)) if gamma is None else gamma
        fx, lin, quad, fy = _model_terms(f, x, y)
        r4 = m.norm(y - x) ** 4
        if q > 0:
            kap = kappa_gamma(g, q)
            low = fx + lin + (3 * g - 1) / (6 * g) * quad + spec.mu / 24.0 * r4 * kap
            t.scalar(low, fy, fx, lin, quad, spec.mu * r4 * abs(kap))
            refined = fx + lin + 3 * c_q / 22.0 * quad + 5 * spec.mu / 72.0 * (3 / 22) ** 3 * r4
            t.scalar(refined, fy, fx, lin, quad, spec.mu * r4)
        up = fx + lin + (3 * g + 1) / (6 * g) * quad + (2 * g + 1) / 24.0 * spec.L * r4
        t.scalar(fy, up, fx, lin, quad, spec.L * r4)
    return t.report()


def check_glip(f: SmoothOracle, trials: int, seed: int, m: Metric | None = None,
               radius: float = 2.0, n_segment: int = 33, slack: float = 1e-6) -> CheckReport:
    """``(||grad f(x) - grad f(y)||^*)^2 <= M_xy <grad f(x) - grad f(y), x - y>``."""
    m = m or Metric.identity(f.n)
    rng = np.random.default_rng(seed)
    t = _Tally("glip", slack)
    for _ in range(trials):
        t.trial()
        x, y = _points(rng, f.n)
        x, y = x * radius / 3, y * radius / 3
        dg = f.grad(x) - f.grad(y)
        M = max(operator_norm(f.hess(x + s * (y - x)), m) for s in np.linspace(0, 1, n_segment))
        lhs, rhs = m.dual_norm(dg) ** 2, M * float(dg @ (x - y))
        t._record((lhs - rhs) / (1e-300 + abs(rhs)) if lhs > rhs else -1.0)
    return t.report()


def check_derivatives(f: SmoothOracle, trials: int, seed: int,
                      tols=(1e-7, 1e-6, 1e-5, 1e-4), radius: float = 1.0) -> CheckReport:
    """Analytic directional derivatives of orders 1-4 against finite differences."""
    rng = np.random.default_rng(seed)
    t = _Tally("derivatives", 1.0)
    for _ in range(trials):
        t.trial()
        x = radius * rng.standard_normal(f.n)
        h = rng.standard_normal(f.n)
        h /= np.linalg.norm(h)
        exact = (float(f.grad(x) @ h), float(h @ f.hess(x) @ h),
                 float(h @ f.d3_dir(x, h) @ h), float(f.d4_dir(x, h)))
        scale = 1.0 + abs(f.value(x)) + sum(abs(e) for e in exact)
        worst = max(abs(fd_directional(f, x, h, p + 1) - e) / (scale * tols[p])
                    for p, e in enumerate(exact))
        t._record(worst)
    return t.report()


def check_regularized_qreg(f: SmoothOracle, M4: float, H: float, trials: int, seed: int,
                           m: Metric | None = None, tol: float = 1e-9) -> CheckReport:
    """``(H - M4)||h||^4 <= D^4 f_H[h]^4 <= (H + M4)||h||^4`` for ``f_H = f + (H/24)||.-c||^4``."""
    m = m or Metric.identity(f.n)
    rng = np.random.default_rng(seed)
    t = _Tally("regularized_qreg", tol)
    center = rng.standard_normal(f.n)
    fH = prox_regularized(f, center, H, m)
    for _ in range(trials):
        t.trial()
        x, h = _points(rng, f.n)
        r4 = m.norm(h) ** 4
        t.scalar(abs(f.d4_dir(x, h)), M4 * r4)
        d4 = fH.d4_dir(x, h)
        t.scalar((H - M4) * r4, d4, H * r4)
        t.scalar(d4, (H + M4) * r4, H * r4)
    return t.report()


# --- convergence -------------------------------------------------------------

def rate_fit(log_or_values, F_star: float, floor: float = 0.0) -> tuple[float, float, bool]:
    """``(max_ratio, geo_mean_ratio, degenerate)`` of ``(F_{k+1}-F*)/(F_k-F*)``.

    Ratios are taken while ``F_k - F* > floor``; the trailing nonpositive gaps
    are trimmed.  ``degenerate`` is set (and ``(1, 1)`` returned) when no
    ratio is available.
    """
    vals = [r.F for r in log_or_values] if _is_records(log_or_values) else list(log_or_values)
    gaps = np.asarray(vals, dtype=float) - F_star
    ratios = []
    for k in range(len(gaps) - 1):
        if gaps[k] <= max(floor, 0.0):
            break
        ratios.append(max(gaps[k + 1], 0.0) / gaps[k])
    if not ratios:
        log.warning("rate_fit: fewer than two positive gaps")
        return 1.0, 1.0, True
    r = np.array(ratios)
    pos = r[r > 0]
    geo = float(np.exp(np.mean(np.log(pos)))) if pos.size else 0.0
    return float(r.max()), geo, False


def _is_records(obj) -> bool:
    try:
        return len(obj) > 0 and hasattr(obj[0], "F")
    except TypeError:
        return False


def gap_ratios(values: Iterable[float], floor: float = 0.0) -> np.ndarray:
    g = np.asarray(list(values), dtype=float)
    out = []
    for k in range(len(g) - 1):
        if g[k] <= floor:
            break
        out.append(max(g[k + 1], 0.0) / g[k])
    return np.array(out)


# --- suites ------------------------------------------------------------------

SUITES = ("forms", "models", "qreg", "all")


def _per_trial(name, trials, seed, body, tol) -> CheckReport:
    """Run ``body(rng) -> CheckReport`` once per trial on fresh random objects."""
    rng = np.random.default_rng(seed)
    total = _Tally(name, tol)
    for _ in range(trials):
        rep = body(np.random.default_rng(rng.integers(2**63)))
        total.trials += 1 if rep.trials else 0
        total.failures += 1 if rep.failures else 0
        total.worst = max(total.worst, rep.worst_violation)
    return total.report()


def _dim(rng) -> int:
    return int(rng.integers(2, 9))


def forms_suite(trials: int, seed: int) -> list[CheckReport]:
    def form(rng):
        n = _dim(rng)
        return random_convex_form(rng, n, random_metric(rng, n))

    def pd_form(rng):
        # strictly positive forms: a Euclidean power plus linear quartics
        n = _dim(rng)
        m = random_metric(rng, n)
        k = int(rng.integers(0, n + 1))
        return SumOfLinearQuartics(rng.standard_normal((k, n)), rng.uniform(0.0, 1.0, k),
                                   float(rng.uniform(0.05, 1.0)), m)

    sub = lambda rng: int(rng.integers(2**31))  # noqa: E731
    return [
        _per_trial("theorem21", trials, seed,
                   lambda r: check_theorem21(form(r), 1, sub(r)), 1e-9),
        _per_trial("homogeneity", trials, seed + 1,
                   lambda r: check_homogeneity(form(r), 1, sub(r)), 1e-12),
        _per_trial("uniform_convexity", trials, seed + 2,
                   lambda r: check_uniform_convexity(form(r), 1, sub(r)), 1e-9),
        _per_trial("qf_bounds", trials, seed + 3,
                   lambda r: check_qf_bounds(pd_form(r), 1, sub(r)), 1e-9),
        check_operator_inequality(0, trials, seed + 4),
    ]


def models_suite(trials: int, seed: int) -> list[CheckReport]:
    def quartic(rng):
        n = _dim(rng)
        return random_convex_quartic(rng, n, random_metric(rng, n))

    def euclid_quartic(rng):
        n = _dim(rng)
        m = random_metric(rng, n)
        return random_convex_quartic(rng, n, m, random_convex_form(rng, n, m, "power"))

    sub = lambda rng: int(rng.integers(2**31))  # noqa: E731
    return [
        _per_trial("d3_bound", trials, seed, lambda r: check_d3_bound(quartic(r), 1, sub(r)), 1e-9),
        _per_trial("sandwich", trials, seed + 1,
                   lambda r: check_sandwich(quartic(r), float(r.uniform(0.34, 0.49)), 1, sub(r)),
                   1e-9),
        _per_trial("glip", trials, seed + 2,
                   lambda r: check_glip(euclid_quartic(r) if r.random() < 0.5 else quartic(r), 1,
                                        sub(r)), 1e-6),
    ]


def qreg_suite(trials: int, seed: int) -> list[CheckReport]:
    def euclid(rng):
        # (s/24)||x||^4 plus a convex quadratic: mu = L = s
        n = _dim(rng)
        m = random_metric(rng, n)
        s = float(rng.uniform(0.2, 3.0))
        qq = ConvexQuartic(rng.standard_normal(n), 0.0, rng.standard_normal(n),
                           random_psd(rng, n), EuclideanPower(s / 24.0, m))
        return qq, QRegularSpec(s, s), m

    def lse_reg(rng):
        n = _dim(rng)
        m = random_metric(rng, n, "diag")
        lse = LogSumExp(0.5 * rng.standard_normal((2 * n, n)), rng.standard_normal(2 * n), 0.0, m)
        M4 = lse.fourth_derivative_bound()
        fH = prox_regularized(lse, rng.standard_normal(n), 2.0 * M4, m)
        return fH, QRegularSpec(M4, 3.0 * M4), m

    def qreg(rng):
        f, spec, m = euclid(rng) if rng.random() < 0.5 else lse_reg(rng)
        gamma = None if rng.random() < 0.5 else qrnm_parameters(spec.q)[0]
        return check_qreg_bounds(f, spec, gamma, 1, int(rng.integers(2**31)), m)

    def reg(rng):
        n = _dim(rng)
        m = random_metric(rng, n, "diag")
        lse = LogSumExp(0.5 * rng.standard_normal((2 * n, n)), rng.standard_normal(2 * n), 0.0, m)
        M4 = lse.fourth_derivative_bound()
        return check_regularized_qreg(lse, M4, float(rng.uniform(1.0, 3.0)) * M4, 1,
                                      int(rng.integers(2**31)), m)

    return [_per_trial("qreg_bounds", trials, seed, qreg, 1e-9),
            _per_trial("regularized_qreg", trials, seed + 1, reg, 1e-9)]


def run_suite(suite: str, trials: int, seed: int) -> list[CheckReport]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    out: list[CheckReport] = []
    if suite in ("forms", "all"):
        out += forms_suite(trials, seed)
    if suite in ("models", "all"):
        out += models_suite(trials, seed + 100)
    if suite in ("qreg", "all"):
        out += qreg_suite(trials, seed + 200)
    return out


def form_suite_for(form: QuarticForm, trials: int, seed: int) -> list[CheckReport]:
    """Form checks on one user-supplied form."""
    return [check_theorem21(form, trials, seed), check_homogeneity(form, trials, seed + 1),
            check_uniform_convexity(form, trials, seed + 2)]


def grad_map_trial(problem: CompositeProblem, spec: QRegularSpec, xbar, M: float):
    """``((||Phi'(T)||^*)^2, 2M(Phi(xbar) - Phi(T)))`` for one prox-gradient step."""
    from .solvers.regularization import grad_map_step
    T, nrm = grad_map_step(problem.f, problem.psi, xbar, M, problem.metric)
    return nrm**2, 2.0 * M * (problem.value(xbar) - problem.value(T))


__all__ = [
    "CheckReport", "fd_directional", "fd_step", "check_theorem21", "check_homogeneity",
    "check_uniform_convexity", "check_qf_bounds", "check_operator_inequality", "check_d3_bound",
    "check_sandwich", "check_qreg_bounds", "check_glip", "check_derivatives",
    "check_regularized_qreg", "rate_fit", "gap_ratios", "run_suite", "form_suite_for",
    "grad_map_trial", "SUITES",
]
