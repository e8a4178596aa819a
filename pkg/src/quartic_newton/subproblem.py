"""Minimization of quartic models ``<g,h> + <Ah,h>/2 + c4 ||h||_B^4 + psi(anchor + h)``.

The solver consumes ``c4`` directly; mapping a method's coefficients onto
``(A, c4)`` is the caller's job (see ``solvers.methods``).

Unconstrained models are solved exactly through the generalized eigenbasis
of ``(A, B)``: with ``A = B V diag(w) V^T B`` and ``V^T B V = I`` the
stationarity condition ``g + A h + 4 c4 ||h||^2 B h = 0`` becomes the scalar
secular equation ``|z(r)| = r`` with ``z_i(r) = -beta_i / (w_i + 4 c4 r^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .linalg import PSD_TOL, Metric, as_vector, sym
from .objective import BallIndicator, BoxIndicator, L1, Psi, Zero

_EPS = np.finfo(float).eps


class SubproblemError(RuntimeError):
    pass


class BudgetExhausted(SubproblemError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True, eq=False)
class QuarticModel:
    g: np.ndarray
    A: np.ndarray
    c4: float
    metric: Metric
    psi: Psi = field(default_factory=Zero)
    anchor: np.ndarray | None = None

    def __post_init__(self):
        n = self.metric.n
        object.__setattr__(self, "g", as_vector(self.g, n))
        object.__setattr__(self, "A", sym(self.A, n))
        if not self.c4 > 0:
            raise ValueError("quartic coefficient must be positive")
        anchor = np.zeros(n) if self.anchor is None else as_vector(self.anchor, n)
        object.__setattr__(self, "anchor", anchor)

    @property
    def n(self) -> int:
        return self.metric.n

    def smooth_grad(self, h) -> np.ndarray:
        Bh = self.metric.B @ h
        return self.g + self.A @ h + 4.0 * self.c4 * (h @ Bh) * Bh

    def psi_value(self, h) -> float:
        return self.psi.value(self.anchor + h)


@dataclass(frozen=True)
class ModelSolution:
    """``value`` is the smooth model value; ``psi_value`` is ``psi(anchor + h)``.

    ``kkt_residual`` is the dual norm of a subgradient of the full model at
    ``h``; ``lower_bound`` turns it into a certified lower bound on the model
    minimum via uniform convexity of ``c4 ||.||^4``.
    """

    h: np.ndarray
    value: float
    psi_value: float
    lam: float
    kkt_residual: float
    c4: float
    iters: int = 0

    @property
    def total(self) -> float:
        return self.value + self.psi_value

    @property
    def lower_bound(self) -> float:
        s = self.kkt_residual
        if s == 0:
            return self.total
        return self.total - 0.75 * s * (3.0 * s / (4.0 * self.c4)) ** (1.0 / 3.0)


def model_value(model: QuarticModel, h) -> float:
    """Smooth part ``<g,h> + <Ah,h>/2 + c4 ||h||_B^4`` (psi excluded)."""
    h = as_vector(h, model.n)
    s = h @ (model.metric.B @ h)
    return float(model.g @ h + 0.5 * (h @ (model.A @ h)) + model.c4 * s * s)


class _Spectrum:
    """Generalized eigenbasis of ``(A, B)``; coordinates ``z = V^T B h``."""

    def __init__(self, model: QuarticModel):
        w, V = sla.eigh(model.A, model.metric.B)
        scale = max(abs(w[0]), abs(w[-1])) if w.size else 0.0
        if w[0] < -PSD_TOL * (1.0 + scale):
            raise SubproblemError(f"model quadratic is not PSD (min eigenvalue {w[0]:.3e})")
        self.w = np.maximum(w, 0.0)
        self.V = V
        self.c4 = model.c4

    def coords(self, v: np.ndarray) -> np.ndarray:
        # V^T v for a dual vector v
        return self.V.T @ v

    def to_primal(self, z: np.ndarray) -> np.ndarray:
        return self.V @ z


def _secular_root(w: np.ndarray, beta: np.ndarray, c4: float) -> tuple[np.ndarray, float, int]:
    """Solve ``|z(r)| = r`` with ``z = -beta / (w + 4 c4 r^2)``; return ``(z, r, iters)``."""
    bnorm = float(np.linalg.norm(beta))
    if bnorm == 0.0:
        return np.zeros_like(beta), 0.0, 0
    b2 = beta * beta

    def resid(r):
        den = w + 4.0 * c4 * r * r
        with np.errstate(divide="ignore", invalid="ignore"):
            zn = np.sqrt(np.sum(np.where(b2 > 0, b2 / (den * den), 0.0)))
        return zn - r

    lo, hi = 0.0, (bnorm / (4.0 * c4)) ** (1.0 / 3.0)
    if w.size and w[0] > 0:
        hi = min(hi, bnorm / w[0])
    # safeguarded Newton: bisect whenever the step leaves the bracket
    r, iters = hi, 0
    while iters < 400:
        iters += 1
        den = w + 4.0 * c4 * r * r
        with np.errstate(divide="ignore", invalid="ignore"):
            zn2 = np.sum(np.where(b2 > 0, b2 / (den * den), 0.0))
            dz = np.sum(np.where(b2 > 0, b2 / den**3, 0.0))
        zn = np.sqrt(zn2)
        phi = zn - r
        if phi > 0:
            lo = r
        else:
            hi = r
        if phi == 0 or hi - lo <= 4.0 * _EPS * hi:
            break
        dphi = -(8.0 * c4 * r) * dz / zn - 1.0
        r_new = r - phi / dphi if np.isfinite(phi) and np.isfinite(dphi) else np.nan
        if not lo < r_new < hi:
            r_new = 0.5 * (lo + hi)
        if abs(r_new - r) <= 2.0 * _EPS * r:
            r = r_new
            break
        r = r_new
    z = -beta / (w + 4.0 * c4 * r * r)
    return z, float(np.linalg.norm(z)), iters


def _finish(model: QuarticModel, h: np.ndarray, lam: float, residual_vec: np.ndarray,
            iters: int) -> ModelSolution:
    return ModelSolution(h=h, value=model_value(model, h), psi_value=model.psi_value(h), lam=lam,
                         kkt_residual=model.metric.dual_norm(residual_vec), c4=model.c4,
                         iters=iters)


def solve_unconstrained(model: QuarticModel, tol: float = 1e-12,
                        spectrum: _Spectrum | None = None) -> ModelSolution:
    if not isinstance(model.psi, Zero):
        raise SubproblemError("solve_unconstrained needs psi = Zero")
    if not np.any(model.g):
        h = np.zeros(model.n)
        return _finish(model, h, 0.0, np.zeros(model.n), 0)
    sp = spectrum or _Spectrum(model)
    z, r, iters = _secular_root(sp.w, sp.coords(model.g), model.c4)
    h = sp.to_primal(z)
    sol = _finish(model, h, 4.0 * model.c4 * r * r, model.smooth_grad(h), iters)
    if sol.kkt_residual > max(tol, 1e-10) * (1.0 + model.metric.dual_norm(model.g)):
        raise SubproblemError(f"secular solve residual {sol.kkt_residual:.3e} above tolerance")
    return sol


def solve_ball(model: QuarticModel, tol: float = 1e-12) -> ModelSolution:
    """Minimize over ``||anchor + h - center||_B <= radius``.

    The ball need not be centered at the anchor: for a multiplier ``nu`` the
    penalized model ``m(h) + (nu/2)||h - d||^2`` (``d = center - anchor``) is
    again an unconstrained quartic model in the same eigenbasis, and its
    distance to ``d`` decreases in ``nu``.
    """
    psi = model.psi
    if not isinstance(psi, BallIndicator):
        raise SubproblemError("solve_ball needs a BallIndicator")
    if not np.array_equal(psi.metric.B, model.metric.B):
        raise SubproblemError("ball metric must match the model metric")
    sp = _Spectrum(model)
    B = model.metric.B
    d = psi.center - model.anchor
    beta = sp.coords(model.g)
    delta = sp.coords(B @ d)  # d = V delta
    rho = psi.radius

    def z_of(nu):
        return _secular_root(sp.w + nu, beta - nu * delta, model.c4)

    z, _, iters = z_of(0.0)
    if np.linalg.norm(z - delta) <= rho:
        h = sp.to_primal(z)
        return _finish(model, h, 4.0 * model.c4 * float(z @ z), model.smooth_grad(h), iters)

    lo, hi = 0.0, 1.0
    while np.linalg.norm(z_of(hi)[0] - delta) > rho:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise SubproblemError("ball multiplier bracket failed")
    nu, info = brentq(lambda v: np.linalg.norm(z_of(v)[0] - delta) - rho, lo, hi,
                      xtol=1e-300, full_output=True)
    n_it = info.iterations
    z = z_of(nu)[0]
    z = delta + rho * (z - delta) / np.linalg.norm(z - delta)
    h = sp.to_primal(z)
    grad = model.smooth_grad(h)
    hd = h - d
    nu = max(0.0, -float(grad @ hd) / float(hd @ (B @ hd)))
    return _finish(model, h, nu, grad + nu * (B @ hd), iters + n_it)


def solve_prox_grad(model: QuarticModel, tol: float = 1e-12, max_iter: int = 20000,
                    h0=None) -> ModelSolution:
    """Accelerated proximal gradient with backtracking and adaptive restart.

    Stops when the subgradient recovered from the prox-gradient step has
    dual norm ``<= tol (1 + ||g||^*)``.
    """
    psi, m = model.psi, model.metric
    if not isinstance(psi, (BoxIndicator, L1)):
        raise SubproblemError("solve_prox_grad handles box and l1 terms")
    if not m.is_diagonal:
        raise SubproblemError("solve_prox_grad needs a diagonal metric")
    x0 = model.anchor
    target = tol * (1.0 + m.dual_norm(model.g))

    def prox(v, t):
        return psi.prox(x0 + v, t, m) - x0

    def total(h):
        return model_value(model, h) + psi.value(x0 + h)

    if h0 is None:
        try:
            free = QuarticModel(model.g, model.A, model.c4, m)
            h0 = solve_unconstrained(free, tol=1e-8).h
        except SubproblemError:
            h0 = np.zeros(model.n)
    h = psi.project(x0 + as_vector(h0, model.n), m) - x0
    y = h.copy()
    t = 1.0
    Lk = max(float(np.max(np.abs(np.linalg.eigvalsh(model.A)))) / np.min(np.diag(m.B))
             + 12.0 * model.c4 * float(h @ m.B @ h), 1e-12)
    F_h = total(h)
    best = None
    plain = True  # y == h: no momentum in the current step
    for it in range(1, max_iter + 1):
        gy = model.smooth_grad(y)
        fy = model_value(model, y)
        while True:
            T = prox(y - m.solve(gy) / Lk, 1.0 / Lk)
            dT = T - y
            if model_value(model, T) <= fy + gy @ dT + 0.5 * Lk * (dT @ m.B @ dT) + 8 * _EPS * abs(fy):
                break
            Lk *= 2.0
        sub = model.smooth_grad(T) - gy + Lk * (m.B @ (y - T))
        res = m.dual_norm(sub)
        if best is None or res < best[1]:
            best = (T, res, sub)
        if res <= target:
            return _finish(model, T, Lk, sub, it)
        F_T = total(T)
        if F_T > F_h and not plain:
            y, t, plain = h.copy(), 1.0, True
            continue
        # a plain backtracked step only "increases" F through rounding; keep it
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = T + ((t - 1.0) / t_next) * (T - h)
        plain = t == 1.0
        h, F_h, t = T, F_T, t_next
        Lk *= 0.9
    T, res, sub = best
    raise BudgetExhausted(f"prox-gradient budget exhausted (residual {res:.3e})",
                          best=_finish(model, T, Lk, sub, max_iter))


def solve_model(model: QuarticModel, tol: float = 1e-12, max_iter: int = 20000) -> ModelSolution:
    """Dispatch on the composite term."""
    if isinstance(model.psi, Zero):
        return solve_unconstrained(model, tol)
    if isinstance(model.psi, BallIndicator):
        return solve_ball(model, tol)
    return solve_prox_grad(model, tol, max_iter)
