"""Smooth oracles with derivatives up to order four, composite terms, Q-regular specs.

Third derivatives are only ever exposed as the directional matrix
``d3_dir(x, h) = D^3 f(x)[h]``; fourth derivatives as ``d4_dir(x, h) = D^4 f(x)[h]^4``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from .forms import EuclideanPower, QuarticForm
from .linalg import Metric, as_vector, is_psd, sym


class SmoothOracle:
    """Function of ``n`` variables with derivatives up to order four."""

    n: int

    def value(self, x) -> float:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        raise NotImplementedError

    def hess(self, x) -> np.ndarray:
        raise NotImplementedError

    def d3_dir(self, x, h) -> np.ndarray:
        raise NotImplementedError

    def d4_dir(self, x, h) -> float:
        raise NotImplementedError

    def __call__(self, x) -> float:
        return self.value(x)


@dataclass(frozen=True, eq=False)
class ConvexQuartic(SmoothOracle):
    """Quartic polynomial stored by its exact Taylor expansion at ``base``::

        f(y) = c0 + <g0, h> + <H0 h, h>/2 + T3[h]^3/6 + f4[h]^4,   h = y - base

    ``T3`` is the dense symmetric third-derivative tensor at ``base`` (or None
    for zero).  ``f4 = D^4 f / 24``.
    """

    base: np.ndarray
    c0: float
    g0: np.ndarray
    H0: np.ndarray
    f4: QuarticForm
    T3: np.ndarray | None = None

    def __post_init__(self):
        n = self.f4.n
        object.__setattr__(self, "base", as_vector(self.base, n))
        object.__setattr__(self, "g0", as_vector(self.g0, n))
        object.__setattr__(self, "H0", sym(self.H0, n))
        object.__setattr__(self, "c0", float(self.c0))
        if self.T3 is not None:
            T3 = np.asarray(self.T3, dtype=float)
            if T3.shape != (n, n, n):
                raise ValueError(f"T3 must have shape {(n, n, n)}")
            if not np.any(T3):
                T3 = None
            object.__setattr__(self, "T3", T3)

    @property
    def n(self) -> int:
        return self.f4.n

    def _h(self, y) -> np.ndarray:
        return as_vector(y, self.n) - self.base

    def _t3(self, u) -> np.ndarray:
        if self.T3 is None:
            return np.zeros((self.n, self.n))
        return self.T3 @ u

    def value(self, y) -> float:
        return eval_taylor(self, y)

    def grad(self, y) -> np.ndarray:
        h = self._h(y)
        return self.g0 + self.H0 @ h + 0.5 * self._t3(h) @ h + 4.0 * self.f4.contract3(h)

    def hess(self, y) -> np.ndarray:
        h = self._h(y)
        return sym(self.H0 + self._t3(h) + 12.0 * self.f4.contract2(h))

    def d3_dir(self, y, u) -> np.ndarray:
        h = self._h(y)
        u = as_vector(u, self.n)
        return sym(self._t3(u) + 24.0 * self.f4.contract11(h, u))

    def d4_dir(self, y, u) -> float:
        return 24.0 * self.f4.eval4(u)

    def expand_at(self, x) -> "ConvexQuartic":
        """Re-expand the same polynomial around a new base point."""
        x = as_vector(x, self.n)
        T3 = np.stack([self.d3_dir(x, e) for e in np.eye(self.n)], axis=-1)
        return ConvexQuartic(x, self.value(x), self.grad(x), self.hess(x), self.f4, T3)


def eval_taylor(qq: ConvexQuartic, y) -> float:
    """Exact degree-4 Taylor value of ``qq`` at ``y``."""
    h = qq._h(y)
    Hh = qq.H0 @ h
    val = qq.c0 + qq.g0 @ h + 0.5 * (h @ Hh) + qq.f4.eval4(h)
    if qq.T3 is not None:
        val += (qq._t3(h) @ h) @ h / 6.0
    return float(val)


@dataclass(frozen=True, eq=False)
class FormOracle(SmoothOracle):
    """``x -> f4[x - center]^4`` for a quartic form."""

    form: QuarticForm
    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, self.form.n))

    @property
    def n(self) -> int:
        return self.form.n

    def value(self, x) -> float:
        return self.form.eval4(as_vector(x, self.n) - self.center)

    def grad(self, x) -> np.ndarray:
        return 4.0 * self.form.contract3(as_vector(x, self.n) - self.center)

    def hess(self, x) -> np.ndarray:
        return 12.0 * self.form.contract2(as_vector(x, self.n) - self.center)

    def d3_dir(self, x, h) -> np.ndarray:
        return 24.0 * self.form.contract11(as_vector(x, self.n) - self.center, h)

    def d4_dir(self, x, h) -> float:
        return 24.0 * self.form.eval4(h)


@dataclass(frozen=True, eq=False)
class SumOracle(SmoothOracle):
    """Weighted sum of oracles."""

    terms: tuple
    weights: tuple = ()

    def __post_init__(self):
        terms = tuple(self.terms)
        weights = tuple(float(w) for w in self.weights) or (1.0,) * len(terms)
        if len(weights) != len(terms) or not terms:
            raise ValueError("need one weight per term")
        if len({t.n for t in terms}) != 1:
            raise ValueError("terms have different dimensions")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.terms[0].n

    def _sum(self, name, *args):
        return sum(w * getattr(t, name)(*args) for w, t in zip(self.weights, self.terms))

    def value(self, x) -> float:
        return float(self._sum("value", x))

    def grad(self, x) -> np.ndarray:
        return self._sum("grad", x)

    def hess(self, x) -> np.ndarray:
        return self._sum("hess", x)

    def d3_dir(self, x, h) -> np.ndarray:
        return self._sum("d3_dir", x, h)

    def d4_dir(self, x, h) -> float:
        return float(self._sum("d4_dir", x, h))


@dataclass(frozen=True, eq=False)
class LogSumExp(SmoothOracle):
    """``f(x) = log sum_i exp(<a_i, x> + b_i) + (rho/2) ||x||_B^2``.

    Directional derivatives along ``h`` are the cumulants of ``v = A h`` under
    the softmax weights.
    """

    A: np.ndarray
    b: np.ndarray
    rho: float = 0.0
    metric: Metric | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = as_vector(self.b, A.shape[0])
        metric = self.metric or Metric.identity(A.shape[1])
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def _p(self, x) -> np.ndarray:
        return softmax(self.A @ as_vector(x, self.n) + self.b)

    def value(self, x) -> float:
        x = as_vector(x, self.n)
        return float(logsumexp(self.A @ x + self.b) + 0.5 * self.rho * (x @ self.metric.B @ x))

    def grad(self, x) -> np.ndarray:
        x = as_vector(x, self.n)
        return self.A.T @ self._p(x) + self.rho * (self.metric.B @ x)

    def hess(self, x) -> np.ndarray:
        p = self._p(x)
        S = np.diag(p) - np.outer(p, p)
        return sym(self.A.T @ S @ self.A + self.rho * self.metric.B)

    def d3_dir(self, x, h) -> np.ndarray:
        p = self._p(x)
        v = self.A @ as_vector(h, self.n)
        pw = p * (v - p @ v)
        dS = np.diag(pw) - np.outer(pw, p) - np.outer(p, pw)
        return sym(self.A.T @ dS @ self.A)

    def d4_dir(self, x, h) -> float:
        p = self._p(x)
        v = self.A @ as_vector(h, self.n)
        w = v - p @ v
        m2 = p @ w**2
        return float(p @ w**4 - 3.0 * m2 * m2)

    def fourth_derivative_bound(self) -> float:
        """``M4`` with ``|D^4 f(x)[h]^4| <= M4 ||h||_B^4`` for all x.

        The fourth cumulant of a variable with range ``r`` is at most ``r^4/4``
        in absolute value, and ``r <= max_ij ||a_i - a_j||^* ||h||``.
        """
        A = self.A
        if A.shape[0] < 2:
            return 0.0
        r = max(self.metric.dual_norm(A[i] - A[j])
                for i in range(A.shape[0]) for j in range(i + 1, A.shape[0]))
        return 0.25 * r**4


# --- composite terms -------------------------------------------------------

DOMAIN_RTOL = 1e-10


class Psi:
    """Simple closed convex function with an explicit prox in a metric."""

    kind = "abstract"

    def value(self, x) -> float:
        raise NotImplementedError

    def contains(self, x) -> bool:
        return True

    def prox(self, v, t: float, m: Metric) -> np.ndarray:
        """``argmin_y psi(y) + ||y - v||_B^2 / (2t)``."""
        raise NotImplementedError

    def project(self, x, m: Metric) -> np.ndarray:
        return np.asarray(x, dtype=float)

    def diameter(self, m: Metric) -> float:
        return np.inf


@dataclass(frozen=True)
class Zero(Psi):
    kind = "zero"

    def value(self, x) -> float:
        return 0.0

    def prox(self, v, t, m):
        return np.asarray(v, dtype=float).copy()


@dataclass(frozen=True, eq=False)
class BallIndicator(Psi):
    """Indicator of ``{x : ||x - center||_B <= radius}``; prox is radial projection."""

    center: np.ndarray
    radius: float
    metric: Metric
    kind = "ball"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", as_vector(self.center, self.metric.n))

    def contains(self, x) -> bool:
        return self.metric.norm(np.asarray(x) - self.center) <= self.radius * (1 + DOMAIN_RTOL)

    def value(self, x) -> float:
        return 0.0 if self.contains(x) else np.inf

    def project(self, x, m=None):
        d = np.asarray(x, dtype=float) - self.center
        r = self.metric.norm(d)
        if r <= self.radius:
            return np.asarray(x, dtype=float).copy()
        return self.center + (self.radius / r) * d

    def prox(self, v, t, m):
        if m is not self.metric and not np.array_equal(m.B, self.metric.B):
            raise ValueError("ball prox requires the ball metric")
        return self.project(v)

    def diameter(self, m):
        return 2.0 * self.radius


def _require_diagonal(m: Metric, what: str):
    if not m.is_diagonal:
        raise ValueError(f"{what} prox requires a diagonal metric")


@dataclass(frozen=True, eq=False)
class BoxIndicator(Psi):
    lo: np.ndarray
    hi: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo, hi = as_vector(self.lo), as_vector(self.hi)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("empty box")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        slack = DOMAIN_RTOL * (1 + np.abs(self.lo) + np.abs(self.hi))
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def value(self, x) -> float:
        return 0.0 if self.contains(x) else np.inf

    def project(self, x, m=None):
        return np.clip(x, self.lo, self.hi)

    def prox(self, v, t, m):
        _require_diagonal(m, "box")
        return self.project(v)

    def diameter(self, m):
        return m.norm(self.hi - self.lo)


@dataclass(frozen=True)
class L1(Psi):
    weight: float
    kind = "l1"

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("l1 weight must be nonnegative")

    def value(self, x) -> float:
        return float(self.weight * np.sum(np.abs(x)))

    def prox(self, v, t, m):
        _require_diagonal(m, "l1")
        v = np.asarray(v, dtype=float)
        thr = t * self.weight / np.diag(m.B)
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """``F(x) = f(x) + psi(x)`` over ``dom psi``."""

    f: SmoothOracle
    psi: Psi
    metric: Metric

    def __post_init__(self):
        if self.f.n != self.metric.n:
            raise ValueError("oracle and metric dimensions differ")

    @property
    def n(self) -> int:
        return self.f.n

    def value(self, x) -> float:
        p = self.psi.value(x)
        if not np.isfinite(p):
            return np.inf
        return self.f.value(x) + p


# --- quartic regularity ----------------------------------------------------

@dataclass(frozen=True)
class QRegularSpec:
    """``mu ||h||^4 <= D^4 f(x)[h]^4 <= L ||h||^4`` on a set ``S``.

    Note the normalization: these constants bound the fourth derivative
    itself, i.e. ``24 f4`` for a quartic polynomial.
    """

    mu: float
    L: float
    S: str = "E"

    def __post_init__(self):
        if not (0 <= self.mu <= self.L * (1 + 1e-12)):
            raise ValueError(f"need 0 <= mu <= L, got mu={self.mu}, L={self.L}")

    @property
    def q(self) -> float:
        return min(self.mu / self.L, 1.0) if self.L > 0 else 0.0


def qreg_combine(specs: Sequence[tuple[QRegularSpec, float]]) -> QRegularSpec:
    """Q-regularity constants of a nonnegative weighted sum."""
    if any(w < 0 for _, w in specs):
        raise ValueError("weights must be nonnegative")
    mu = sum(w * s.mu for s, w in specs)
    L = sum(w * s.L for s, w in specs)
    return QRegularSpec(mu, L, " & ".join(s.S for s, _ in specs))


def qreg_affine(spec: QRegularSpec, sigma_min: float, sigma_max: float) -> QRegularSpec:
    """Constants of ``x -> phi(A x)`` given the extreme singular values of ``A``."""
    if not 0 < sigma_min <= sigma_max:
        raise ValueError("need 0 < sigma_min <= sigma_max")
    return QRegularSpec(spec.mu * sigma_min**4, spec.L * sigma_max**4, spec.S)


def euclidean_quartic(m: Metric, center=None, scale: float = 1.0 / 24.0) -> ConvexQuartic:
    """``scale * ||x - center||_B^4``; the default scale gives ``D^4 = ||h||^4``."""
    center = np.zeros(m.n) if center is None else center
    return ConvexQuartic(center, 0.0, np.zeros(m.n), np.zeros((m.n, m.n)), EuclideanPower(scale, m))


def build_taylor3(f: SmoothOracle, xbar, H: float, m: Metric) -> ConvexQuartic:
    """Third-order Taylor polynomial of ``f`` at ``xbar`` plus ``(H/24)||y - xbar||^4``."""
    if not H > 0:
        raise ValueError("H must be positive")
    xbar = as_vector(xbar, f.n)
    T3 = np.stack([f.d3_dir(xbar, e) for e in np.eye(f.n)], axis=-1)
    T3 = (T3 + T3.transpose(1, 0, 2) + T3.transpose(2, 1, 0)
          + T3.transpose(0, 2, 1) + T3.transpose(1, 2, 0) + T3.transpose(2, 0, 1)) / 6.0
    return ConvexQuartic(xbar, f.value(xbar), f.grad(xbar), f.hess(xbar),
                         EuclideanPower(H / 24.0, m), T3)


def sampled_convexity(f: SmoothOracle, m: Metric, n_samples: int = 100, seed: int = 0,
                      radius: float = 3.0, center=None) -> bool:
    """Hessian PSD test at random points of a ball (a check, not a proof)."""
    rng = np.random.default_rng(seed)
    center = np.zeros(f.n) if center is None else center
    for _ in range(n_samples):
        x = center + radius * rng.standard_normal(f.n) / np.sqrt(f.n)
        if not is_psd(f.hess(x), m):
            return False
    return True


def regularize(p: CompositeProblem, x0, eps: float, R: float,
               L: float) -> tuple[CompositeProblem, QRegularSpec]:
    """``F + (H/24)||x - x0||^4`` with ``H = 12 eps / R^4``.

    ``L`` bounds ``D^4 f`` from above; the result is Q-regular with
    ``(mu, L) = (H, L + H)``.
    """
    if not (eps > 0 and R > 0):
        raise ValueError("eps and R must be positive")
    H = 12.0 * eps / R**4
    reg = FormOracle(EuclideanPower(H / 24.0, p.metric), x0)
    f = SumOracle((p.f, reg))
    return CompositeProblem(f, p.psi, p.metric), QRegularSpec(H, L + H)


def prox_regularized(f: SmoothOracle, xbar, H: float, m: Metric) -> SumOracle:
    """``f_{xbar,H}(x) = f(x) + (H/24)||x - xbar||^4``."""
    return SumOracle((f, FormOracle(EuclideanPower(H / 24.0, m), xbar)))
