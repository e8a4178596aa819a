"""Symmetric 4-linear forms ``f4`` and their contractions.

Conventions, for a form with ``phi(x) = f4[x]^4``::

    eval4(x)          = f4[x]^4
    contract3(x)      = f4[x]^3        = grad(phi)(x) / 4
    contract2(x)      = f4[x]^2        = hess(phi)(x) / 12
    contract11(x, y)  = f4[x, y, ., .]

Three representations share this interface.  ``DenseTensor`` is O(n^4) and is
meant as a test oracle for small n.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .linalg import Metric, as_vector, sym

DENSE_MAX_DIM = 8


class FormError(ValueError):
    pass


class QuarticForm:
    """Common interface; subclasses implement the contractions."""

    n: int

    def eval4(self, x) -> float:
        raise NotImplementedError

    def contract3(self, x) -> np.ndarray:
        raise NotImplementedError

    def contract2(self, x) -> np.ndarray:
        return self.contract11(x, x)

    def contract11(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, t: float) -> "QuarticForm":
        raise NotImplementedError

    def _vec(self, x) -> np.ndarray:
        return as_vector(x, self.n)


@dataclass(frozen=True, eq=False)
class EuclideanPower(QuarticForm):
    """``f4[h]^4 = H ||h||_B^4``."""

    H: float
    metric: Metric

    def __post_init__(self):
        if not self.H >= 0:
            raise FormError("EuclideanPower coefficient must be nonnegative")
        object.__setattr__(self, "H", float(self.H))

    @property
    def n(self) -> int:
        return self.metric.n

    def eval4(self, x) -> float:
        x = self._vec(x)
        s = x @ (self.metric.B @ x)
        return float(self.H * s * s)

    def contract3(self, x) -> np.ndarray:
        x = self._vec(x)
        Bx = self.metric.B @ x
        return self.H * (x @ Bx) * Bx

    def contract11(self, x, y) -> np.ndarray:
        # f4[a,b,c,d] = (H/3)(<a,b><c,d> + <a,c><b,d> + <a,d><b,c>) in the B inner product
        x, y = self._vec(x), self._vec(y)
        B = self.metric.B
        Bx, By = B @ x, B @ y
        M = (x @ By) * B + np.outer(Bx, By) + np.outer(By, Bx)
        return (self.H / 3.0) * sym(M)

    def scaled(self, t: float) -> "EuclideanPower":
        return EuclideanPower(self.H * t, self.metric)


@dataclass(frozen=True, eq=False)
class SumOfLinearQuartics(QuarticForm):
    """``f4[h]^4 = sum_i c_i <a_i, h>^4 + sigma ||h||_B^4``.

    ``a`` holds the vectors ``a_i`` as rows.
    """

    a: np.ndarray
    c: np.ndarray
    sigma: float
    metric: Metric

    def __post_init__(self):
        n = self.metric.n
        a = np.asarray(self.a, dtype=float).reshape(-1, n)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if a.shape[0] != c.shape[0]:
            raise FormError("number of vectors and coefficients differ")
        if np.any(c < 0) or self.sigma < 0:
            raise FormError("coefficients must be nonnegative")
        a.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def n(self) -> int:
        return self.metric.n

    def _power(self) -> EuclideanPower:
        return EuclideanPower(self.sigma, self.metric)

    def eval4(self, x) -> float:
        x = self._vec(x)
        t = self.a @ x
        return float(self.c @ t**4) + self._power().eval4(x)

    def contract3(self, x) -> np.ndarray:
        x = self._vec(x)
        t = self.a @ x
        return self.a.T @ (self.c * t**3) + self._power().contract3(x)

    def contract11(self, x, y) -> np.ndarray:
        x, y = self._vec(x), self._vec(y)
        w = self.c * (self.a @ x) * (self.a @ y)
        M = (self.a.T * w) @ self.a
        return sym(M) + self._power().contract11(x, y)

    def scaled(self, t: float) -> "SumOfLinearQuartics":
        return SumOfLinearQuartics(self.a, self.c * t, self.sigma * t, self.metric)


@dataclass(frozen=True, eq=False)
class DenseTensor(QuarticForm):
    """Fully symmetric ``n x n x n x n`` array."""

    T: np.ndarray
    check_symmetry: bool = field(default=True, repr=False)

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        if T.ndim != 4 or len(set(T.shape)) != 1:
            raise FormError(f"expected an n^4 array, got shape {T.shape}")
        if T.shape[0] > DENSE_MAX_DIM:
            raise FormError(f"DenseTensor limited to n <= {DENSE_MAX_DIM}")
        if self.check_symmetry and not _is_symmetric(T):
            raise FormError("tensor is not symmetric under index permutations")
        T.setflags(write=False)
        object.__setattr__(self, "T", T)

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def eval4(self, x) -> float:
        x = self._vec(x)
        return float(np.einsum("ijkl,i,j,k,l->", self.T, x, x, x, x))

    def contract3(self, x) -> np.ndarray:
        x = self._vec(x)
        return np.einsum("ijkl,j,k,l->i", self.T, x, x, x)

    def contract11(self, x, y) -> np.ndarray:
        x, y = self._vec(x), self._vec(y)
        return sym(np.einsum("ijkl,k,l->ij", self.T, x, y))

    def scaled(self, t: float) -> "DenseTensor":
        return DenseTensor(self.T * t, check_symmetry=False)


def _is_symmetric(T: np.ndarray, n_checks: int = 64, tol: float = 1e-12) -> bool:
    # spot-check on random index tuples; exhaustive for tiny n
    n = T.shape[0]
    scale = max(float(np.max(np.abs(T))), 1e-300)
    rng = np.random.default_rng(0)
    if n**4 <= n_checks:
        tuples = list(itertools.product(range(n), repeat=4))
    else:
        tuples = [tuple(r) for r in rng.integers(0, n, size=(n_checks, 4))]
    for idx in tuples:
        v = T[idx]
        for perm in itertools.permutations(idx):
            if abs(T[perm] - v) > tol * scale:
                return False
    return True


def polarize(form: QuarticForm) -> DenseTensor:
    """Materialize any form as a dense tensor from ``eval4`` values only.

    Uses the 4-linear polarization identity
    ``f[x1,x2,x3,x4] = (1/192) sum_{e2,e3,e4 = +-1} e2 e3 e4 phi(x1 + e2 x2 + e3 x3 + e4 x4)``.
    """
    n = form.n
    if n > DENSE_MAX_DIM:
        raise FormError(f"polarization limited to n <= {DENSE_MAX_DIM}")
    eye = np.eye(n)
    T = np.empty((n, n, n, n))
    signs = list(itertools.product((1.0, -1.0), repeat=3))
    for idx in itertools.combinations_with_replacement(range(n), 4):
        i, j, k, l = idx
        acc = 0.0
        for s2, s3, s4 in signs:
            acc += s2 * s3 * s4 * form.eval4(eye[i] + s2 * eye[j] + s3 * eye[k] + s4 * eye[l])
        val = acc / 192.0
        for perm in set(itertools.permutations(idx)):
            T[perm] = val
    return DenseTensor(T, check_symmetry=False)


def norm_f(form: QuarticForm, x) -> float:
    """``||x||_f = f4[x]^{1/4}``; raises if the form is negative at ``x``."""
    d = form.eval4(x)
    if d < 0:
        raise FormError(f"form is not positive semidefinite: f4[x]^4 = {d}")
    return float(d**0.25)


def qf_value(form: QuarticForm, x) -> float:
    """``Q_f(x) = ||x||_f^2 / 2``."""
    d = form.eval4(x)
    if d < 0:
        raise FormError(f"form is not positive semidefinite: f4[x]^4 = {d}")
    return 0.5 * float(np.sqrt(d))


def _unit(x: np.ndarray, m: Metric) -> np.ndarray:
    return x / m.norm(x)


def estimate_mu_L(form: QuarticForm, m: Metric, n_samples: int | None = None,
                  seed: int = 0) -> tuple[float, float]:
    """Bounds ``mu ||u||^4 <= f4[u]^4 <= L ||u||^4`` w.r.t. the metric ``m``.

    Exact for ``EuclideanPower`` in its own metric and for single-term
    ``SumOfLinearQuartics`` in its own metric.  Otherwise the values come from
    sampling the unit sphere, so ``mu_hat`` over-estimates ``mu`` and
    ``L_hat`` under-estimates ``L``.
    """
    n = form.n
    same_metric = getattr(form, "metric", None) is m or (
        hasattr(form, "metric") and np.array_equal(form.metric.B, m.B))
    if isinstance(form, EuclideanPower) and same_metric:
        return form.H, form.H
    if isinstance(form, SumOfLinearQuartics) and same_metric:
        if form.c.size == 0:
            return form.sigma, form.sigma
        if form.c.size == 1:
            top = form.sigma + float(form.c[0]) * m.dual_norm(form.a[0]) ** 4
            return (top if n == 1 else form.sigma), top

    if n_samples is None:
        n_samples = 10 * n * n
    rng = np.random.default_rng(seed)
    Lc = np.linalg.cholesky(m.B)
    # B-unit vectors: u = L^{-T} z / |z|
    Z = rng.standard_normal((max(n_samples, 1), n))
    cands = [np.linalg.solve(Lc.T, z) for z in Z]
    for _ in range(min(n, 8)):
        y = rng.standard_normal(n)
        M = form.contract2(y)
        _, V = np.linalg.eigh(sym(M))
        cands.extend(V.T)
    if isinstance(form, SumOfLinearQuartics):
        cands.extend(m.solve(ai) for ai in form.a)
    cands = [u for u in cands if m.norm(u) > 0]
    vals = np.array([form.eval4(_unit(u, m)) for u in cands])
    mu_hat = float(vals.min())
    # power-type ascent from the best candidates: u <- B^{-1} f4[u]^3 increases a convex homogeneous form
    L_hat = float(vals.max())
    for j in np.argsort(vals)[-3:]:
        u = _unit(cands[j], m)
        for _ in range(50):
            v = m.solve(form.contract3(u))
            if m.norm(v) == 0:
                break
            u = _unit(v, m)
            L_hat = max(L_hat, form.eval4(u))
    return mu_hat, L_hat
