"""Dense linear-algebra kernels: B-Euclidean norms, SPD solves, shifted systems.

Every vector lives in R^n with the geometry ``||x||_B = <Bx, x>^{1/2}`` and
the dual norm ``||g||_B^* = <g, B^{-1} g>^{1/2}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

PSD_TOL = 1e-9


class DimensionError(ValueError):
    pass


class SingularSystemError(np.linalg.LinAlgError):
    pass


def as_vector(x, n: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"expected length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def sym(M, n: int | None = None) -> np.ndarray:
    """Return ``(M + M^T)/2`` as a float array, checking the shape."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if n is not None and A.shape[0] != n:
        raise DimensionError(f"expected {n}x{n}, got {A.shape}")
    return 0.5 * (A + A.T)


@dataclass(frozen=True, eq=False)
class Metric:
    """Positive-definite operator ``B`` with a cached Cholesky factor."""

    B: np.ndarray
    chol: tuple = field(init=False, repr=False)
    is_diagonal: bool = field(init=False, repr=False)

    def __post_init__(self):
        B = sym(self.B)
        try:
            chol = sla.cho_factor(B, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ValueError("metric operator is not positive definite") from exc
        B.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "chol", chol)
        object.__setattr__(self, "is_diagonal", bool(np.all(B == np.diag(np.diag(B)))))

    @classmethod
    def identity(cls, n: int) -> "Metric":
        return cls(np.eye(n))

    @classmethod
    def diag(cls, d) -> "Metric":
        return cls(np.diag(as_vector(d)))

    @property
    def n(self) -> int:
        return self.B.shape[0]

    def apply(self, x) -> np.ndarray:
        return self.B @ x

    def solve(self, g) -> np.ndarray:
        """Return ``B^{-1} g``."""
        return sla.cho_solve(self.chol, g)

    def inner(self, x, y) -> float:
        return float(x @ (self.B @ y))

    def norm(self, x) -> float:
        return b_norm(x, self)

    def dual_norm(self, g) -> float:
        return dual_norm(g, self)


def b_norm(x, m: Metric) -> float:
    x = as_vector(x, m.n)
    return float(np.sqrt(max(x @ (m.B @ x), 0.0)))


def dual_norm(g, m: Metric) -> float:
    g = as_vector(g, m.n)
    return float(np.sqrt(max(g @ m.solve(g), 0.0)))


def generalized_eigh(A, m: Metric) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of ``A v = lam B v`` with ``V^T B V = I``."""
    A = sym(A, m.n)
    return sla.eigh(A, m.B)


def operator_norm(A, m: Metric) -> float:
    """``||A|| = min{lam : lam B >= +-A}``, i.e. the largest |eigenvalue| of B^{-1}A."""
    A = sym(A, m.n)
    if not np.any(A):
        return 0.0
    w = sla.eigh(A, m.B, eigvals_only=True)
    return float(max(abs(w[0]), abs(w[-1])))


def min_generalized_eig(A, m: Metric) -> float:
    A = sym(A, m.n)
    return float(sla.eigh(A, m.B, eigvals_only=True)[0])


def is_psd(A, m: Metric | None = None, tol: float = PSD_TOL) -> bool:
    """Eigenvalue floor test ``lam_min >= -tol (1 + ||A||)``."""
    A = sym(A)
    if m is None:
        w = np.linalg.eigvalsh(A)
        scale = float(np.max(np.abs(w))) if w.size else 0.0
    else:
        w = sla.eigh(A, m.B, eigvals_only=True)
        scale = float(max(abs(w[0]), abs(w[-1])))
    return bool(w[0] >= -tol * (1.0 + scale))


def shifted_solve(A, lam: float, m: Metric, rhs) -> np.ndarray:
    """Solve ``(A + lam B) h = rhs`` for ``A >= 0``."""
    A = sym(A, m.n)
    rhs = as_vector(rhs, m.n)
    if lam < 0:
        raise ValueError("shift must be nonnegative")
    K = A + lam * m.B
    try:
        c = sla.cho_factor(K, lower=True)
        h = sla.cho_solve(c, rhs)
    except np.linalg.LinAlgError:
        # semidefinite K: least-squares solve, then demand consistency
        h, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    res = np.linalg.norm(K @ h - rhs)
    if not np.isfinite(res) or res > 1e-10 * (1.0 + np.linalg.norm(rhs)):
        raise SingularSystemError("shifted system is singular and rhs is not in its range")
    return h
