"""Seeded problem instances with exact metadata, and random objects for the checkers.

Problem dictionaries follow the on-disk format of ``io.load_problem``.  All
``known`` constants refer to ``D^4 f`` (i.e. ``24 f4`` for a quartic
polynomial), so ``f(x) = x^4`` has ``mu = L = 24``.
"""

from __future__ import annotations

import math

import numpy as np

from .forms import DenseTensor, EuclideanPower, QuarticForm, SumOfLinearQuartics
from .linalg import Metric
from .objective import ConvexQuartic, LogSumExp

KINDS = ("sum_quartic", "quadratic_plus_quartic", "taylor3", "lse_reg")


class GeneratorError(ValueError):
    pass


# --- random building blocks --------------------------------------------------

def random_metric(rng: np.random.Generator, n: int, kind: str = "dense") -> Metric:
    if kind == "identity":
        return Metric.identity(n)
    if kind == "diag":
        return Metric.diag(np.exp(rng.uniform(-1.0, 1.0, n)))
    G = rng.standard_normal((n, n))
    return Metric(G @ G.T / n + 0.5 * np.eye(n))


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None,
               scale: float = 1.0) -> np.ndarray:
    r = n if rank is None else rank
    G = rng.standard_normal((n, r))
    return scale * (G @ G.T) / max(r, 1)


def b_orthonormal(rng: np.random.Generator, m: Metric, k: int) -> np.ndarray:
    """``k`` rows that are orthonormal in the ``B`` inner product."""
    Lc = np.linalg.cholesky(m.B)
    Q, _ = np.linalg.qr(rng.standard_normal((m.n, m.n)))
    return np.linalg.solve(Lc.T, Q[:, :k]).T


def squared_quadratic_form(Q: np.ndarray) -> DenseTensor:
    """Dense tensor of ``(x^T Q x)^2``; convex when ``Q`` is PSD."""
    T = (np.einsum("ij,kl->ijkl", Q, Q) + np.einsum("ik,jl->ijkl", Q, Q)
         + np.einsum("il,jk->ijkl", Q, Q)) / 3.0
    return DenseTensor(T, check_symmetry=False)


def random_convex_form(rng: np.random.Generator, n: int, m: Metric | None = None,
                       kind: str | None = None) -> QuarticForm:
    """A convex (hence PSD) quartic form of one of three structured kinds."""
    m = m or Metric.identity(n)
    kind = kind or rng.choice(["power", "sum", "dense"])
    if kind == "power":
        return EuclideanPower(float(rng.uniform(0.1, 2.0)), m)
    if kind == "sum":
        k = int(rng.integers(1, n + 2))
        return SumOfLinearQuartics(rng.standard_normal((k, n)), rng.uniform(0.0, 1.0, k),
                                   float(rng.uniform(0.0, 0.5)) * (rng.random() < 0.7), m)
    T = squared_quadratic_form(random_psd(rng, n, int(rng.integers(1, n + 1))))
    if rng.random() < 0.5:
        T = DenseTensor(T.T + squared_quadratic_form(random_psd(rng, n)).T, check_symmetry=False)
    return T


def random_convex_quartic(rng: np.random.Generator, n: int, m: Metric | None = None,
                          form: QuarticForm | None = None) -> ConvexQuartic:
    """Convex quartic polynomial with a nonzero third-derivative part.

    Built as ``<g,y> + <Qy,y>/2 + f4[y - c]^4`` and re-expanded at a random
    point, so every Taylor coefficient is populated.
    """
    m = m or Metric.identity(n)
    form = form or random_convex_form(rng, n, m)
    base = ConvexQuartic(rng.standard_normal(n), float(rng.standard_normal()),
                         rng.standard_normal(n), random_psd(rng, n, int(rng.integers(0, n + 1))),
                         form)
    return base.expand_at(rng.standard_normal(n))


# --- problem dictionaries ----------------------------------------------------

def _metric_dict(m: Metric) -> dict:
    if m.is_diagonal:
        return {"diag": np.diag(m.B).tolist()}
    return {"dense": m.B.tolist()}


def _choose_metric(rng, n, params) -> Metric:
    return random_metric(rng, n, params.get("metric", "identity"))


def _psi_dict(rng, n, params, m: Metric, x_hint=None) -> dict:
    kind = params.get("psi", "zero")
    if kind == "zero":
        return {"type": "zero"}
    if kind == "ball":
        center = np.zeros(n) if x_hint is None else np.asarray(x_hint) + 0.5 * rng.standard_normal(n)
        return {"type": "ball", "center": center.tolist(),
                "radius": float(params.get("radius", 2.0))}
    if kind == "box":
        if not m.is_diagonal:
            raise GeneratorError("box constraints need a diagonal metric")
        w = float(params.get("radius", 1.0))
        return {"type": "box", "lo": [-w] * n, "hi": [w] * n}
    if kind == "l1":
        if not m.is_diagonal:
            raise GeneratorError("l1 terms need a diagonal metric")
        return {"type": "l1", "weight": float(params.get("weight", 0.1))}
    raise GeneratorError(f"unknown psi type {kind!r}")


def _sum_quartic(rng, n, params) -> dict:
    m = _choose_metric(rng, n, params)
    sigma = float(params.get("sigma", 0.0))
    if sigma < 0:
        raise GeneratorError("sigma must be nonnegative")
    if "a" in params:
        # user-supplied vectors: exact bounds only for a single term
        a = np.asarray(params["a"], dtype=float).reshape(-1, n)
        c = np.asarray(params.get("c", np.ones(a.shape[0])), dtype=float).reshape(-1)
        if c.shape[0] != a.shape[0] or np.any(c < 0):
            raise GeneratorError("need one nonnegative c per vector a")
        k, orthogonal = a.shape[0], False
    else:
        k = int(params.get("terms", n))
        orthogonal = bool(params.get("orthogonal", True))
        if k < 0:
            raise GeneratorError("terms must be nonnegative")
        if orthogonal and k > n:
            raise GeneratorError("orthogonal construction needs terms <= n")
        c = rng.uniform(0.5, 2.0, k)
        if orthogonal:
            rows = b_orthonormal(rng, m, k)
            a = (m.B @ rows.T).T * rng.uniform(0.6, 1.2, k)[:, None]
        else:
            a = rng.standard_normal((k, n))
    # f4 range over the unit sphere
    weights = c * np.array([m.dual_norm(ai) ** 4 for ai in a]) if k else np.zeros(0)
    exact = orthogonal or k <= 1
    if exact and k and not orthogonal:
        lo = sigma + (weights[0] if n == 1 else 0.0)
    elif exact and k:
        lo = sigma + (1.0 / np.sum(1.0 / weights) if k == n else 0.0)
    else:
        lo = sigma
    hi = sigma + (float(weights.max()) if exact and k else float(weights.sum()))
    quad = float(params.get("quad", 1.0))
    Q = random_psd(rng, n, scale=quad) if quad > 0 else np.zeros((n, n))
    g = rng.standard_normal(n)
    smooth = {"kind": "sum_quartic", "a": a.tolist(), "c": c.tolist(), "sigma": sigma,
              "Q": Q.tolist(), "g": g.tolist()}
    known = {"mu": float(24.0 * lo), "L": float(24.0 * hi), "exact_mu_L": bool(exact)}
    return {"metric": _metric_dict(m), "smooth": smooth, "psi": _psi_dict(rng, n, params, m),
            "known": known, "x0": rng.standard_normal(n).tolist()}


def _quadratic_plus_quartic(rng, n, params) -> dict:
    m = _choose_metric(rng, n, params)
    shift = np.asarray(params["shift"], dtype=float) if "shift" in params else rng.standard_normal(n)
    if shift.shape != (n,):
        raise GeneratorError("shift must have length n")
    s4 = float(params.get("quartic", 1.0 / 24.0))
    quad = float(params.get("quad", 1.0))
    if s4 <= 0 or quad < 0:
        raise GeneratorError("need quartic > 0 and quad >= 0")
    Q = random_psd(rng, n, scale=quad) if quad > 0 else np.zeros((n, n))
    F_star = float(params.get("F_star", rng.standard_normal()))
    smooth = {"kind": "quadratic_plus_quartic", "shift": shift.tolist(), "Q": Q.tolist(),
              "quartic": s4, "offset": F_star}
    psi = _psi_dict(rng, n, params, m, x_hint=shift)
    known: dict = {"mu": 24.0 * s4, "L": 24.0 * s4, "exact_mu_L": True}
    if psi["type"] == "zero" or (psi["type"] == "ball" and
                                 m.norm(shift - np.asarray(psi["center"])) <= psi["radius"]):
        known.update(F_star=F_star, x_star=shift.tolist())
    x0 = shift + float(params.get("distance", 2.0)) * b_orthonormal(rng, m, 1)[0]
    if psi["type"] == "ball":
        c = np.asarray(psi["center"])
        d = m.norm(x0 - c)
        if d > psi["radius"]:
            x0 = c + (x0 - c) * (psi["radius"] / d)
    return {"metric": _metric_dict(m), "smooth": smooth, "psi": psi, "known": known,
            "x0": x0.tolist()}


def _lse_params(rng, n, params):
    k = int(params.get("rows", 2 * n))
    A = rng.standard_normal((k, n)) * float(params.get("scale", 0.5))
    b = rng.standard_normal(k)
    rho = float(params.get("rho", 0.0))
    return A, b, rho


def _taylor3(rng, n, params) -> dict:
    m = _choose_metric(rng, n, params)
    A, b, rho = _lse_params(rng, n, params)
    lse = LogSumExp(A, b, rho, m)
    L3 = lse.fourth_derivative_bound()
    H = float(params.get("H_factor", 3.0)) * L3
    if not H > 0:
        raise GeneratorError("taylor3 needs a positive H (at least two rows)")
    xbar = rng.standard_normal(n) * 0.5
    smooth = {"kind": "taylor3", "A": A.tolist(), "b": b.tolist(), "rho": rho,
              "xbar": xbar.tolist(), "H": H}
    known = {"mu": H, "L": H, "L3": L3, "exact_mu_L": True}
    return {"metric": _metric_dict(m), "smooth": smooth, "psi": _psi_dict(rng, n, params, m),
            "known": known, "x0": (xbar + rng.standard_normal(n)).tolist()}


def _lse_reg(rng, n, params) -> dict:
    m = _choose_metric(rng, n, params)
    A, b, rho = _lse_params(rng, n, params)
    lse = LogSumExp(A, b, rho, m)
    M4 = lse.fourth_derivative_bound()
    H = float(params.get("H_factor", 2.0)) * M4
    center = rng.standard_normal(n) * 0.5
    smooth = {"kind": "lse_reg", "A": A.tolist(), "b": b.tolist(), "rho": rho, "H": H,
              "center": center.tolist()}
    known = {"mu": max(H - M4, 0.0), "L": H + M4, "M4": M4, "exact_mu_L": False}
    return {"metric": _metric_dict(m), "smooth": smooth, "psi": _psi_dict(rng, n, params, m),
            "known": known, "x0": (center + rng.standard_normal(n)).tolist()}


_BUILDERS = {"sum_quartic": _sum_quartic, "quadratic_plus_quartic": _quadratic_plus_quartic,
             "taylor3": _taylor3, "lse_reg": _lse_reg}


def generate(kind: str, n: int, seed: int, params: dict | None = None,
             validate: bool = True, probes: int = 100_000) -> dict:
    """Problem dictionary for ``kind``; identical inputs give identical output."""
    if kind not in _BUILDERS:
        raise GeneratorError(f"unknown kind {kind!r}; choose from {KINDS}")
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise GeneratorError("n must be a positive integer")
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    doc = {"n": int(n), **_BUILDERS[kind](rng, int(n), params),
           "generator": {"kind": kind, "seed": int(seed), "params": params}}
    from .io import build_problem
    lp = build_problem(doc)
    doc["x0"] = lp.problem.psi.project(lp.x0, lp.problem.metric).tolist()
    if validate:
        validate_known(doc, probes=probes, seed=seed)
    return doc


def validate_known(doc: dict, probes: int = 100_000, seed: int = 0) -> None:
    """Independent sampling check of the ``known`` block; raises on a false claim."""
    from .io import build_problem

    lp = build_problem(doc)
    known, p, m = lp.known, lp.problem, lp.problem.metric
    rng = np.random.default_rng([seed, 7])
    n = p.n
    if "mu" in known and "L" in known and known.get("exact_mu_L", False):
        x = rng.standard_normal(n)
        for _ in range(min(probes, 2000)):
            h = rng.standard_normal(n)
            h /= m.norm(h)
            d4 = p.f.d4_dir(x, h)
            if d4 < known["mu"] * (1 - 1e-9) - 1e-12 or d4 > known["L"] * (1 + 1e-9) + 1e-12:
                raise GeneratorError(f"D^4 f[h]^4 = {d4} outside claimed [{known['mu']}, {known['L']}]")
    if "F_star" in known:
        x_star = np.asarray(known["x_star"])
        F_star = known["F_star"]
        if abs(p.value(x_star) - F_star) > 1e-12 * (1 + abs(F_star)):
            raise GeneratorError("F_star does not match F(x_star)")
        batch = 1000
        done = 0
        while done < probes:
            k = min(batch, probes - done)
            scales = np.exp(rng.uniform(math.log(1e-4), math.log(10.0), k))
            D = rng.standard_normal((k, n)) * scales[:, None] / math.sqrt(n)
            for d in D:
                y = p.psi.project(x_star + d, m)
                if p.value(y) < F_star - 1e-9:
                    raise GeneratorError(f"probe beats claimed F_star by {F_star - p.value(y):.3e}")
            done += k
