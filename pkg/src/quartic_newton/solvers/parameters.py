"""Closed-form step parameters and contraction factors of the three schemes."""

from __future__ import annotations

import math

TAU_LO, TAU_HI = 1.0 / 3.0, 0.5
CLAMP_MARGIN = 1e-6


def clamp_open(t: float) -> float:
    """Clamp into ``(1/3, 1/2)`` with a small margin."""
    return min(max(t, TAU_LO + CLAMP_MARGIN), TAU_HI - CLAMP_MARGIN)


def tau_star() -> float:
    """Positive root of ``54 t^4 - 9 t^2 = 1``."""
    return math.sqrt(3.0 + math.sqrt(33.0)) / 6.0


def dqnm_alpha(tau: float | None = None) -> float:
    """Largest admissible contraction for the exact-norm model with parameter ``tau``."""
    t = tau_star() if tau is None else tau
    a1 = (3 * t - 1) / (3 * t + 1)
    if tau is None:
        return a1
    return min(a1, ((1 - 2 * t) / (1 + 2 * t)) ** (1.0 / 3.0))


def _check_q(q: float):
    if not (0 < q <= 1):
        raise ValueError(f"condition number q must lie in (0, 1], got {q}")


def rqn_parameters(q: float) -> tuple[float, float]:
    """``(tau_sharp, alpha_sharp)`` for norm condition number ``q``."""
    _check_q(q)
    kappa = (q / 5.0) ** (1.0 / 3.0)
    tau = 0.5 - 1.0 / (6.0 * (1.0 + 5.0 * kappa))
    return tau, kappa / (1.0 + 5.0 * kappa)


def rqn_alpha(tau: float, q: float) -> float:
    """Admissible contraction of the relaxed method for an arbitrary ``tau``."""
    _check_q(q)
    return min((3 * tau - 1) / (3 * tau + 1), (q * (1 - 2 * tau) / (1 + 2 * tau)) ** (1.0 / 3.0))


def kappa_gamma(gamma: float, q: float) -> float:
    """``(1 - 2g) - (16/125)(1/q - 1)((3g - 1)/g)^3``."""
    _check_q(q)
    return (1 - 2 * gamma) - (16.0 / 125.0) * (1.0 / q - 1.0) * ((3 * gamma - 1) / gamma) ** 3


def qrnm_alpha(gamma: float, q: float) -> float:
    k = kappa_gamma(gamma, q)
    if k < 0:
        raise ValueError(f"kappa(gamma) = {k:.3e} < 0: gamma={gamma} inadmissible for q={q}")
    return min((3 * gamma - 1) / (3 * gamma + 1), (q * k / (1 + 2 * gamma)) ** (1.0 / 3.0))


def qrnm_parameters(q: float) -> tuple[float, float, float]:
    """``(gamma_star, alpha_star2, kappa(gamma_star))`` for Q-regular functions."""
    _check_q(q)
    c = q ** (1.0 / 3.0)
    gamma = 1.0 / (3.0 * (1.0 - (3.0 / 11.0) * c))
    alpha = 3.0 * c / (22.0 - 3.0 * c)
    k = kappa_gamma(gamma, q)
    if k < 0 or alpha > (q * k / (1 + 2 * gamma)) ** (1.0 / 3.0) * (1 + 1e-12):
        raise AssertionError(f"gamma_star admissibility failed for q={q}")
    return gamma, alpha, k
