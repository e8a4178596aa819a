import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quartic_newton.forms import EuclideanPower
from quartic_newton.generators import random_convex_quartic, random_metric
from quartic_newton.linalg import Metric, is_psd
from quartic_newton.objective import (L1, BallIndicator, BoxIndicator, CompositeProblem,
                                      ConvexQuartic, LogSumExp, QRegularSpec, Zero,
                                      build_taylor3, eval_taylor, prox_regularized, qreg_affine,
                                      qreg_combine, regularize, sampled_convexity)
from quartic_newton.verify import check_derivatives, check_regularized_qreg, fd_directional

M1 = Metric.identity(1)


def x4(base):
    """``x^4`` expanded at ``base`` (1-dim)."""
    b = float(base)
    return ConvexQuartic([b], b**4, [4 * b**3], [[12 * b**2]], EuclideanPower(1.0, M1),
                         np.full((1, 1, 1), 24 * b))


def test_eval_taylor_examples():
    assert eval_taylor(x4(0.0), [2.0]) == pytest.approx(16.0)
    assert eval_taylor(x4(1.0), [2.0]) == pytest.approx(16.0)
    assert eval_taylor(x4(1.0), [1.0]) == pytest.approx(1.0)


def test_expand_at_preserves_values():
    rng = np.random.default_rng(0)
    qq = random_convex_quartic(rng, 4, random_metric(rng, 4))
    moved = qq.expand_at(rng.standard_normal(4))
    for _ in range(5):
        y = rng.standard_normal(4)
        assert moved.value(y) == pytest.approx(qq.value(y), rel=1e-12, abs=1e-12)
        np.testing.assert_allclose(moved.grad(y), qq.grad(y), rtol=1e-10, atol=1e-10)


def test_convex_quartic_derivatives_match_fd():
    rng = np.random.default_rng(4)
    for _ in range(5):
        qq = random_convex_quartic(rng, 3, random_metric(rng, 3))
        assert check_derivatives(qq, 20, int(rng.integers(1000))).passed


def test_logsumexp_derivatives_match_fd():
    rng = np.random.default_rng(5)
    f = LogSumExp(rng.standard_normal((5, 3)), rng.standard_normal(5), 0.3)
    assert check_derivatives(f, 30, 1).passed


def test_logsumexp_fourth_derivative_bound():
    rng = np.random.default_rng(6)
    f = LogSumExp(rng.standard_normal((6, 3)), rng.standard_normal(6))
    M4 = f.fourth_derivative_bound()
    for _ in range(200):
        x, h = 2 * rng.standard_normal(3), rng.standard_normal(3)
        assert abs(f.d4_dir(x, h)) <= M4 * np.linalg.norm(h) ** 4 * (1 + 1e-12)


def test_build_taylor3_of_pure_quartic():
    f = x4(0.0)
    model = build_taylor3(f, [0.0], 24.0, M1)
    for y in (-1.5, 0.3, 2.0):
        assert model.value([y]) == pytest.approx(y**4)


def test_build_taylor3_convex_for_logsumexp():
    f = LogSumExp(np.eye(2), np.zeros(2))
    L3 = f.fourth_derivative_bound()
    model = build_taylor3(f, np.zeros(2), 3.0 * L3, Metric.identity(2))
    assert model.value(np.zeros(2)) == pytest.approx(np.log(2.0))
    assert sampled_convexity(model, Metric.identity(2), 100, seed=1)


def test_regularize_examples():
    p = CompositeProblem(x4(0.0), Zero(), M1)
    _, spec = regularize(p, [0.0], 1 / 12, 1.0, 1.0)
    assert (spec.mu, spec.L) == pytest.approx((1.0, 2.0))
    assert spec.q == pytest.approx(0.5)
    _, spec = regularize(p, [0.0], 1e-3, 1.0, 1.0)
    assert spec.mu == pytest.approx(0.012)
    _, spec = regularize(p, [0.0], 1e-3, 1.0, 0.0)
    assert spec.mu == spec.L and spec.q == 1.0


def test_regularize_adds_quartic_term():
    p = CompositeProblem(x4(0.0), Zero(), M1)
    rp, spec = regularize(p, [1.0], 1e-2, 2.0, 24.0)
    H = 12 * 1e-2 / 16
    assert rp.value([3.0]) == pytest.approx(81.0 + H / 24 * 16)


def test_qreg_combine_examples():
    s = qreg_combine([(QRegularSpec(1, 3), 1.0), (QRegularSpec(2, 4), 1.0)])
    assert (s.mu, s.L) == (3, 7)
    s = qreg_combine([(QRegularSpec(1, 3), 1.0)])
    assert (s.mu, s.L) == (1, 3)
    s = qreg_combine([(QRegularSpec(1, 3), 0.0), (QRegularSpec(2, 4), 0.0)])
    assert (s.mu, s.L) == (0, 0)


def test_qreg_affine_examples():
    s = qreg_affine(QRegularSpec(1, 1), 2.0, 2.0)
    assert (s.mu, s.L) == (16, 16)
    s = qreg_affine(QRegularSpec(1, 2), 1.0, 1.0)
    assert (s.mu, s.L) == (1, 2)
    s = qreg_affine(QRegularSpec(1, 2), 1.0, 2.0)
    assert (s.mu, s.L) == (1, 32)


def test_qreg_spec_validation():
    with pytest.raises(ValueError):
        QRegularSpec(2.0, 1.0)
    with pytest.raises(ValueError):
        qreg_combine([(QRegularSpec(1, 2), -1.0)])
    assert QRegularSpec(0.0, 0.0).q == 0.0


def test_prox_regularized_qreg_bounds():
    # f + (H/24)||.-xbar||^4 has D^4 in [H - M4, H + M4]
    rng = np.random.default_rng(8)
    m = Metric.identity(3)
    f = LogSumExp(rng.standard_normal((6, 3)), rng.standard_normal(6), 0.0, m)
    M4 = f.fourth_derivative_bound()
    rep = check_regularized_qreg(f, M4, 2 * M4, 300, 1, m)
    assert rep.passed
    fH = prox_regularized(f, np.ones(3), 2 * M4, m)
    x, h = rng.standard_normal(3), rng.standard_normal(3)
    assert fH.d4_dir(x, h) == pytest.approx(fd_directional(fH, x, h, 4), rel=1e-4)


@pytest.mark.parametrize("psi, v, t, expected", [
    (Zero(), [3.0, -1.0], 1.0, [3.0, -1.0]),
    (BallIndicator([0.0, 0.0], 1.0, Metric.identity(2)), [3.0, 4.0], 1.0, [0.6, 0.8]),
    (BoxIndicator([-1.0, -1.0], [1.0, 1.0]), [3.0, 0.5], 1.0, [1.0, 0.5]),
    (L1(1.0), [3.0, -0.5], 0.5, [2.5, 0.0]),
])
def test_prox_operators(psi, v, t, expected):
    np.testing.assert_allclose(psi.prox(np.array(v), t, Metric.identity(2)), expected)


def test_box_and_l1_need_diagonal_metric():
    dense = Metric(np.array([[2.0, 0.5], [0.5, 1.0]]))
    with pytest.raises(ValueError):
        BoxIndicator([-1, -1], [1, 1]).prox(np.ones(2), 1.0, dense)
    with pytest.raises(ValueError):
        L1(1.0).prox(np.ones(2), 1.0, dense)


def test_composite_value_outside_domain_is_inf():
    p = CompositeProblem(x4(0.0), BallIndicator([0.0], 1.0, M1), M1)
    assert p.value([0.5]) == pytest.approx(0.0625)
    assert p.value([2.0]) == np.inf


@given(st.integers(1, 6), st.integers(0, 10_000))
def test_ball_prox_is_projection(n, seed):
    rng = np.random.default_rng(seed)
    m = random_metric(rng, n)
    ball = BallIndicator(rng.standard_normal(n), 0.7, m)
    v = 3 * rng.standard_normal(n)
    p = ball.prox(v, 1.0, m)
    assert m.norm(p - ball.center) <= 0.7 * (1 + 1e-12)
    # variational inequality for the B-projection
    for _ in range(5):
        u = rng.standard_normal(n)
        y = ball.project(ball.center + u, m)
        assert m.inner(v - p, y - p) <= 1e-10 * (1 + m.norm(v))
