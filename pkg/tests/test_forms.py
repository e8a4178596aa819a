import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quartic_newton.forms import (DenseTensor, EuclideanPower, FormError, SumOfLinearQuartics,
                                  estimate_mu_L, norm_f, polarize, qf_value)
from quartic_newton.generators import random_convex_form, random_metric
from quartic_newton.linalg import Metric
from quartic_newton.verify import fd_directional

I2 = Metric.identity(2)
SLQ = SumOfLinearQuartics([[1.0, 2.0]], [1.0], 0.0, I2)
EP1 = EuclideanPower(1.0, I2)


def test_eval4_examples():
    assert SLQ.eval4(np.array([1.0, 1.0])) == pytest.approx(81.0)
    assert EP1.eval4(np.array([3.0, 4.0])) == pytest.approx(625.0)
    assert SLQ.eval4(np.zeros(2)) == 0.0
    assert EP1.eval4(np.zeros(2)) == 0.0


def test_contract3_examples():
    np.testing.assert_allclose(SLQ.contract3(np.array([1.0, 0.0])), [1.0, 2.0])
    np.testing.assert_allclose(EP1.contract3(np.array([1.0, 1.0])), [2.0, 2.0])
    np.testing.assert_allclose(SLQ.contract3(np.zeros(2)), 0.0)


def test_contract3_is_quarter_gradient():
    x = np.array([1.0, 1.0])
    grad = np.array([fd_directional(EP1.eval4, x, e, 1) for e in np.eye(2)])
    np.testing.assert_allclose(grad / 4.0, [2.0, 2.0], rtol=1e-9)


def test_contract2_examples():
    np.testing.assert_allclose(SLQ.contract2(np.array([1.0, 0.0])), [[1, 2], [2, 4]])
    np.testing.assert_allclose(EP1.contract2(np.array([1.0, 0.0])), [[1, 0], [0, 1 / 3]],
                               atol=1e-15)
    np.testing.assert_allclose(SLQ.contract2(np.zeros(2)), 0.0)


def test_contract2_is_twelfth_hessian():
    x = np.array([1.0, 0.0])
    e = np.eye(2)
    hess = np.array([[0.25 * (fd_directional(EP1.eval4, x, e[i] + e[j], 2)
                              - fd_directional(EP1.eval4, x, e[i] - e[j], 2))
                      for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(hess / 12.0, [[1, 0], [0, 1 / 3]], atol=1e-8)


def test_contract11_examples():
    x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    np.testing.assert_allclose(SLQ.contract11(x, x), [[1, 2], [2, 4]])
    np.testing.assert_allclose(SLQ.contract11(x, y), [[2, 4], [4, 8]])
    np.testing.assert_allclose(SLQ.contract11(np.zeros(2), y), 0.0)


def test_contract11_polarization():
    # f4[x+y]^2[.]^2 - f4[x-y]^2[.]^2 = 4 f4[x][y][.]^2
    rng = np.random.default_rng(3)
    form = random_convex_form(rng, 4, random_metric(rng, 4), "dense")
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    lhs = form.contract2(x + y) - form.contract2(x - y)
    np.testing.assert_allclose(lhs, 4.0 * form.contract11(x, y), atol=1e-12)


def test_norm_f_examples():
    assert norm_f(EP1, np.array([3.0, 4.0])) == pytest.approx(5.0)
    assert norm_f(EP1, np.zeros(2)) == 0.0
    x = np.array([0.3, -1.2])
    assert norm_f(SLQ, -2 * x) == pytest.approx(2 * norm_f(SLQ, x))


def test_norm_f_rejects_negative_form():
    T = np.zeros((1, 1, 1, 1))
    T[0, 0, 0, 0] = -1.0
    with pytest.raises(FormError):
        norm_f(DenseTensor(T), np.array([1.0]))


def test_qf_value_examples():
    assert qf_value(EP1, np.array([3.0, 4.0])) == pytest.approx(12.5)
    assert qf_value(EP1, np.zeros(2)) == 0.0
    assert qf_value(SLQ, np.array([1.0, 1.0])) == pytest.approx(4.5)


@pytest.mark.parametrize("form, expected", [
    (EuclideanPower(2.0, I2), (2.0, 2.0)),
    (SumOfLinearQuartics([[1.0, 0.0]], [1.0], 0.0, I2), (0.0, 1.0)),
    (SumOfLinearQuartics([[1.0, 0.0]], [1.0], 1.0, I2), (1.0, 2.0)),
])
def test_estimate_mu_L_exact(form, expected):
    assert estimate_mu_L(form, I2) == pytest.approx(expected, abs=1e-15)


def test_estimate_mu_L_sampled_matches_optimizer():
    from scipy.optimize import minimize
    rng = np.random.default_rng(1)
    m = random_metric(rng, 3)
    form = random_convex_form(rng, 3, m, "sum")
    mu, L = estimate_mu_L(form, m, seed=2)

    def ratio(u, sign):
        return sign * form.eval4(u) / m.norm(u) ** 4

    starts = rng.standard_normal((30, 3))
    lo = min(minimize(ratio, s, args=(1.0,)).fun for s in starts)
    hi = -min(minimize(ratio, s, args=(-1.0,)).fun for s in starts)
    assert L == pytest.approx(hi, rel=1e-6)
    assert lo * (1 - 1e-6) <= mu <= lo + 0.25 * (hi - lo)


def test_dense_tensor_rejects_asymmetry():
    T = np.zeros((2, 2, 2, 2))
    T[0, 0, 0, 1] = 1.0
    with pytest.raises(FormError):
        DenseTensor(T)


def test_coefficients_must_be_nonnegative():
    with pytest.raises(FormError):
        SumOfLinearQuartics([[1.0, 0.0]], [-1.0], 0.0, I2)
    with pytest.raises(FormError):
        EuclideanPower(-1.0, I2)


def test_scaled():
    x = np.array([0.7, -0.2])
    assert SLQ.scaled(3.0).eval4(x) == pytest.approx(3.0 * SLQ.eval4(x))
    assert EP1.scaled(0.5).eval4(x) == pytest.approx(0.5 * EP1.eval4(x))


@given(st.integers(1, 5), st.integers(0, 10_000), st.sampled_from(["power", "sum", "dense"]))
def test_polarized_tensor_reproduces_form(n, seed, kind):
    rng = np.random.default_rng(seed)
    form = random_convex_form(rng, n, random_metric(rng, n), kind)
    dense = polarize(form)
    x = rng.standard_normal(n)
    scale = 1.0 + abs(form.eval4(x))
    assert abs(dense.eval4(x) - form.eval4(x)) <= 1e-12 * scale * 10
    np.testing.assert_allclose(dense.contract3(x), form.contract3(x), atol=1e-11 * scale)
    np.testing.assert_allclose(dense.contract2(x), form.contract2(x), atol=1e-11 * scale)


@given(st.integers(1, 5), st.integers(0, 10_000), st.sampled_from([-2.0, 0.5, 3.0]))
def test_homogeneity(n, seed, t):
    rng = np.random.default_rng(seed)
    form = random_convex_form(rng, n, random_metric(rng, n), "sum")
    x = rng.standard_normal(n)
    assert form.eval4(t * x) == pytest.approx(t**4 * form.eval4(x), rel=1e-12, abs=1e-300)
