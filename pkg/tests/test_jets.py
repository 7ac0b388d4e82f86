import math

import numpy as np
import pytest

from src.jets import Jet, exp, log, n_coefficients, power, smooth_step, sqrt
from src.utils import JetOrderError


def variables(pts, order):
    pts = np.asarray(pts, dtype=float)
    return (Jet.variable(pts[:, k], axis, order) for k, axis in enumerate("xyt"))


def test_coefficient_count():
    assert n_coefficients(0) == 1
    assert n_coefficients(1) == 4
    assert n_coefficients(4) == 35


def test_polynomial_derivatives():
    x, y, t = variables([[0.5, -1.0, 2.0]], 4)
    f = x * x * y + 3.0 * t * t * x
    # d/dx = 2xy + 3t^2, d2/dxdt = 6t, d3/dx2dy = 2
    assert f.derivative((1, 0, 0))[0] == pytest.approx(2 * 0.5 * -1.0 + 3 * 4.0)
    assert f.derivative((1, 0, 1))[0] == pytest.approx(12.0)
    assert f.derivative((2, 1, 0))[0] == pytest.approx(2.0)
    assert f.derivative((0, 0, 3))[0] == pytest.approx(0.0)


def test_exp_log_inverse():
    x, y, t = variables([[0.3, 0.2, -0.4], [1.5, -0.7, 0.1]], 4)
    f = 1.0 + x * x + 0.5 * y * t
    g = exp(log(f))
    np.testing.assert_allclose(g.coef, f.coef, atol=1e-12)


def test_power_matches_product():
    x, y, t = variables([[0.8, 0.1, 0.3]], 4)
    f = 2.0 + x + y * t
    np.testing.assert_allclose(power(f, 3.0).coef, (f * f * f).coef, atol=1e-12)
    np.testing.assert_allclose((sqrt(f) * sqrt(f)).coef, f.coef, atol=1e-12)
    np.testing.assert_allclose((f * f.reciprocal()).coef[:, 1:], 0.0, atol=1e-12)


def test_chain_rule_of_exp():
    x, _, _ = variables([[0.7, 0.0, 0.0]], 3)
    f = exp(x * x)
    # (e^{x^2})'' = (2 + 4x^2) e^{x^2}
    assert f.derivative((2, 0, 0))[0].real == pytest.approx((2 + 4 * 0.49) * math.exp(0.49))


def test_partial_lowers_order():
    x, y, _ = variables([[1.0, 2.0, 3.0]], 2)
    d = (x * y).partial("x")
    assert d.order == 1
    assert d.value[0] == pytest.approx(2.0)
    with pytest.raises(JetOrderError):
        d.partial("y").partial("x")


def test_truncate_cannot_raise_order():
    x, _, _ = variables([[1.0, 0.0, 0.0]], 2)
    assert x.truncate(1).order == 1
    with pytest.raises(JetOrderError):
        x.truncate(3)


def test_smooth_step_ends_are_flat():
    x, _, _ = variables([[-0.5, 0, 0], [0.5, 0, 0], [1.5, 0, 0]], 3)
    s = smooth_step(x)
    np.testing.assert_allclose(s.value.real, [0.0, 0.5, 1.0], atol=1e-15)
    assert s.derivative((1, 0, 0))[0] == 0.0
    assert s.derivative((1, 0, 0))[2] == 0.0
    assert s.derivative((1, 0, 0))[1].real > 0
