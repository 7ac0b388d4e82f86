import math

import numpy as np
import pytest

from src.heisenberg_core import gauge_rho_arrays
from src.quadrature import SurfaceChart, VolumeQuadrature, composite_gl, dphi_dt_form, surface_integral
from src.utils import QuadratureError

PI2 = math.pi**2


def test_composite_gauss_legendre_is_exact_on_polynomials():
    x, w = composite_gl(0.0, 3.0, 4, 0.5)
    assert np.sum(w * x**5) == pytest.approx(3.0**6 / 6.0, rel=1e-13)
    x, w = composite_gl(1.0, 1.0, 4, 0.5)
    assert x.size == 0


@pytest.mark.parametrize("radius", [0.5, 1.0, 3.0])
def test_sphere_area(radius):
    value = surface_integral(dphi_dt_form(), radius)
    assert value.real == pytest.approx(4.0 * math.pi * radius**2, rel=1e-10)
    assert abs(value.imag) < 1e-10 * radius**2


def test_chart_rejects_bad_radius():
    with pytest.raises(QuadratureError):
        SurfaceChart(0.0)


def test_ball_volume():
    # dx dy dt = rho^3 d rho d th d phi, so |{rho < 1}| = pi^2 / 2
    quad = VolumeQuadrature(4, 8, 8, 0.5)
    value = quad.integrate(lambda pts: np.ones(len(pts)), 1e-8, 1.0)
    assert value.real == pytest.approx(PI2 / 2.0, rel=1e-10)
    assert quad.integrate(lambda pts: np.ones(len(pts)), 2.0, 1.0) == 0


def test_integrate_to_infinity_adds_geometric_tail():
    quad = VolumeQuadrature(4, 8, 8, 0.5)
    value, tail = quad.integrate_to_infinity(lambda pts: gauge_rho_arrays(pts) ** -8, 1.0, 64.0)
    assert value.real == pytest.approx(PI2 / 2.0, rel=1e-9)
    assert 0 < tail < 1e-6
    with pytest.raises(QuadratureError):
        quad.integrate_to_infinity(lambda pts: np.ones(len(pts)), 2.0, 1.0)
