import math

import numpy as np
import pytest

from src.fields import ScalarField, evaluate, exp
from src.heisenberg_core import (
    ORIGIN,
    RHO4,
    WBAR,
    HPoint,
    dilate_arrays,
    flat_kohn_box,
    flat_T,
    flat_Z1bar,
    group_inv_arrays,
    group_mul_arrays,
    random_points,
)
from src.kohn_szego import (
    ConvKernel,
    QuadConfig,
    beta_1bar_closed_form,
    beta_1bar_field,
    beta_model,
    beta_t_decomposition,
    beta_z1bar_decomposition,
    convolve,
    gtilde_z1bar,
    gtilde_z1bar_closed_form,
    kernel_phi,
    kernel_phi_arrays,
    kohn_inverse,
    reproduction_check,
    source_f,
    source_f_field,
    spurious_g_hat,
    spurious_g_hat_field,
    spurious_g_tilde,
    spurious_g_tilde_field,
    szego_kernel,
    szego_source_decay,
    szego_values,
)
from src.utils import DomainError, InvariantViolation

A = 1.0


@pytest.mark.parametrize("solution", [spurious_g_tilde_field, spurious_g_hat_field])
def test_spurious_solutions_solve_the_kohn_equation(solution, points):
    f = source_f_field(A)
    residual, scale = evaluate([flat_kohn_box(solution(A)) + f, f], points)
    assert np.max(np.abs(residual)) / np.max(np.abs(scale)) < 1e-8


def test_source_field_matches_arrays(points):
    np.testing.assert_allclose(source_f_field(A).values(points[:5]), [source_f(A, p) for p in points[:5]], rtol=1e-12)


def test_g_tilde_values():
    assert spurious_g_tilde(A, (1.0, 0.0, 0.0)) == pytest.approx(-4.0 * math.pi * A, rel=1e-12)
    with pytest.raises(DomainError):
        spurious_g_tilde(A, (0.0, 0.0, 1.0))


def test_g_hat_jumps_across_t_zero():
    z = complex(0.7, -0.4)
    jump = spurious_g_hat(A, (z.real, z.imag, 1e-9)) - spurious_g_hat(A, (z.real, z.imag, -1e-9))
    assert abs(jump - 8j * math.pi * A / z) < 1e-6


def test_g_tilde_derivative_extends_to_the_axis(points):
    residual, scale = evaluate([flat_Z1bar(spurious_g_tilde_field(A)) - gtilde_z1bar_closed_form(A), gtilde_z1bar_closed_form(A)], points)
    assert np.max(np.abs(residual)) < 1e-10 * np.max(np.abs(scale))
    on_axis = gtilde_z1bar(A, (0.0, 0.0, 1.0))
    assert on_axis == pytest.approx(-2.0 * math.sqrt(2.0) * math.pi * A, rel=1e-12)
    assert gtilde_z1bar(A, (1e-4, 0.0, 1.0)) == pytest.approx(on_axis, rel=1e-8)


def test_beta_derivative_closed_form(points):
    residual, scale = evaluate([beta_1bar_field(A) - beta_1bar_closed_form(A), beta_1bar_closed_form(A)], points)
    assert np.max(np.abs(residual)) < 1e-10 * np.max(np.abs(scale))


def test_kernels_guard_their_singularities():
    with pytest.raises(DomainError):
        kernel_phi(ORIGIN)
    with pytest.raises(DomainError):
        szego_kernel(0.0)
    with pytest.raises(InvariantViolation):
        ConvKernel("too singular", lambda pts: pts[:, 0], 4.0)
    with pytest.raises(InvariantViolation):
        QuadConfig(near_fraction=0.0)
    assert kernel_phi(HPoint(1.0, 0.0, 0.0)) == pytest.approx(0.0)


def test_convolving_zero_is_zero():
    assert convolve(ScalarField.constant(0.0), szego_kernel(0.1), (0.0, 0.0, 0.0)) == (0j, 0.0)
    with pytest.raises(ValueError):
        szego_values(WBAR, (0.0, 0.0, 0.0), eps_schedule=(0.1,))


@pytest.mark.slow
def test_szego_reproduces_cr_functions():
    estimate = szego_values((1.0 + WBAR) ** -2, (0.0, 0.0, 0.0))
    for eps, value in zip(estimate.epsilons, estimate.values):
        assert value.real == pytest.approx((1.0 + eps * eps) ** -2, rel=1e-4)
    assert estimate.limit.real == pytest.approx(1.0, rel=1e-3)


@pytest.mark.slow
def test_projected_source_decays():
    assert szego_source_decay(A).slope <= -3.5


def test_beta_model_without_mass_is_zbar():
    assert beta_model(0.0, (0.3, -0.4, 1.0)) == pytest.approx(complex(0.3, 0.4))


def test_beta_second_derivatives_decompose(points):
    """Z1bar beta,1bar = pi A z (F + i t G)/rho^6 + 2 A z wbar^2/rho^8 with F = 3|z|^2, G = -3, and likewise for T."""
    z1bar, t_deriv, z1bar_closed, t_closed = evaluate(
        [
            flat_Z1bar(beta_1bar_field(A)),
            flat_T(beta_1bar_field(A)),
            beta_z1bar_decomposition(A),
            beta_t_decomposition(A),
        ],
        points,
    )
    np.testing.assert_allclose(z1bar, z1bar_closed, rtol=1e-9)
    np.testing.assert_allclose(t_deriv, t_closed, rtol=1e-9)


def test_phi_is_homogeneous_of_degree_minus_two(rng):
    pts = random_points(rng, 50, 0.3, 5.0)
    for lam in (0.5, 3.0):
        np.testing.assert_allclose(kernel_phi_arrays(dilate_arrays(lam, pts)), lam**-2 * kernel_phi_arrays(pts), rtol=1e-12)


def test_phi_branch_is_continuous_across_the_axis():
    # log(wbar/w) jumps from -i pi to i pi on the t-axis, and so does the sign of wbar
    above, below = kernel_phi(HPoint(0.0, 0.0, 2.0)), kernel_phi(HPoint(0.0, 0.0, -2.0))
    assert above == pytest.approx(1.0 / (16.0 * math.pi))
    assert below == pytest.approx(above)
    assert kernel_phi(HPoint(1e-9, 0.0, 2.0)) == pytest.approx(above, rel=1e-6)
    assert kernel_phi(HPoint(0.4, 0.3, -1.0)) == pytest.approx(np.conj(kernel_phi(HPoint(0.4, 0.3, 1.0))))


def _bump(width: float):
    """Unit-mass exp(-rho^4/width^4) on dx dy dt."""
    scale = 2.0 / (math.pi**2 * width**4)

    def h(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        rho4 = (pts[..., 0] ** 2 + pts[..., 1] ** 2) ** 2 + pts[..., 2] ** 2
        return scale * np.exp(-rho4 / width**4)

    return h


@pytest.mark.slow
def test_kohn_inverse_of_a_point_mass_is_phi():
    Z = HPoint(1.0, 0.0, 0.5)
    assert kohn_inverse(_bump(0.05), Z) == pytest.approx(kernel_phi(Z), rel=2e-2)


@pytest.mark.slow
def test_convolution_is_left_invariant():
    a = np.array([0.2, 0.0, 0.1])
    Z = np.array([0.3, -0.2, 0.4])
    h = _bump(0.5)
    k = szego_kernel(0.2)
    shifted, _ = convolve(lambda pts: h(group_mul_arrays(a, pts)), k, Z)
    direct, _ = convolve(h, k, group_mul_arrays(a, Z))
    assert shifted == pytest.approx(direct, rel=1e-2)
    back, _ = convolve(lambda pts: h(group_mul_arrays(group_inv_arrays(a), pts)), k, group_mul_arrays(a, Z))
    assert back == pytest.approx(convolve(h, k, Z)[0], rel=1e-2)


@pytest.mark.slow
def test_kohn_inverse_and_szego_reproduce_a_function():
    h = exp(-1.0 * RHO4)
    lhs, value = reproduction_check(h, (0.3, 0.2, 0.1), flat_kohn_box(h))
    assert abs(lhs - value) < 2e-2 * abs(value)
