import math

import numpy as np
import pytest

from src.conformal_deform import (
    DeformationField,
    check_Lb_covariance,
    check_paneitz_covariance,
    deform_first_order,
    deformed_structure,
    delta_b_variations,
    conformal_change,
    cr_decay_deformation,
    mass_first_variation,
    mass_variation_general,
    mass_variation_monte_carlo,
    paneitz_qform_variations,
    paneitz_second_variation_closed_form,
    rotate_frame,
)
from src.fields import ONE, X, Y, T, Z, ZBAR, evaluate, exp, jet_order_limit, log
from src.heisenberg_core import ABSZ2, RHO, RHO4, flat_Z1bar, random_points
from src.model_examples import sphere_coordinates, sphere_integral, sphere_structure
from src.ph_calculus import flat_structure, from_coframe, max_residuals, structure_residuals
from src.quadrature import VolumeQuadrature

F = 0.1 * X * T + 0.2 * Y


def test_conformal_change_satisfies_structure_equations(points):
    st = conformal_change(flat_structure(), F, "scaled")
    res = max_residuals(structure_residuals(st), points)
    assert max(res.values()) < 1e-9


def test_conformal_change_matches_coframe_derivation(points):
    st = conformal_change(flat_structure(), F)
    derived = from_coframe(st.coframe)
    r, r_ref, a, a_ref = evaluate([st.R, derived.R, st.A11, derived.A11], points)
    np.testing.assert_allclose(r, r_ref, atol=1e-9)
    np.testing.assert_allclose(a, a_ref, atol=1e-9)


def test_volume_scales_by_e4f(points):
    st = conformal_change(flat_structure(), F)
    vol, direct, f = evaluate([st.volume_density(), st.coframe.volume_density(), F], points)
    np.testing.assert_allclose(vol, 4.0 * np.exp(4.0 * f), rtol=1e-12)
    np.testing.assert_allclose(direct, vol, rtol=1e-10)


def test_frame_rotation(points):
    st = rotate_frame(flat_structure(), exp(1j * X), "rotated")
    res = max_residuals(structure_residuals(st), points)
    assert max(res.values()) < 1e-10
    r, = evaluate([st.R], points)
    assert np.max(np.abs(r)) < 1e-14


def test_transformation_laws(rng):
    from src.heisenberg_core import random_points

    pts = random_points(rng, 50, 0.3, 3.0)
    st = flat_structure()
    phi = X * X + T
    assert check_Lb_covariance(st, F, phi, pts) < 1e-6
    assert check_paneitz_covariance(st, F, phi, pts) < 1e-6


def test_decaying_deformation_is_cr(points):
    E = cr_decay_deformation(4)
    value, = evaluate([flat_Z1bar(E.E11)], points)
    assert np.max(np.abs(value)) < 1e-12
    assert E.scaled(0.0).E11.values(points[:3]) == pytest.approx(np.zeros(3))


def test_mass_variation_needs_decay():
    with pytest.raises(ValueError):
        mass_first_variation(2)
    assert mass_first_variation(DeformationField(0.0)) == 0.0


def test_compactly_decaying_deformation_has_no_mass_variation():
    assert abs(mass_variation_general(DeformationField(exp(-RHO4)))) < 1e-6


@pytest.mark.slow
def test_mass_first_variation_against_monte_carlo():
    quad_value = mass_first_variation(4)
    mc = mass_variation_monte_carlo(4, 400_000, 20240917)
    assert quad_value < 0
    assert quad_value == pytest.approx(-1.5 * mc, rel=1e-2)


@pytest.mark.slow
def test_sphere_paneitz_form_variations():
    z1, _ = sphere_coordinates()
    first, second = paneitz_qform_variations(DeformationField(ONE), z1 + z1.conj())
    assert second < 0
    assert abs(first) < 1e-6 * abs(second)
    assert math.isfinite(second)


def test_variation_operators_are_linear_in_the_deformation(points):
    st = flat_structure()
    E = cr_decay_deformation(3)
    f = X * X * T + Y
    first, _ = delta_b_variations(st, E)
    double, _ = delta_b_variations(st, E.scaled(2.0))
    a, b = evaluate([first(f), double(f)], points)
    np.testing.assert_allclose(b, 2.0 * a, atol=1e-12)
    none, second = delta_b_variations(st, DeformationField(0.0))
    zero, = evaluate([none(f)], points)
    assert np.max(np.abs(zero)) == 0.0


def test_first_order_variation_of_a_trivial_deformation(points):
    dots = deform_first_order(flat_structure(), DeformationField(0.0))
    assert set(dots) == {"Z1", "theta1", "omega", "A1bar1bar", "A11", "R"}
    r_dot, = evaluate([dots["R"]], points)
    assert np.max(np.abs(r_dot)) == 0.0


def _fields(st):
    return [st.R, st.A11, st.omega_Z1, st.omega_T, st.coframe.theta.at, st.coframe.theta1.az, st.coframe.theta1.at]


def test_conformal_changes_compose(rng):
    pts = random_points(rng, 50, 0.3, 3.0)
    g = 0.05 * Y * T - 0.1 * X
    flat = flat_structure()
    with jet_order_limit(6):
        twice = evaluate(_fields(conformal_change(conformal_change(flat, F), g)), pts)
        once = evaluate(_fields(conformal_change(flat, F + g)), pts)
        back = evaluate(_fields(conformal_change(conformal_change(flat, F), -1.0 * F)), pts)
        original = evaluate(_fields(flat), pts)
    for a, b in zip(twice, once):
        np.testing.assert_allclose(a, b, atol=1e-9)
    for a, b in zip(back, original):
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_laws_with_the_log_of_the_gauge(rng):
    pts = random_points(rng, 40, 0.5, 2.0)
    f = -1.0 * log(RHO)
    phi = X * X + T
    with jet_order_limit(6):
        assert check_Lb_covariance(flat_structure(), f, phi, pts) < 1e-6
        assert check_paneitz_covariance(flat_structure(), f, phi, pts) < 1e-6
        assert check_Lb_covariance(sphere_structure(), 0.1 * X * T, phi, pts) < 1e-6


def test_finite_deformation_matches_first_variation(rng):
    pts = random_points(rng, 30, 0.3, 1.5)
    st = flat_structure()
    E = DeformationField(0.3 * ZBAR * T)
    s = 1e-4
    dots = deform_first_order(st, E)
    with jet_order_limit(6):
        plus, minus = deformed_structure(st, E, s), deformed_structure(st, E, -s)
        r_p, r_m, a_p, a_m, th_p, th_m = evaluate(
            [plus.R, minus.R, plus.A11, minus.A11, plus.coframe.theta1.azbar, minus.coframe.theta1.azbar], pts
        )
        r_dot, a_dot, th_dot = evaluate([dots["R"], dots["A11"], dots["theta1"].azbar], pts)
    np.testing.assert_allclose((r_p - r_m) / (2 * s), r_dot, atol=1e-6)
    np.testing.assert_allclose((a_p - a_m) / (2 * s), a_dot, atol=1e-6)
    np.testing.assert_allclose((th_p - th_m) / (2 * s), th_dot, atol=1e-6)
    unchanged, = evaluate([deformed_structure(st, E, 0.0).R], pts)
    assert np.max(np.abs(unchanged)) < 1e-12


def test_curvature_variation_of_a_cr_deformation(points):
    r_dot, = evaluate([deform_first_order(flat_structure(), cr_decay_deformation(3))["R"]], points)
    assert np.max(np.abs(r_dot)) < 1e-10


def test_curvature_variation_examples(points):
    flat = flat_structure()
    # zbar^2: E11,1bar1bar = 1 = Ebar,11
    squared, = evaluate([deform_first_order(flat, DeformationField(ZBAR * ZBAR))["R"]], points)
    assert np.max(np.abs(squared)) < 1e-12
    # zbar t: E11,1bar1bar = -i z and Ebar,11 = i zbar, so R' = z + zbar
    r_dot, = evaluate([deform_first_order(flat, DeformationField(ZBAR * T))["R"]], points)
    np.testing.assert_allclose(r_dot, 2.0 * points[:, 0], atol=1e-12)
    at_one, = evaluate([deform_first_order(flat, DeformationField(ZBAR * T))["R"]], [[1.0, 0.0, 0.0]])
    assert at_one[0] == pytest.approx(2.0)


def test_variation_operators_with_a_constant_deformation(points):
    c = 0.5 + 0.2j
    first, second = delta_b_variations(flat_structure(), DeformationField(c))
    f = ABSZ2 * ABSZ2
    d1, d2 = evaluate([first(f), second(f)], points)
    z = points[:, 0] + 1j * points[:, 1]
    # Z1bar Z1bar |z|^4 = z^2 and Delta_b |z|^4 = 4 |z|^2
    np.testing.assert_allclose(d1, 2j * c * z**2 - 2j * np.conj(c) * np.conj(z) ** 2, atol=1e-10)
    np.testing.assert_allclose(d2, -16.0 * abs(c) ** 2 * np.abs(z) ** 2, atol=1e-10)


@pytest.mark.slow
def test_sphere_second_variation_closed_form():
    st = sphere_structure()
    quad = VolumeQuadrature(8, 32, 12, 0.5)
    z1, z2 = sphere_coordinates()
    closed = paneitz_second_variation_closed_form(DeformationField(ONE), quad=quad)
    # the sphere frame has no connection along Z1, Z1bar and R = 1
    expected = 8.0 * (-0.5 * sphere_integral(z1 * z1.conj(), st, quad) - sphere_integral(z2 * z2.conj(), st, quad)).real
    assert closed < 0
    assert closed == pytest.approx(expected, rel=1e-6)
    assert closed == pytest.approx(-6.0 * sphere_integral(ONE, st, quad).real, rel=1e-3)
    assert paneitz_second_variation_closed_form(DeformationField(2.0), quad=quad) == pytest.approx(4.0 * closed, rel=1e-12)
