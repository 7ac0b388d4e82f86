import math

import numpy as np
import pytest

from src.fields import ScalarField, T, X, Y, evaluate
from src.heisenberg_core import HPoint, dilate_arrays, random_points
from src.model_examples import (
    EXAMPLES,
    NormalBundle,
    SphereChart,
    cayley,
    cayley_inverse,
    centre_values,
    check_dilation_invariance,
    embeddability_identity,
    get_example,
    normal_coords_model,
    normal_xx_yy,
    random_periodic_field,
    s2s1_curvature_closed_form,
    s2s1_paneitz_sampling,
    s2s1_structure,
    s2s1_torsion_closed_form,
    sphere_green,
    sphere_green_field,
    sphere_structure,
)
from src.ph_calculus import commutation_residuals, max_residuals, structure_residuals
from src.quadrature import VolumeQuadrature
from src.utils import DomainError, InconsistentBundleError


@pytest.fixture(scope="module")
def normal4():
    return normal_coords_model(NormalBundle(omega=1.0), with_orders=False)


@pytest.mark.parametrize("name", sorted(EXAMPLES))
def test_examples_satisfy_structure_equations(name, rng):
    example = get_example(name)
    st = example.build()
    pts = example.sample(rng, 100)
    assert max(max_residuals(structure_residuals(st), pts).values()) < 1e-8
    r1, r2, r3 = commutation_residuals(st, X * X * T + Y, 0)
    assert max(max_residuals({"r1": r1, "r2": r2, "r3": r3}, pts).values()) < 1e-8


def test_unknown_example():
    with pytest.raises(ValueError):
        get_example("torus")


def test_cayley_round_trip():
    p = HPoint(0.3, -0.2, 0.5)
    z1, z2 = cayley_inverse(p)
    assert abs(z1) ** 2 + abs(z2) ** 2 == pytest.approx(1.0)
    q = cayley(z1, z2)
    assert (q.x, q.y, q.t) == pytest.approx((p.x, p.y, p.t))
    with pytest.raises(DomainError):
        cayley(0.0, -1.0)
    with pytest.raises(DomainError):
        cayley(1.0, 1.0)


def test_sphere_chart(points):
    assert SphereChart().constraint_deviation(points) < 1e-12


def test_sphere_green_function_in_the_chart():
    p = HPoint(0.4, 0.1, -0.7)
    z1, z2 = cayley_inverse(p)
    assert sphere_green_field().values(p)[0].real == pytest.approx(sphere_green(z1, z2), rel=1e-12)


def test_sphere_is_torsion_free_with_constant_curvature(rng):
    st = sphere_structure()
    pts = random_points(rng, 100, 0.1, 10.0)
    a11, r = evaluate([st.A11, st.R], pts)
    assert np.max(np.abs(a11)) < 1e-9
    assert np.std(r.real) < 1e-8 * np.mean(r.real)
    assert np.mean(r.real) > 0


def test_s2s1_closed_forms(points):
    st = s2s1_structure()
    a11, a_ref, r, r_ref = evaluate([st.A11, s2s1_torsion_closed_form(), st.R, s2s1_curvature_closed_form()], points)
    np.testing.assert_allclose(a11, a_ref, atol=1e-9)
    np.testing.assert_allclose(r, r_ref, atol=1e-10)


def test_s2s1_is_dilation_invariant(points):
    deviation = check_dilation_invariance(s2s1_structure(), points)
    assert max(deviation.values()) < 1e-9


def test_periodic_fields_are_dilation_invariant(rng, points):
    phi = random_periodic_field(rng)
    here, = evaluate([phi], points)
    there, = evaluate([phi], dilate_arrays(2.0, points))
    np.testing.assert_allclose(here, there, atol=1e-12)


def test_normal_bundle_consistency():
    targets = NormalBundle(omega=1.0).targets()
    assert targets["A11,0"] == pytest.approx(-0.8)
    with pytest.raises(InconsistentBundleError):
        NormalBundle(omega=1.0, A11_0=0.0).targets()


def test_normal_coordinates_realise_the_cartan_tensor(normal4):
    values = centre_values(normal4.structure)
    targets = NormalBundle(omega=1.0).targets()
    for key in ("A11,0", "A11,1b1b", "R,11"):
        assert abs(values[key] - targets[key]) < 1e-6
    assert abs(values["Omega11"] - 1.0) < 1e-6
    assert abs(values["A11"]) < 1e-12 and abs(values["R"]) < 1e-12


def test_normal_coordinates_second_derivatives(normal4):
    rxx, ryy = normal_xx_yy(normal4.structure)
    assert abs(rxx + ryy) < 1e-8
    assert math.isfinite(rxx)


def test_s2s1_sampling_of_a_constant(rng):
    quad = VolumeQuadrature(4, 8, 8, 0.5)
    result = s2s1_paneitz_sampling(ScalarField.constant(1.0), (1, 2), quad)
    assert result.per_period == pytest.approx(0.0, abs=1e-12)
    assert result.norm2 == pytest.approx(8.0 * math.pi**2 * math.log(2.0), rel=1e-10)
    assert all(math.isfinite(v) for v in result.values)


def test_normal_coordinates_decay_orders():
    model = normal_coords_model(NormalBundle(omega=1.0))
    assert math.isinf(model.orders["theta-theta0[dt]"])
    assert model.orders["theta1[dzbar]"] == pytest.approx(4.0, abs=1e-2)


@pytest.mark.slow
def test_embeddability_identity_on_the_sphere():
    z1, z2 = SphereChart().coordinates()
    quad = VolumeQuadrature(8, 32, 12, 0.5)
    lhs, rhs = embeddability_identity(z1 * z1 + z2.conj(), quad)
    assert rhs.real < 0 and abs(rhs.imag) < 1e-8 * abs(rhs)
    assert lhs == pytest.approx(rhs, rel=1e-4)
    zero_lhs, zero_rhs = embeddability_identity(ScalarField.constant(1.0), quad)
    assert zero_lhs == 0 and zero_rhs == 0
