
import numpy as np
import pytest

from src.fields import bracket, evaluate
from src.heisenberg_core import (
    FLAT_T,
    FLAT_THETA,
    FLAT_THETA1,
    FLAT_Z1,
    FLAT_Z1BAR,
    ORIGIN,
    RHO,
    SQRT2,
    V,
    W,
    HPoint,
    cr_invert,
    cr_invert_inverse,
    dilate,
    flat_sublaplacian,
    flat_Z1,
    flat_Z1bar,
    gauge_rho,
    gauge_rho_arrays,
    group_inv,
    group_mul,
    group_mul_arrays,
    polynomial_field,
    rho_power,
)

from src.utils import DomainError


def close(p: HPoint, q: HPoint, tol=1e-12):
    return abs(p.x - q.x) < tol and abs(p.y - q.y) < tol and abs(p.t - q.t) < tol


def test_group_law_example():
    # (1, 0) (i, 0) = (1 + i, 2 Im(1 * conj(i))) = (1 + i, -2)
    p = group_mul(HPoint(1.0, 0.0, 0.0), HPoint(0.0, 1.0, 0.0))
    assert close(p, HPoint(1.0, 1.0, -2.0))
    assert close(group_mul(ORIGIN, HPoint(1.0, 2.0, 3.0)), HPoint(1.0, 2.0, 3.0))
    # W^-1 Z = (z - w, t - s - 2 Im(conj(z) w)) with z = 1 + i, w = 1
    q = group_mul(group_inv(HPoint(1.0, 0.0, 0.0)), HPoint(1.0, 1.0, 5.0))
    assert close(q, HPoint(0.0, 1.0, 7.0))


def test_group_axioms(rng):
    a, b, c = (HPoint(*rng.normal(size=3)) for _ in range(3))
    assert close(group_mul(group_mul(a, b), c), group_mul(a, group_mul(b, c)))
    assert close(group_mul(a, group_inv(a)), ORIGIN)
    assert close(group_mul(a, ORIGIN), a)


def test_vectorised_law_agrees(rng):
    p, q = rng.normal(size=(2, 5, 3))
    out = group_mul_arrays(p, q)
    for k in range(5):
        ref = group_mul(HPoint(*p[k]), HPoint(*q[k]))
        np.testing.assert_allclose(out[k], ref.as_array(), atol=1e-12)


def test_gauge_is_homogeneous(rng):
    p = HPoint(*rng.normal(size=3))
    assert gauge_rho(dilate(3.0, p)) == pytest.approx(3.0 * gauge_rho(p))
    with pytest.raises(DomainError):
        dilate(-1.0, p)


def test_cr_inversion():
    p = HPoint(0.4, -0.3, 0.7)
    star = cr_invert(p)
    assert gauge_rho(star) == pytest.approx(1.0 / gauge_rho(p))
    assert close(cr_invert_inverse(star), p)
    twice = cr_invert(star)
    assert close(twice, HPoint(-p.x, -p.y, p.t))
    with pytest.raises(DomainError):
        cr_invert(ORIGIN)


def test_frame_identities(points):
    z = points[:, 0] + 1j * points[:, 1]
    z1v, z1bv, z1bw = evaluate([flat_Z1(V), flat_Z1(V.conj()), flat_Z1bar(W)], points)
    np.testing.assert_allclose(z1v, SQRT2 * 1j * np.conj(z), atol=1e-12)
    np.testing.assert_allclose(z1bv, 0.0, atol=1e-12)
    np.testing.assert_allclose(z1bw, SQRT2 * z, atol=1e-12)


def test_frame_bracket_and_duality(points):
    b = bracket(FLAT_Z1, FLAT_Z1BAR)
    vz, vzbar, vt = evaluate(list(b.components), points)
    np.testing.assert_allclose(vz, 0.0, atol=1e-14)
    np.testing.assert_allclose(vt, -1j, atol=1e-14)
    one, zero1, zero2 = evaluate([FLAT_THETA(FLAT_T), FLAT_THETA(FLAT_Z1), FLAT_THETA1(FLAT_Z1BAR)], points)
    np.testing.assert_allclose(one, 1.0)
    np.testing.assert_allclose(zero1, 0.0, atol=1e-14)
    np.testing.assert_allclose(zero2, 0.0, atol=1e-14)


def test_rho_inverse_square_is_harmonic(points):
    lap = evaluate([flat_sublaplacian(rho_power(-2.0))], points)[0]
    scale = gauge_rho_arrays(points) ** -4
    assert np.max(np.abs(lap) / scale) < 1e-10


def test_rho_field_matches_gauge(points):
    np.testing.assert_allclose(evaluate([RHO], points)[0].real, gauge_rho_arrays(points), rtol=1e-14)


def test_contact_form_volume():
    dtheta = FLAT_THETA.d()
    # d theta = 2i dz ^ dzbar, theta ^ d theta = 4 dx dy dt
    czzb, czt, czbt = evaluate(list(dtheta.components), [[0.2, 0.1, 0.3]])
    assert czzb[0] == pytest.approx(2j)
    assert abs(czt[0]) < 1e-15 and abs(czbt[0]) < 1e-15


def test_polynomial_field(points):
    p = polynomial_field({(2, 0, 1): 3.0, (0, 1, 0): -1j, (0, 0, 0): 0.5})
    x, y, t = points.T
    np.testing.assert_allclose(evaluate([p], points)[0], 3.0 * x * x * t - 1j * y + 0.5, rtol=1e-14)
    assert evaluate([polynomial_field({})], points[:2])[0] == pytest.approx([0.0, 0.0])
