"""Transformation laws: conformal change of contact form, unitary frame rotation,
and first/second variations under a deformation of the CR structure."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import ScalarField, VectorField, OneForm, evaluate, exp, lift, sqrt
from .heisenberg_core import ABSZ2, FLAT_Z1, T, flat_Z1
from .ph_calculus import (
    Coframe,
    PHStructure,
    conformal_sublap,
    cov_deriv,
    from_coframe,
    paneitz,
    paneitz_third_order,
    sublaplacian,
)
from .quadrature import VolumeQuadrature

logger = logging.getLogger(__name__)

Operator = Callable[[ScalarField], ScalarField]


@dataclass
class DeformationField:
    """J' = 2E = 2 E11 theta^1 (x) Z1bar + conj."""

    E11: ScalarField

    def __post_init__(self):
        self.E11 = lift(self.E11)

    @property
    def E1bar1bar(self) -> ScalarField:
        return self.E11.conj()

    def scaled(self, s: float) -> "DeformationField":
        return DeformationField(s * self.E11)


# conformal change --------------------------------------------------------------------------


def conformal_change(st: PHStructure, f, name: str = "") -> PHStructure:
    """theta' = e^{2f} theta for a real function f."""
    f = lift(f)
    z1, z1bar = st.Z1, st.Z1bar
    f1 = z1(f)
    f1b = z1bar(f)
    f11 = cov_deriv(st, f, "11")
    lap = sublaplacian(st, f)
    e = exp(f)
    em = exp(-f)
    e2m = em * em

    cf = st.coframe
    theta = cf.theta.scale(e * e)
    theta1 = (cf.theta1 + cf.theta.scale(2j * f1b)).scale(e)
    new_z1 = z1.scale(em)
    new_t = (st.T + z1bar.scale(2j * f1) - z1.scale(2j * f1b)).scale(e2m)

    omega_z1 = em * (st.omega_Z1 + 3.0 * f1)
    omega_z1bar = em * (st.omega_Z1bar - 3.0 * f1b)
    omega_t = e2m * (
        st.omega_T + 1j * lap - 4j * f1 * f1b + 2j * (f1 * st.omega_Z1bar - f1b * st.omega_Z1)
    )
    a11 = e2m * (st.A11 + 2j * f11 - 4j * f1 * f1)
    r = e2m * (st.R - 4.0 * lap - 8.0 * f1 * f1b)

    out = PHStructure(Coframe(theta, theta1, name), new_t, new_z1, omega_z1, omega_z1bar, omega_t, a11, r, name)
    out._cache[("volume",)] = (e * e) * (e * e) * st.volume_density()
    return out


def rotate_frame(st: PHStructure, u, name: str = "") -> PHStructure:
    """theta^1' = u theta^1 with |u| = 1."""
    u = lift(u)
    ub = u.conj()
    inv = u.reciprocal()
    cf = st.coframe
    out = PHStructure(
        Coframe(cf.theta, cf.theta1.scale(u), name or cf.note),
        st.T,
        st.Z1.scale(ub),
        ub * (st.omega_Z1 - st.Z1(u) * inv),
        u * (st.omega_Z1bar - st.Z1bar(u) * inv),
        st.omega_T - st.T(u) * inv,
        ub * ub * st.A11,
        st.R,
        name or st.name,
    )
    out._cache[("volume",)] = st.volume_density()
    return out


def _max_abs(field: ScalarField, points) -> float:
    return float(np.max(np.abs(evaluate([field], points)[0])))


def check_Lb_covariance(st: PHStructure, f, phi, points) -> float:
    """max |L'(phi) - u^-3 L(u phi)| for theta' = u^2 theta, u = e^f."""
    f, phi = lift(f), lift(phi)
    new = conformal_change(st, f)
    u = exp(f)
    residual = conformal_sublap(new, phi) - conformal_sublap(st, u * phi) * exp(-3.0 * f)
    return _max_abs(residual, points)


def check_paneitz_covariance(st: PHStructure, f, phi, points) -> float:
    """max |P'(phi) - e^{-4f} P(phi)| for theta' = e^{2f} theta."""
    f, phi = lift(f), lift(phi)
    new = conformal_change(st, f)
    residual = paneitz(new, phi) - exp(-4.0 * f) * paneitz(st, phi)
    return _max_abs(residual, points)


# deformations of J ----------------------------------------------------------------------------


def deform_first_order(st: PHStructure, E: DeformationField) -> dict[str, object]:
    """First variations of frame, coframe, connection, torsion and curvature."""
    e11, ebar = E.E11, E.E1bar1bar
    a11, abar = st.A11, st.A1bar1bar
    cf = st.coframe
    mixed = a11 * ebar + abar * e11
    e11_1b = cov_deriv(st, e11, "1b", k=2)
    ebar_1 = cov_deriv(st, ebar, "1", k=-2)
    omega_dot = cf.theta.scale(1j * mixed) - cf.theta1bar.scale(1j * ebar_1) - cf.theta1.scale(1j * e11_1b)
    a1bar1bar_dot = -1j * cov_deriv(st, ebar, "0", k=-2)
    r_dot = 1j * (cov_deriv(st, e11, "1b1b", k=2) - cov_deriv(st, ebar, "11", k=-2)) - mixed
    return {
        "Z1": st.Z1bar.scale(-1j * e11),
        "theta1": cf.theta1bar.scale(-1j * ebar),
        "omega": omega_dot,
        "A1bar1bar": a1bar1bar_dot,
        "A11": a1bar1bar_dot.conj(),
        "R": r_dot,
    }


def deformed_structure(st: PHStructure, E: DeformationField, s: float) -> PHStructure:
    """Finite deformation theta^1(s) = (theta^1 - i s E1bar1bar theta^1bar) / sqrt(1 - s^2 |E|^2)."""
    e11, ebar = E.E11, E.E1bar1bar
    norm = sqrt(1.0 - (s * s) * e11 * ebar).reciprocal()
    cf = st.coframe
    theta1 = (cf.theta1 - cf.theta1bar.scale(1j * s * ebar)).scale(norm)
    return from_coframe(Coframe(cf.theta, theta1, f"{st.name}+{s:g}E"), f"{st.name}+{s:g}E")


def delta_b_variations(st: PHStructure, E: DeformationField, E_dot: DeformationField | None = None) -> tuple[Operator, Operator]:
    """Operators f -> -Delta_b' f and f -> -Delta_b'' f along the deformation."""
    e11, ebar = E.E11, E.E1bar1bar
    z1, z1bar = st.Z1, st.Z1bar
    e11_1b = cov_deriv(st, e11, "1b", k=2)
    ebar_1 = cov_deriv(st, ebar, "1", k=-2)
    e11_1 = cov_deriv(st, e11, "1", k=2)
    ebar_1b = cov_deriv(st, ebar, "1b", k=-2)
    abs2 = e11 * ebar

    def first(f: ScalarField) -> ScalarField:
        f = lift(f)
        holo = e11 * z1bar(z1bar(f)) + e11_1b * z1bar(f)
        anti = ebar * z1(z1(f)) + ebar_1 * z1(f)
        return 2j * holo - 2j * anti

    def second(f: ScalarField) -> ScalarField:
        f = lift(f)
        out = -4.0 * abs2 * sublaplacian(st, f)
        out = out - (4.0 * e11 * ebar_1b + 6.0 * ebar * e11_1b) * z1(f)
        out = out - (4.0 * ebar * e11_1 + 6.0 * e11 * ebar_1) * z1bar(f)
        if E_dot is not None:
            d11, dbar = E_dot.E11, E_dot.E1bar1bar
            out = out + 2j * d11 * z1bar(z1bar(f)) - 2j * dbar * z1(z1(f))
            out = out + 2j * cov_deriv(st, d11, "1b", k=2) * z1bar(f) - 2j * cov_deriv(st, dbar, "1", k=-2) * z1(f)
        return out

    return first, second


# Paneitz quadratic form on the sphere ------------------------------------------------------------


def paneitz_qform_variations(
    E: DeformationField, psi, st: PHStructure | None = None, quad: VolumeQuadrature | None = None
) -> tuple[float, float]:
    """First and second variation of (P psi, psi) at a torsion-free base, by quadrature over the sphere."""
    from .model_examples import sphere_integral, sphere_structure

    st = st or sphere_structure()
    psi = lift(psi)
    ebar, e11 = E.E1bar1bar, E.E11
    psi_1 = cov_deriv(st, psi, "1")
    p1 = paneitz_third_order(st, psi)
    first_density = 16.0 * (ebar * psi_1 * p1).imag

    b = ebar * psi_1  # weight -1
    b_1 = cov_deriv(st, b, "1", k=-1)
    b_1b = cov_deriv(st, b, "1b", k=-1)
    bc_1b = cov_deriv(st, e11 * cov_deriv(st, psi, "1b"), "1b", k=1)
    second_density = 8.0 * (
        4.0 * b_1 * b_1.conj() - b_1 * b_1 - bc_1b * bc_1b - 2.0 * b_1b * b_1b.conj() - 2.0 * st.R * b * b.conj()
    )
    first = sphere_integral(first_density, st, quad)
    second = sphere_integral(second_density, st, quad)
    logger.info("Paneitz form variations: first %.3e, second %.6f", first.real, second.real)
    return float(first.real), float(second.real)


def paneitz_second_variation_closed_form(E: DeformationField, st: PHStructure | None = None, quad: VolumeQuadrature | None = None) -> float:
    """8 int (-|E1bar1bar,1bar zbar2 - E1bar1bar z1/sqrt2|^2 - R |E1bar1bar zbar2|^2) for psi = z1 + zbar1."""
    from .model_examples import sphere_coordinates, sphere_integral, sphere_structure

    st = st or sphere_structure()
    z1, z2 = sphere_coordinates()
    ebar = E.E1bar1bar
    ebar_1b = cov_deriv(st, ebar, "1b", k=-2)
    inner = ebar_1b * z2.conj() - ebar * z1 / np.sqrt(2.0)
    density = 8.0 * (-inner * inner.conj() - st.R * ebar * z2.conj() * (ebar * z2.conj()).conj())
    return float(sphere_integral(density, st, quad).real)


# mass variation on the Heisenberg group -------------------------------------------------------


def cr_decay_deformation(k: int) -> DeformationField:
    """E11 = (t + i(|z|^2 + 1))^-k, a CR function."""
    return DeformationField((T + 1j * (ABSZ2 + 1.0)) ** (-k))


def mass_first_variation(E: DeformationField | int, quad: VolumeQuadrature | None = None, rho_max: float = 64.0) -> float:
    """m' = -(3/2) int |E11,1|^2 theta ^ d theta on the flat Heisenberg group (E11 CR)."""
    if isinstance(E, int):
        if E < 3:
            raise ValueError(f"decay exponent k={E} too small for a convergent mass variation")
        E = cr_decay_deformation(E)
    if E.E11.const is not None and E.E11.const == 0:
        return 0.0
    quad = quad or VolumeQuadrature()
    grad = flat_Z1(E.E11)
    density = 4.0 * grad * grad.conj()
    inner = quad.integrate(density, 1e-3, 1.0)
    outer, tail = quad.integrate_to_infinity(density, 1.0, rho_max)
    logger.info("mass variation: tail estimate %.3e", tail)
    return float(-1.5 * (inner + outer).real)


def mass_variation_monte_carlo(k: int, n: int, seed: int) -> float:
    """Monte-Carlo estimate of int |E11,1|^2 theta ^ d theta for E11 = (t + i(|z|^2+1))^-k.

    After t = a tan(alpha), a = 1 + |z|^2 and u = |z|^2 / a the integral reads
    8 pi k^2 int_0^1 int_{-pi/2}^{pi/2} u (1-u)^{2k-2} cos^{2k}(alpha) d alpha du.
    """
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    alpha = (rng.random(n) - 0.5) * np.pi
    samples = u * (1.0 - u) ** (2 * k - 2) * np.cos(alpha) ** (2 * k)
    return float(8.0 * np.pi * k * k * np.pi * samples.mean())


def mass_variation_general(E: DeformationField, quad: VolumeQuadrature | None = None, rho_max: float = 8.0) -> float:
    """m' = -(3/4) i int (E11,1bar1bar - E1bar1bar,11) theta ^ d theta for a rapidly decaying E."""
    from .ph_calculus import flat_structure

    st = flat_structure()
    quad = quad or VolumeQuadrature()
    integrand = 4.0 * (cov_deriv(st, E.E11, "1b1b", k=2) - cov_deriv(st, E.E1bar1bar, "11", k=-2))
    total = quad.integrate(integrand, 1e-3, rho_max)
    return float((-0.75j * total).real)
