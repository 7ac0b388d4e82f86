"""Asymptotically flat models, the p-mass and the closed-form boundary integrals around it.

An asymptotically flat model with mass parameter A is the conformal change
theta = F theta_0 of the Heisenberg group with

    F = 1 + 4 pi A rho^-2 + (c1 x + c2 y) rho^-4,

optionally followed by a frame rotation theta^1 -> e^{i psi} theta^1 with
psi = c3 t rho^-5.  With c = 0 the mass m = i int_{rho = Lambda} omega ^ theta
equals 48 pi^2 A for every Lambda.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from .config import settings
from .conformal_deform import conformal_change, rotate_frame
from .fields import T, X, Y, Z, ZBAR, ZERO, OneForm, ScalarField, TwoForm, evaluate, evaluate_jets, exp, log, rho_greater
from .heisenberg_core import (
    FLAT_THETA,
    FLAT_THETA1,
    SQRT2,
    V,
    W,
    HPoint,
    cr_invert_inverse,
    flat_T,
    flat_Z1,
    flat_Z1bar,
    rho_power,
)
from .kohn_szego import beta_1bar_field, beta_minus1_field
from .ph_calculus import Coframe, PHStructure, flat_structure, kohn_box_contracted
from .quadrature import dphi_dt_form, polar_points, surface_integral
from .utils import DomainError, QuadratureError, extrapolate_inverse_power, fit_decay_slope, relative_error

logger = logging.getLogger(__name__)

PI2 = math.pi**2


@dataclass(frozen=True)
class AFModel:
    A: float
    theta_remainder: tuple[float, float] = (0.0, 0.0)
    phase_remainder: float = 0.0
    rho0: float | None = None
    extra: ScalarField | None = field(default=None, compare=False)

    @classmethod
    def noisy(cls, A: float, rng: np.random.Generator) -> "AFModel":
        c1, c2, c3 = rng.uniform(-1.0, 1.0, 3)
        return cls(A, (float(c1), float(c2)), float(c3))

    @property
    def is_exact(self) -> bool:
        return self.theta_remainder == (0.0, 0.0) and self.phase_remainder == 0.0 and self.extra is None

    def inner_radius(self) -> float:
        """rho_0 of the chart; F stays positive outside it."""
        if self.rho0 is not None:
            return self.rho0
        bound = 2.0 * math.sqrt(math.pi * abs(self.A)) if self.A < 0 else 0.0
        c1, c2 = self.theta_remainder
        # |c . x| rho^-4 <= |c| rho^-3
        bound = max(bound, 2.0 * math.hypot(c1, c2) ** (1.0 / 3.0))
        return max(1.0, bound)

    def conformal_factor(self) -> ScalarField:
        c1, c2 = self.theta_remainder
        F = ScalarField.constant(1.0)
        if self.A != 0:
            F = F + (4.0 * math.pi * self.A) * rho_power(-2.0)
        if c1 or c2:
            F = F + (c1 * X + c2 * Y) * rho_power(-4.0)
        if self.extra is not None:
            F = F + self.extra
        return F


def af_structure(model: AFModel) -> PHStructure:
    name = f"af(A={model.A:g})"
    F = model.conformal_factor()
    if F.const is not None and F.const == 1:
        f = ZERO
    else:
        f = (0.5 * log(F)).real.restrict(rho_greater(model.inner_radius()))
    st = conformal_change(flat_structure(), f, name)
    if model.phase_remainder:
        psi = model.phase_remainder * T * rho_power(-5.0)
        st = rotate_frame(st, exp(1j * psi), name)
    return st


def af_coframe(model: AFModel) -> Coframe:
    return af_structure(model).coframe


def af_connection_closed_form(A: float) -> OneForm:
    """Leading term of the connection form: a dz - conj(a) dzbar with a = -6 pi A zbar w / rho^6."""
    if A == 0:
        return OneForm(0.0, 0.0, 0.0)
    a = (-6.0 * math.pi * A) * ZBAR * W * rho_power(-6.0)
    return OneForm(a, -a.conj(), 0.0)


def _ray(rho: float, direction: tuple[float, float]) -> np.ndarray:
    th, phi = direction
    return polar_points(rho, th, phi)


def torsion_decay(model: AFModel, radii: Sequence[float] = (10.0, 20.0, 40.0), direction=(1.1, 0.3)) -> float:
    """Log-log slope of |A11| along a dilation orbit."""
    st = af_structure(model)
    values = [evaluate([st.A11], _ray(r, direction))[0][0] for r in radii]
    return fit_decay_slope(radii, values)


def connection_remainder_decay(model: AFModel, radii: Sequence[float] = (20.0, 40.0, 80.0), direction=(1.1, 0.3)) -> float:
    """Slope of the derived dz-coefficient of omega minus its closed-form leading term."""
    st = af_structure(model)
    diff = st.omega_form().az - af_connection_closed_form(model.A).az
    values = [evaluate([diff], _ray(r, direction))[0][0] for r in radii]
    return fit_decay_slope(radii, values)


# the p-mass ---------------------------------------------------------------------------------


def mass_form(st: PHStructure) -> TwoForm:
    """i omega ^ theta."""
    return st.omega_form().wedge(st.coframe.theta).scale(1j)


def mass_at(st: PHStructure, radius: float, n_phi: int | None = None, n_theta: int | None = None) -> float:
    return surface_integral(mass_form(st), radius, n_phi, n_theta).real


@dataclass
class MassEstimate:
    mass: float
    error: float
    radii: tuple[float, ...]
    values: list[float]
    grid: tuple[int, int]

    def __iter__(self):
        yield self.mass
        yield self.error


def _grid_refined_values(st: PHStructure, radii, grid: list[int], grid_tol: float) -> list[float]:
    values = []
    form = mass_form(st)
    for radius in radii:
        coarse = surface_integral(form, radius, grid[0], grid[1]).real
        fine = surface_integral(form, radius, 2 * grid[0], 2 * grid[1]).real
        if abs(fine - coarse) > grid_tol * max(1.0, abs(fine)):
            logger.info("mass quadrature at Lambda = %g not converged on %s, refining", radius, grid)
            grid[0], grid[1] = 2 * grid[0], 2 * grid[1]
            raise QuadratureError(f"surface quadrature at Lambda = {radius} changed by {abs(fine - coarse):.3e} under refinement")
        values.append(fine)
    return values


def pmass(
    st: PHStructure,
    schedule: Sequence[float] | None = None,
    grid: tuple[int, int] | None = None,
    grid_tol: float = 1e-6,
) -> MassEstimate:
    """m = lim i int_{rho = Lambda} omega ^ theta, extrapolated as m(Lambda) = m_inf + c / Lambda."""
    radii = tuple(float(r) for r in (schedule or settings.MASS_SCHEDULE))
    if len(radii) < 2:
        raise ValueError("the mass schedule needs at least two radii")
    current = list(grid or (settings.SURFACE_N_PHI, settings.SURFACE_N_THETA))
    for attempt in Retrying(
        stop=stop_after_attempt(3),
        retry=retry_if_exception_type(QuadratureError),
        reraise=True,
    ):
        with attempt:
            values = _grid_refined_values(st, radii, current, grid_tol)

    if len(values) >= 3:
        d1, d2 = values[-2] - values[-3], values[-1] - values[-2]
        if abs(d2) > 0.75 * abs(d1) and abs(d2) > 1e-6 * max(1.0, abs(values[-1])):
            raise QuadratureError(
                f"mass integrals do not settle along the schedule {radii}: {values}; the structure is not asymptotically flat"
            )
    mass, error = extrapolate_inverse_power(radii, values, power=1.0, terms=1)
    logger.info("p-mass of %s: %.10g +- %.2e", st.name, mass, error)
    return MassEstimate(mass, error, radii, values, (current[0], current[1]))


def mass_closed_form(A: float) -> float:
    return 48.0 * PI2 * A


# boundary integrals on the flat Heisenberg group --------------------------------------------------


def flux_rho_inv_sq(radius: float = 1.0, n_phi: int | None = None, n_theta: int | None = None) -> float:
    """-i int f,1 theta^1 ^ theta + conj for f = rho^-2; the flux behind Delta_b rho^-2 = -8 pi delta."""
    f1 = flat_Z1(rho_power(-2.0))
    form = FLAT_THETA1.wedge(FLAT_THETA).scale(-1j * f1)
    return surface_integral(form + form.conj(), radius, n_phi, n_theta).real


def sphere_area_identity(radius: float = 1.0) -> tuple[float, float]:
    """(int rho^4 dphi ^ dt / Lambda^4, int dphi ^ dt) on the sphere of radius Lambda."""
    area = dphi_dt_form()
    scaled = area.scale(rho_power(4.0) / radius**4)
    return surface_integral(scaled, radius).real, surface_integral(area, radius).real


def _conj_pair(form: TwoForm) -> TwoForm:
    return form + form.conj()


def _dzbar_theta() -> TwoForm:
    return TwoForm(1j * ZBAR, 0.0, 1.0)


def boundary_zbar_term(A: float, radius: float = 1.0, n_phi: int | None = None, n_theta: int | None = None) -> float:
    """int i (Z1bar beta,1bar) (i zbar dz^dzbar + dzbar^dt) + conj; equals 28 pi^2 A."""
    if A == 0:
        return 0.0
    g = flat_Z1bar(beta_1bar_field(A))
    return surface_integral(_conj_pair(_dzbar_theta().scale(1j * g)), radius, n_phi, n_theta).real


def boundary_reeb_term(A: float, radius: float = 1.0, n_phi: int | None = None, n_theta: int | None = None) -> float:
    """int -(T beta,1bar) sqrt2 z (i zbar dz^dzbar + dzbar^dt) + conj; equals -20 pi^2 A."""
    if A == 0:
        return 0.0
    g = -SQRT2 * Z * flat_T(beta_1bar_field(A))
    return surface_integral(_conj_pair(_dzbar_theta().scale(g)), radius, n_phi, n_theta).real


def residual_piece(A: float) -> float:
    """8 pi A int_{-1}^{1} sqrt(1 - t^2) dt = 4 pi^2 A."""
    value, _ = integrate.quad(lambda t: math.sqrt(max(0.0, 1.0 - t * t)), -1.0, 1.0)
    return 8.0 * math.pi * A * value


def paneitz_G_field(A: float) -> ScalarField:
    """4 (beta_-1),1bar 1 1 by jets."""
    return 4.0 * flat_Z1(flat_Z1(flat_Z1bar(beta_minus1_field(A))))


def paneitz_G_closed_form(A: float) -> ScalarField:
    return (-12.0 * SQRT2 * math.pi * A) * ZBAR * ZBAR * W * W * rho_power(-10.0)


def paneitz_boundary(A: float, radius: float = 1.0, n_phi: int | None = None, n_theta: int | None = None) -> float:
    """Real part of int sqrt2 z^2 G dz^dzbar - i sqrt2 z G dz^dt with G = 4 (beta_-1),1bar 1 1; equals -64 pi^2 A."""
    if A == 0:
        return 0.0
    G = paneitz_G_field(A)
    form = TwoForm(SQRT2 * Z * Z * G, -1j * SQRT2 * Z * G, 0.0)
    return surface_integral(form, radius, n_phi, n_theta).real


# the Kohn Laplacian of zbar ------------------------------------------------------------------------


@dataclass
class BoxExpansion:
    radii: tuple[float, ...]
    coefficients: list[float]
    leading: float
    error: float
    remainder_slope: float


def box_b_zbar_closed_form(A: float) -> ScalarField:
    """4 pi A zbar w rho^-6 / F^2, exact for the model without remainders."""
    F = AFModel(A).conformal_factor()
    return (4.0 * math.pi * A) * ZBAR * W * rho_power(-6.0) / (F * F)


def box_b_zbar_expansion(model: AFModel, radii: Sequence[float] = (10.0, 20.0, 40.0)) -> BoxExpansion:
    """Fit Box_b zbar = c zbar w / rho^6 + O(rho^-4) along the positive x-axis."""
    radii = tuple(float(r) for r in radii)
    if model.A == 0 and model.is_exact:
        return BoxExpansion(radii, [0.0] * len(radii), 0.0, 0.0, -math.inf)
    st = af_structure(model)
    box = kohn_box_contracted(st, ZBAR)
    pts = np.array([[r, 0.0, 0.0] for r in radii])
    # at (rho, 0, 0): zbar w / rho^6 = rho^-3
    raw = evaluate([box], pts)[0]
    coefficients = [float((b * r**3).real) for b, r in zip(raw, radii)]
    leading, error = extrapolate_inverse_power(radii, coefficients, power=2.0, terms=min(2, len(radii) - 1))
    leading_term = 4.0 * math.pi * model.A * np.array(radii) ** -3.0
    remainder = raw - leading_term
    slope = fit_decay_slope(radii, remainder) if np.all(np.abs(remainder) > 0) else -math.inf
    return BoxExpansion(radii, coefficients, leading, error, slope)


# blow-up of the Green's function contact form -------------------------------------------------------


@dataclass
class BlowupReport:
    A: float
    rho_star: float
    point: tuple[float, float, float]
    theta_error: float
    theta1_error: float
    predicted_theta_error: float
    omega_error: float = 0.0
    predicted_omega_error: float = 0.0

    def checks(self, factor: float = 10.0, floor: float = 1e-10) -> dict[str, bool]:
        """Each mismatch against `factor` times its leading-order size."""
        return {
            "theta": self.theta_error <= factor * self.predicted_theta_error + floor,
            "theta1": self.theta1_error <= factor * self.predicted_theta_error + floor,
            "omega": self.omega_error <= factor * self.predicted_omega_error + floor,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks().values())


def near_pole_structure(A: float) -> PHStructure:
    """G^2 theta_0 with G = 1/(2 pi rho^2) + A, the Green's function contact form near the pole."""
    G = (1.0 / (2.0 * math.pi)) * rho_power(-2.0) + A
    return conformal_change(flat_structure(), log(G).real, f"near-pole(A={A:g})")


def blowup_phase_field() -> ScalarField:
    """phi = 3 arg v, so that e^{i phi} = -v^3/|v|^3 up to the constant sign."""
    return 3.0 * log(V).imag


def _pullback(form: OneForm, star: np.ndarray) -> tuple[complex, complex, complex]:
    """Coefficients of a pulled-back 1-form on (theta_0, dz*, dzbar*) at star, through z = -z*/v*, t = -t*/|v*|^2."""
    zmap = -Z / V
    tmap = -T / (V * V.conj()).real
    zj, tj = evaluate_jets([zmap, tmap], star, 1)
    grads = [(zj.derivative(a)[0], tj.derivative(a)[0].real) for a in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
    base = np.array([[zj.value[0].real, zj.value[0].imag, tj.value[0].real]])
    cz, czb, ct = (v[0] for v in evaluate(list(form.components), base))
    ax, ay, at = (cz * dz + czb * np.conj(dz) + ct * dt for dz, dt in grads)
    s_z, s_zb = 0.5 * (ax - 1j * ay), 0.5 * (ax + 1j * ay)
    zs = complex(star[0, 0], star[0, 1])
    return at, s_z + 1j * zs.conjugate() * at, s_zb - 1j * zs * at


def _flat_basis(form: OneForm, star: np.ndarray) -> tuple[complex, complex, complex]:
    cz, czb, ct = (v[0] for v in evaluate(list(form.components), star))
    zs = complex(star[0, 0], star[0, 1])
    return ct, cz + 1j * zs.conjugate() * ct, czb - 1j * zs * ct


def blowup_inversion_check(A: float, rho_star: float = 10.0, direction=(1.1, 0.3)) -> BlowupReport:
    """Pull the near-pole forms back through the CR inversion and compare with the AF model.

    4 pi^2 theta pulls back to F theta_0 + ..., and 2 pi e^{i phi} theta^1 to the
    AF theta^1, with e^{i phi} = -v*^3 / rho*^6. The rotated frame carries the
    connection pullback(omega) - i d phi, compared on dz* with the closed form.
    Both theta mismatches are O(A^2 rho*^-4); the connection one is O(A rho*^-2).
    """
    star = _ray(rho_star, direction)
    base = cr_invert_inverse(HPoint(*star[0]))
    if 1.0 / (2.0 * math.pi * (abs(base.z) ** 4 + base.t**2) ** 0.5) + A <= 0:
        raise DomainError(f"the near-pole Green's function is not positive at rho* = {rho_star}")
    near = near_pole_structure(A)
    far = af_structure(AFModel(A))

    theta0, _, _ = _pullback(near.coframe.theta, star)
    _, theta1_dz, _ = _pullback(near.coframe.theta1, star)
    F, _, _ = _flat_basis(far.coframe.theta, star)
    _, af_theta1_dz, _ = _flat_basis(far.coframe.theta1, star)

    phi = blowup_phase_field()
    _, omega_dz, _ = _pullback(near.omega_form(), star)
    _, dphi_dz, _ = _flat_basis(OneForm(phi.dz(), phi.dzbar(), phi.dt()), star)
    _, closed_dz, _ = _flat_basis(af_connection_closed_form(A), star)

    vs = complex(star[0, 2], star[0, 0] ** 2 + star[0, 1] ** 2)
    phase = -(vs**3) / rho_star**6
    report = BlowupReport(
        A,
        rho_star,
        tuple(float(c) for c in star[0]),
        relative_error(4.0 * PI2 * theta0, F),
        relative_error(2.0 * math.pi * phase * theta1_dz, af_theta1_dz),
        4.0 * PI2 * A * A * rho_star**-4,
        relative_error(omega_dz - 1j * dphi_dz, closed_dz),
        2.0 * math.pi * abs(A) * rho_star**-2,
    )
    logger.info(
        "blow-up check at rho* = %g: theta %.2e, theta1 %.2e, omega %.2e",
        rho_star,
        report.theta_error,
        report.theta1_error,
        report.omega_error,
    )
    return report
