"""The standard bubble, the Tanaka-Webster quotient and glued test functions.

The bubble omega_lam = lam [lam^4 t^2 + (1 + lam^2 |z|^2)^2]^-1/2 solves
-Delta_b omega = omega^3 on the Heisenberg group.  Its quotient
int |grad omega|^2 / (int omega^4)^1/2 equals pi since int omega^4 = pi^2.

The glued test function is the bubble on {rho <= rho0}, eps0 (G - psi w)
+ psi phi / lam on the annulus {rho0 < rho <= 2 rho0} and eps0 G outside,
with G = rho^-2 + At + w and eps0 = 1 / (lam (1 + At rho0^2)).  Its numerator
falls short of the ball integral of omega^4 by 8 pi At / (lam^2 (1 + At rho0^2))
to leading order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from tqdm import tqdm

from .conformal_deform import conformal_change
from .fields import ZERO, Coords, ScalarField, T, as_points, evaluate, is_zero, lift, log, sqrt, step
from .heisenberg_core import (
    ABSZ2,
    FLAT_THETA,
    FLAT_THETA1,
    RHO,
    RHO4,
    flat_sublaplacian,
    flat_Z1,
    rho_power,
)
from .jets import Jet
from .ph_calculus import PHStructure, flat_structure
from .quadrature import VolumeQuadrature, dphi_dt_form, surface_integral
from .utils import InvariantViolation, QuadratureError, extrapolate_inverse_power

logger = logging.getLogger(__name__)

Y0 = math.pi
DEEP = 12.0  # inner radial cutoff e^-DEEP / lam


# the bubble -------------------------------------------------------------------------------------------


def bubble_field(lam: float) -> ScalarField:
    if not lam > 0:
        raise InvariantViolation(f"bubble concentration must be positive, got {lam}")
    denom = (lam**4) * T * T + (1.0 + (lam * lam) * ABSZ2) ** 2
    return (lam * denom ** -0.5).named(f"omega_{lam:g}")


def _denominator(lam: float, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r2 = pts[..., 0] ** 2 + pts[..., 1] ** 2
    return r2, (1.0 + lam * lam * r2) ** 2 + lam**4 * pts[..., 2] ** 2


def bubble_arrays(lam: float, pts: np.ndarray) -> np.ndarray:
    _, D = _denominator(lam, np.asarray(pts, dtype=float))
    return lam / np.sqrt(D)


def bubble(lam: float, Z) -> float:
    if not lam > 0:
        raise InvariantViolation(f"bubble concentration must be positive, got {lam}")
    return float(bubble_arrays(lam, as_points(Z))[0])


def bubble_gradient_sq_arrays(lam: float, pts: np.ndarray) -> np.ndarray:
    """2 |Z1 omega|^2 = |z|^2 lam^6 / D^2."""
    r2, D = _denominator(lam, np.asarray(pts, dtype=float))
    return r2 * lam**6 / (D * D)


def bubble_gradient_sq_closed_form(lam: float) -> ScalarField:
    denom = (lam**4) * T * T + (1.0 + (lam * lam) * ABSZ2) ** 2
    return (lam**6) * ABSZ2 / (denom * denom)


def gradient_sq(st: PHStructure, u: ScalarField) -> ScalarField:
    """|grad_b u|^2 = 2 Re (Z1 u)(Z1bar u) for real u."""
    return 2.0 * (st.Z1(u) * st.Z1bar(u)).real


def bubble_residual(lam: float) -> ScalarField:
    """-Delta_b omega - omega^3."""
    omega = bubble_field(lam)
    return -flat_sublaplacian(omega) - omega * omega * omega


def bubble_structure(lam: float) -> PHStructure:
    """omega^2 theta_0; its Webster curvature is the constant 4."""
    return conformal_change(flat_structure(), log(bubble_field(lam)).real, f"bubble({lam:g})")


@dataclass
class QuotientValue:
    value: float
    numerator: float
    denominator: float
    error: float = 0.0


def _quad(n_phi: int = 8, n_theta: int = 32, n_radial: int = 12, panel: float = 0.5) -> VolumeQuadrature:
    return VolumeQuadrature(n_phi, n_theta, n_radial, panel)


def bubble_quotient(lam: float, truncation: float | None = None, quad: VolumeQuadrature | None = None) -> QuotientValue:
    """int |grad omega|^2 / (int omega^4)^1/2 over the whole group, dyadic shells plus tail."""
    truncation = truncation if truncation is not None else 1e4 / lam
    if truncation * lam < 100:
        raise InvariantViolation(f"truncation radius {truncation} is below 100 / lam")
    quad = quad or _quad()
    inner = math.exp(-DEEP) / lam
    num, num_tail = quad.integrate_to_infinity(lambda p: bubble_gradient_sq_arrays(lam, p), inner, truncation)
    den, den_tail = quad.integrate_to_infinity(lambda p: bubble_arrays(lam, p) ** 4, inner, truncation)
    num, den = 4.0 * num.real, 4.0 * den.real
    if not (num > 0 and den > 0):
        raise QuadratureError("bubble quotient integrals are not positive")
    value = num / math.sqrt(den)
    logger.info("bubble quotient at lam = %g: %.12f (tails %.1e, %.1e)", lam, value, num_tail, den_tail)
    return QuotientValue(value, num, den, 4.0 * (num_tail + den_tail))


def quotient(
    u: ScalarField,
    st: PHStructure | None = None,
    quad: VolumeQuadrature | None = None,
    rho_min: float = 1e-6,
    support: float | None = None,
    rho_max: float = 1e3,
    curvature: ScalarField | None = None,
) -> QuotientValue:
    """int (|grad_b u|^2 + R u^2 / 4) theta ^ d theta / (int u^4 theta ^ d theta)^1/2.

    With ``support`` the integrals stop at that radius, otherwise they run to
    rho_max in dyadic shells with a geometric tail.
    """
    st = st or flat_structure()
    quad = quad or VolumeQuadrature()
    R = st.R if curvature is None else lift(curvature)
    vol = st.volume_density()
    energy = (gradient_sq(st, u) + 0.25 * R * u * u) * vol
    mass = u * u * u * u * vol
    if support is not None:
        num = quad.integrate(energy, rho_min, support)
        den = quad.integrate(mass, rho_min, support)
        tail = 0.0
    else:
        num, t1 = quad.integrate_to_infinity(energy, rho_min, rho_max)
        den, t2 = quad.integrate_to_infinity(mass, rho_min, rho_max)
        tail = t1 + t2
    num, den = num.real, den.real
    if not den > 0:
        raise QuadratureError("the L4 norm of the test function vanished")
    return QuotientValue(num / math.sqrt(den), num, den, tail)


def quotient_monte_carlo(u: ScalarField, n: int, seed: int, radius: float = 1.0, st: PHStructure | None = None) -> QuotientValue:
    """Flat-box Monte-Carlo estimate of the quotient of u supported in {rho <= radius}."""
    st = st or flat_structure()
    rng = np.random.default_rng(seed)
    box = np.array([radius, radius, radius * radius])
    pts = rng.uniform(-1.0, 1.0, (n, 3)) * box
    r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    inside = r2 * r2 + pts[:, 2] ** 2 <= radius**4
    pts = pts[inside]
    vol = st.volume_density()
    energy, mass = evaluate([(gradient_sq(st, u) + 0.25 * st.R * u * u) * vol, u * u * u * u * vol], pts)
    scale = 8.0 * radius**4 / n
    num = float(np.sum(energy.real)) * scale
    den = float(np.sum(mass.real)) * scale
    return QuotientValue(num / math.sqrt(den), num, den)


# the glued test function ----------------------------------------------------------------------------


@dataclass
class QuotientConfig:
    lam: float
    rho0: float
    Atilde: float = 0.0
    curvature: ScalarField | None = field(default=None, compare=False)
    w_tilde: ScalarField | None = field(default=None, compare=False)
    scan: bool = False
    manifold_radius: float | None = None
    n_phi: int = 8
    n_theta: int = 32
    n_radial: int = 12
    panel: float = 0.5

    def __post_init__(self):
        if not (self.lam > 0 and self.rho0 > 0):
            raise InvariantViolation("lam and rho0 must be positive")
        if self.lam * self.rho0 < 10:
            raise InvariantViolation(f"lam rho0 = {self.lam * self.rho0:g} violates lam rho0 >= 10")
        if self.scan and self.lam**2 * self.rho0**4 < 100:
            raise InvariantViolation(f"lam^2 rho0^4 = {self.lam**2 * self.rho0**4:g} violates lam^2 rho0^4 >= 100")
        if self.Atilde < 0 and 1.0 + self.Atilde * self.rho0**2 <= 0:
            raise InvariantViolation("1 + At rho0^2 must stay positive")

    @property
    def epsilon0(self) -> float:
        return 1.0 / (self.lam * (1.0 + self.Atilde * self.rho0**2))

    @property
    def outer_radius(self) -> float:
        return self.manifold_radius if self.manifold_radius is not None else 10.0 * self.rho0

    def quadrature(self) -> VolumeQuadrature:
        return _quad(self.n_phi, self.n_theta, self.n_radial, self.panel)

    @property
    def w(self) -> ScalarField:
        return ZERO if self.w_tilde is None else self.w_tilde


def w_tilde_generator(c1: float) -> ScalarField:
    """c1 t / rho = c1 rho cos(th): O(rho), vanishing at the pole."""
    if c1 == 0:
        return ZERO
    return c1 * T * rho_power(-1.0)


def green_model(Atilde: float, w_tilde: ScalarField | None = None) -> ScalarField:
    G = rho_power(-2.0) + Atilde
    return G if w_tilde is None else G + w_tilde


def phi_correction(lam: float) -> ScalarField:
    """(t^2 + |z|^4 + 2|z|^2/lam^2 + 1/lam^4)^-1/2 - rho^-2, written without cancellation."""
    delta = (2.0 / lam**2) * ABSZ2 + 1.0 / lam**4
    a = sqrt(RHO4 + delta)
    rho2 = rho_power(2.0)
    return -delta / (a * rho2 * (a + rho2))


def cutoff_psi(rho0: float) -> ScalarField:
    """1 on {rho <= rho0}, 0 on {rho >= 2 rho0}."""
    return step(2.0 - RHO / rho0)


@dataclass
class GluedFunction:
    inner: ScalarField
    middle: ScalarField
    outer: ScalarField
    field: ScalarField
    correction: ScalarField


def _piecewise(rho0: float, inner: ScalarField, middle: ScalarField, outer: ScalarField) -> ScalarField:
    def rule(c: Coords) -> Jet:
        x, y, t = c.pts[:, 0], c.pts[:, 1], c.pts[:, 2]
        rho = ((x * x + y * y) ** 2 + t * t) ** 0.25
        with np.errstate(all="ignore"):
            parts = [f.jet(c) for f in (inner, middle, outer)]
        order = min(p.order for p in parts)
        parts = [p.truncate(order) for p in parts]
        coef = np.where(
            (rho <= rho0)[:, None],
            parts[0].coef,
            np.where((rho <= 2.0 * rho0)[:, None], parts[1].coef, parts[2].coef),
        )
        return Jet(coef, order)

    depth = max(inner.depth, middle.depth, outer.depth)
    return ScalarField(rule, depth, (), "glued test function")


def test_function_parts(cfg: QuotientConfig) -> GluedFunction:
    eps0 = cfg.epsilon0
    G = green_model(cfg.Atilde, cfg.w_tilde)
    psi = cutoff_psi(cfg.rho0)
    phi = phi_correction(cfg.lam)
    omega = bubble_field(cfg.lam)
    # u - eps0 G on the annulus
    correction = psi * (phi / cfg.lam - eps0 * cfg.w)
    middle = eps0 * G + correction
    outer = eps0 * G
    return GluedFunction(omega, middle, outer, _piecewise(cfg.rho0, omega, middle, outer), correction)


def test_function_field(cfg: QuotientConfig) -> ScalarField:
    return test_function_parts(cfg).field


def test_function(cfg: QuotientConfig, Z) -> float:
    return float(test_function_field(cfg).values(Z)[0].real)


# the boundary terms -------------------------------------------------------------------------------


def ball_boundary_term(lam: float, rho0: float, n_phi: int | None = None, n_theta: int | None = None) -> float:
    """-2 int_{rho = rho0} lam^4 (|z|^2 + lam^2 rho^4) / D^2 dphi ^ dt, equal to the ball integral of |grad omega|^2 - omega^4."""
    denom = (lam**4) * T * T + (1.0 + (lam * lam) * ABSZ2) ** 2
    density = -2.0 * lam**4 * (ABSZ2 + (lam * lam) * RHO4) / (denom * denom)
    return surface_integral(dphi_dt_form().scale(density), rho0, n_phi, n_theta).real


def green_exterior_energy(
    Atilde: float,
    rho0: float,
    w_tilde: ScalarField | None = None,
    outer: float | None = None,
    quad: VolumeQuadrature | None = None,
) -> float:
    """int_{rho > rho0} |grad G|^2 for G = rho^-2 + At + w.

    The harmonic part rho^-2 + At goes through the boundary formula
    i G (Z1 G) theta^1 ^ theta + conj on {rho = rho0}.  A non-zero w is not
    harmonic and grows at infinity, so its contribution
    |grad (G0 + w)|^2 - |grad G0|^2 is integrated over rho0 < rho < outer only.
    """
    G0 = green_model(Atilde)
    form = FLAT_THETA1.wedge(FLAT_THETA).scale(1j * G0 * flat_Z1(G0))
    energy = surface_integral(form + form.conj(), rho0).real
    if w_tilde is None or is_zero(w_tilde):
        return energy
    if outer is None or outer <= rho0:
        raise ValueError("a non-harmonic Green correction needs an outer radius beyond rho0")
    quad = quad or _quad()
    za, zw = flat_Z1(G0), flat_Z1(w_tilde)
    density = 2.0 * (zw * zw.conj()).real + 4.0 * (za * zw.conj()).real
    return energy + 4.0 * quad.integrate(density, rho0, outer).real


def green_exterior_energy_closed_form(Atilde: float, rho0: float) -> float:
    return 8.0 * math.pi * (rho0**-2 + Atilde)


# the numerator deficit ------------------------------------------------------------------------------


@dataclass
class DeficitPieces:
    lam: float
    rho0: float
    Atilde: float
    inner_gradient: float
    inner_l4: float
    inner_curvature: float
    annulus: float
    green: float
    epsilon0: float
    outer_l4: float
    numerator: float = 0.0
    denominator: float = 0.0
    deficit: float = 0.0

    def __post_init__(self):
        self.numerator = self.inner_gradient + self.inner_curvature + self.annulus + self.epsilon0**2 * self.green
        self.deficit = self.numerator - self.inner_l4
        self.denominator = self.inner_l4 + self.outer_l4

    @property
    def quotient(self) -> float:
        return self.numerator / math.sqrt(self.denominator)

    @property
    def deficit_scaled(self) -> float:
        """-deficit lam^2 / At (or -deficit lam^2 when At = 0)."""
        scale = self.Atilde if self.Atilde != 0 else 1.0
        return -self.deficit * self.lam**2 / scale

    @property
    def deficit_scaled_rho0(self) -> float:
        return self.deficit_scaled * self.rho0**2

    @property
    def predicted(self) -> float:
        return 8.0 * math.pi / (1.0 + self.Atilde * self.rho0**2)

    def row(self) -> dict[str, float]:
        return {
            "lambda": self.lam,
            "rho0": self.rho0,
            "Atilde": self.Atilde,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "quotient": self.quotient,
            "deficit_scaled": self.deficit_scaled,
            "deficit_scaled_rho0": self.deficit_scaled_rho0,
            "predicted": self.predicted,
        }


def deficit_pieces(cfg: QuotientConfig) -> DeficitPieces:
    """Numerator of the quotient of the glued function, split as in the Schoen gluing argument.

    The ball and annulus parts are volume quadratures; the exterior Green energy
    is the boundary formula at {rho = rho0}.
    """
    lam, rho0 = cfg.lam, cfg.rho0
    quad = cfg.quadrature()
    inner = math.exp(-DEEP) / lam
    grad = 4.0 * quad.integrate(lambda p: bubble_gradient_sq_arrays(lam, p), inner, rho0).real
    l4 = 4.0 * quad.integrate(lambda p: bubble_arrays(lam, p) ** 4, inner, rho0).real
    curv = 0.0
    R = None if cfg.curvature is None else lift(cfg.curvature)
    if R is not None:
        omega = bubble_field(lam)
        curv = quad.integrate(R * omega * omega, inner, rho0).real

    parts = test_function_parts(cfg)
    a = cfg.epsilon0 * green_model(cfg.Atilde, cfg.w_tilde)
    d = parts.correction
    za, zd = flat_Z1(a), flat_Z1(d)
    density = 2.0 * (zd * zd.conj()).real + 4.0 * (za * zd.conj()).real
    if R is not None:
        density = density + 0.25 * R * (2.0 * a * d + d * d)
    annulus = 4.0 * quad.integrate(density, rho0, 2.0 * rho0).real

    green = green_exterior_energy(cfg.Atilde, rho0, cfg.w_tilde, max(cfg.outer_radius, 2.0 * rho0), quad)
    middle4 = quad.integrate(parts.middle**4, rho0, 2.0 * rho0).real
    outer4 = quad.integrate(parts.outer**4, 2.0 * rho0, max(cfg.outer_radius, 2.0 * rho0)).real
    pieces = DeficitPieces(
        lam, rho0, cfg.Atilde, grad, l4, curv, annulus, green, cfg.epsilon0, 4.0 * (middle4 + outer4)
    )
    logger.debug("deficit pieces %s", pieces)
    return pieces


def deficit_scan(
    Atilde: float,
    grid: Iterable[tuple[float, float]],
    progress: bool = False,
    **options,
) -> list[dict[str, float]]:
    """Table of the numerator deficit over a grid of (lam, rho0)."""
    cells = [QuotientConfig(lam, rho0, Atilde, scan=True, **options) for lam, rho0 in grid]
    rows = []
    for cfg in tqdm(cells, desc="deficit scan", disable=not progress):
        rows.append(deficit_pieces(cfg).row())
    return rows


@dataclass
class DeficitFit:
    limit: float
    error: float
    limit_rho0: float
    error_rho0: float


def fit_deficit_limit(rows: Sequence[dict[str, float]]) -> DeficitFit:
    """Extrapolate both normalisations of the scaled deficit to lam -> infinity (in 1/lam^2)."""
    lams = [r["lambda"] for r in rows]
    if len(set(lams)) < 2:
        raise ValueError("the deficit fit needs at least two values of lambda")
    terms = 1
    limit, err = extrapolate_inverse_power(lams, [r["deficit_scaled"] for r in rows], power=2.0, terms=terms)
    limit_r, err_r = extrapolate_inverse_power(lams, [r["deficit_scaled_rho0"] for r in rows], power=2.0, terms=terms)
    return DeficitFit(limit, err, limit_r, err_r)


# remainder bookkeeping on a curved structure --------------------------------------------------------------


@dataclass
class RemainderBound:
    lam: float
    rho0: float
    gradient_difference: float
    C1: float
    curvature_term: float
    C2: float


def remainder_bounds(st: PHStructure, lams: Sequence[float], rho0: float, quad: VolumeQuadrature | None = None) -> list[RemainderBound]:
    """Ball integrals of |grad_b omega|^2 theta^dtheta - |grad_0 omega|^2 theta_0^dtheta_0 and of R omega^2 / 4,
    with C1 = |I1| lam^2 / rho0^2 and C2 = |I2| lam^2 / rho0."""
    quad = quad or VolumeQuadrature(16, 32, 12, 0.5)
    flat = flat_structure()
    vol = st.volume_density()
    out = []
    for lam in lams:
        omega = bubble_field(lam)
        diff = gradient_sq(st, omega) * vol - 4.0 * gradient_sq(flat, omega)
        inner = math.exp(-DEEP) / lam
        i1 = quad.integrate(diff, inner, rho0).real
        i2 = quad.integrate(0.25 * st.R * omega * omega * vol, inner, rho0).real
        out.append(RemainderBound(lam, rho0, i1, abs(i1) * lam**2 / rho0**2, i2, abs(i2) * lam**2 / rho0))
        logger.info("remainders at lam = %g: C1 = %.4g, C2 = %.4g", lam, out[-1].C1, out[-1].C2)
    return out
