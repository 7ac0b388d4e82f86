"""Example pseudohermitian structures.

* the CR sphere, carried to the Heisenberg group by the inverse Cayley map,
  together with its Green's function for the conformal sublaplacian;
* the S^2 x S^1 structure, i.e. rho^-2 times the flat contact form, which is
  invariant under the dyadic dilation (z, t) -> (2z, 4t);
* a structure in CR normal coordinates with a prescribed Cartan tensor at the
  origin, built by deforming J with a weight-4 polynomial.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import linalg

from .asymptotic_mass import AFModel, af_structure
from .conformal_deform import conformal_change, rotate_frame
from .fields import (
    ONE,
    ScalarField,
    OneForm,
    cos,
    evaluate,
    log,
    sin,
    sqrt,
    step,
)
from .heisenberg_core import (
    ABSZ2,
    FLAT_THETA,
    ORIGIN,
    RHO4,
    SQRT2,
    V,
    W,
    HPoint,
    T,
    Z,
    ZBAR,
    dilate_arrays,
    random_points,
    rho_power,
)
from .ph_calculus import (
    Coframe,
    PHStructure,
    cartan_tensor,
    cov_deriv,
    flat_structure,
    from_coframe,
    paneitz,
    sublaplacian,
)
from .quadrature import VolumeQuadrature, polar_points
from .utils import DomainError, InconsistentBundleError, extrapolate_inverse_power, fit_decay_slope

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)


# the CR sphere -----------------------------------------------------------------------------------

# g = t + i(1 + |z|^2); the sphere point over (z, t) is (2iz/g, (i - v)/g)
G_CAYLEY = (T + 1j * (ABSZ2 + 1.0)).named("g")
ABS_G = sqrt((G_CAYLEY * G_CAYLEY.conj()).real).named("|g|")


@dataclass(frozen=True)
class SphereChart:
    """The unit sphere of C^2 minus (0, -1), parametrised by the Heisenberg group."""

    def coordinates(self) -> tuple[ScalarField, ScalarField]:
        inv_g = G_CAYLEY.reciprocal()
        return (2j * Z * inv_g).named("z1"), ((1j - V) * inv_g).named("z2")

    def embed(self, points) -> np.ndarray:
        """(N, 2) complex array of sphere points."""
        z1, z2 = evaluate(list(self.coordinates()), points)
        return np.stack([z1, z2], axis=1)

    def constraint_deviation(self, points) -> float:
        emb = self.embed(points)
        return float(np.max(np.abs(np.sum(np.abs(emb) ** 2, axis=1) - 1.0)))


def sphere_coordinates() -> tuple[ScalarField, ScalarField]:
    return SphereChart().coordinates()


@lru_cache(maxsize=None)
def sphere_structure() -> PHStructure:
    """The standard contact form of S^3 pulled back by the Cayley chart.

    The pullback is 4|g|^-2 times the flat form; the frame is then rotated so that
    Z1 = (zbar2 d/dz1 - zbar1 d/dz2)/sqrt(2), which makes the connection vanish
    on Z1 and Z1bar. Torsion is zero and R = 1.
    """
    f = math.log(2.0) - log(ABS_G)
    base = conformal_change(flat_structure(), f, "sphere")
    u = -1j * G_CAYLEY.conj() * ABS_G / (G_CAYLEY * G_CAYLEY)
    return rotate_frame(base, u, "sphere")


def sphere_integral(
    density: ScalarField, st: PHStructure | None = None, quad: VolumeQuadrature | None = None
) -> complex:
    """Integral of density * theta ^ d theta over the sphere, through the Cayley chart."""
    st = st or sphere_structure()
    quad = quad or VolumeQuadrature()
    return quad.integrate(density * st.volume_density(), 1e-2, 1e2)


def cayley(z1: complex, z2: complex) -> HPoint:
    """(z1, z2) -> (z1/(1 + z2), Re(i(1 - z2)/(1 + z2)))."""
    _check_on_sphere(z1, z2)
    den = 1.0 + z2
    if abs(den) < 1e-12:
        raise DomainError("the Cayley transform is undefined at (0, -1)")
    return HPoint.from_complex(z1 / den, (1j * (1.0 - z2) / den).real)


def cayley_inverse(p: HPoint) -> tuple[complex, complex]:
    g = complex(p.t, 1.0 + abs(p.z) ** 2)
    v = complex(p.t, abs(p.z) ** 2)
    return 2j * p.z / g, (1j - v) / g


def sphere_green(z1: complex, z2: complex) -> float:
    """Green's function of the conformal sublaplacian with pole at (0, 1)."""
    _check_on_sphere(z1, z2)
    num = abs(1.0 + z2) ** 2
    den = abs(z1) ** 4 - ((z2 - z2.conjugate()) ** 2).real
    if den <= 1e-300:
        raise DomainError(f"Green's function evaluated at a singular point ({z1}, {z2})")
    return math.sqrt(num / den) / math.pi


def sphere_green_field() -> ScalarField:
    """The same Green's function in the chart: |g| / (2 pi rho^2)."""
    return (ABS_G * rho_power(-2.0) / (2.0 * math.pi)).named("G_p")


def _check_on_sphere(z1: complex, z2: complex) -> None:
    dev = abs(abs(z1) ** 2 + abs(z2) ** 2 - 1.0)
    if dev > 1e-9:
        raise DomainError(f"({z1}, {z2}) is not on the unit sphere (deviation {dev:.2e})")


def embeddability_identity(f: ScalarField, quad: VolumeQuadrature | None = None) -> tuple[complex, complex]:
    """Both sides of int f,111bar conj(f),1bar = -int |f,11|^2 on the sphere."""
    st = sphere_structure()
    f_11 = cov_deriv(st, f, "11")
    lhs = sphere_integral(cov_deriv(st, f, "111b") * cov_deriv(st, f.conj(), "1b"), st, quad)
    rhs = -sphere_integral(f_11 * f_11.conj(), st, quad)
    return lhs, rhs


# S^2 x S^1 ----------------------------------------------------------------------------------------


@lru_cache(maxsize=None)
def s2s1_structure() -> PHStructure:
    """rho^-2 times the flat contact form on the punctured Heisenberg group."""
    return conformal_change(flat_structure(), -0.25 * log(RHO4), "s2s1")


def s2s1_torsion_closed_form() -> ScalarField:
    """(i/2) zbar^2 w^2 rho^-6."""
    return 0.5j * ZBAR * ZBAR * W * W * rho_power(-6.0)


def s2s1_curvature_closed_form() -> ScalarField:
    return ABSZ2 * rho_power(-2.0)


def check_dilation_invariance(st: PHStructure, points, factor: float = 2.0) -> dict[str, float]:
    """Deviation of the structure functions from invariance under the dilation by factor."""
    pts = np.asarray(points, dtype=float)
    moved = dilate_arrays(factor, pts)
    names = ("R", "A11", "omega(Z1)", "omega(T)")
    fields = [st.R, st.A11, st.omega_Z1, st.omega_T]
    here = evaluate(fields, pts)
    there = evaluate(fields, moved)
    out = {n: float(np.max(np.abs(a - b))) for n, a, b in zip(names, here, there)}
    vol_here, vol_there = evaluate([st.volume_density()], pts)[0], evaluate([st.volume_density()], moved)[0]
    out["volume"] = float(np.max(np.abs(vol_here - factor**4 * vol_there)))
    return out


LOG2_RHO = (0.25 * log(RHO4) / LOG2).named("log2 rho")


@dataclass
class SamplingResult:
    periods: tuple[int, ...]
    values: list[float]
    limit: float
    limit_error: float
    per_period: float
    norm2: float


def s2s1_paneitz_period(phi: ScalarField, quad: VolumeQuadrature | None = None) -> tuple[float, float]:
    """(int phi P phi, int phi^2) over one period 1 <= rho <= 2, with the S^2 x S^1 form."""
    st = s2s1_structure()
    quad = quad or VolumeQuadrature()
    vol = st.volume_density()
    value = quad.integrate(phi * paneitz(st, phi) * vol, 1.0, 2.0)
    norm2 = quad.integrate(phi * phi * vol, 1.0, 2.0)
    return float(value.real), float(norm2.real)


def s2s1_paneitz_sampling(
    phi: ScalarField, periods: tuple[int, ...] = (1, 2, 3), quad: VolumeQuadrature | None = None
) -> SamplingResult:
    """Averaged Paneitz form of a cut-off periodic function.

    phi must be invariant under (z, t) -> (2z, 4t).  For each n the function is
    multiplied by a cutoff equal to 1 on 2 <= rho <= 2^(n+1) that falls to 0 over one
    period at each end; the form is integrated over 1 <= rho <= 2^(n+2) and divided by n.
    The values behave like c + b/n where c is the per-period value; the result
    reports both the fitted limit and c.  This is sampling evidence only: the sign
    of c is what the compact quotient sees.
    """
    st = s2s1_structure()
    quad = quad or VolumeQuadrature()
    vol = st.volume_density()
    values = []
    for n in periods:
        cutoff = step(LOG2_RHO) * step(float(n + 2) - LOG2_RHO)
        tilde = cutoff * phi
        density = tilde * paneitz(st, tilde) * vol
        total = sum(quad.integrate(density, 2.0**j, 2.0 ** (j + 1)) for j in range(n + 2))
        values.append(float(total.real) / n)
        logger.debug("S2xS1 sampling: n=%d value %.6e", n, values[-1])
    limit, err = extrapolate_inverse_power(periods, values, 1.0, 1)
    per_period, norm2 = s2s1_paneitz_period(phi, quad)
    return SamplingResult(tuple(periods), values, limit, err, per_period, norm2)


def random_periodic_field(rng: np.random.Generator, modes: int = 2) -> ScalarField:
    """Random real function of (log2 rho, z/sqrt(rho^2)) invariant under the dyadic dilation."""
    s = 2.0 * math.pi * LOG2_RHO
    out = ScalarField.constant(float(rng.normal()))
    for k in range(1, modes + 1):
        a, b = rng.normal(size=2) / k
        out = out + float(a) * cos(k * s) + float(b) * sin(k * s)
    c = float(rng.normal())
    out = out + c * (Z * Z).real * rho_power(-2.0) * cos(s)
    return out


# CR normal coordinates -------------------------------------------------------------------------------

# weight-4 monomials z^a zbar^b t^c
NORMAL4_MONOMIALS: tuple[tuple[int, int, int], ...] = (
    (4, 0, 0),
    (3, 1, 0),
    (2, 2, 0),
    (1, 3, 0),
    (0, 4, 0),
    (2, 0, 1),
    (1, 1, 1),
    (0, 2, 1),
    (0, 0, 2),
)

POINT_QUANTITIES = ("A11", "R", "R,1", "Delta_b R", "R,0", "A11,0", "A11,1b1b", "A11,11", "R,11", "Omega11")


@dataclass
class NormalBundle:
    """Values at the centre: the Cartan tensor and optionally the three quantities it fixes."""

    omega: complex = 0.0
    A11_0: complex | None = None
    A11_1b1b: complex | None = None
    R_11: complex | None = None

    def targets(self) -> dict[str, complex]:
        om = complex(self.omega)
        a0 = -0.8 * om if self.A11_0 is None else complex(self.A11_0)
        a1b1b = 12j / 35.0 * om if self.A11_1b1b is None else complex(self.A11_1b1b)
        r11 = -6.0 / 35.0 * om if self.R_11 is None else complex(self.R_11)
        system = (
            3j * a0 + 8.0 * a1b1b + 2j * r11,
            -3.0 * a0 + 6j * a1b1b + 2.0 * r11,
            -6.0 * a0 - 4j * a1b1b + r11 - 6.0 * om,
        )
        worst = max(abs(v) for v in system)
        if worst > 1e-10 * max(1.0, abs(om)):
            raise InconsistentBundleError(
                f"normal-coordinate relations violated by the bundle (residual {worst:.3e})"
            )
        return {"Delta_b R": 0.0, "R,0": 0.0, "A11,11": 0.0, "A11,0": a0, "A11,1b1b": a1b1b, "R,11": r11}


@dataclass
class NormalModel:
    coframe: Coframe
    structure: PHStructure
    coefficients: np.ndarray
    at_centre: dict[str, complex] = field(default_factory=dict)
    orders: dict[str, float] = field(default_factory=dict)


def _monomial(a: int, b: int, c: int) -> ScalarField:
    out = ONE
    for base, e in ((Z, a), (ZBAR, b), (T, c)):
        for _ in range(e):
            out = out * base
    return out


def normal4_coframe(coefficients) -> Coframe:
    """theta = theta_0, theta^1 = sqrt2 (dz + mu dzbar)/sqrt(1 - |mu|^2) with mu of weight 4."""
    mu = ScalarField.constant(0.0)
    for c, powers in zip(coefficients, NORMAL4_MONOMIALS):
        if c != 0:
            mu = mu + complex(c) * _monomial(*powers)
    norm = SQRT2 * sqrt(1.0 - (mu * mu.conj()).real).reciprocal()
    return Coframe(FLAT_THETA, OneForm(norm, mu * norm, 0.0), "normal4")


def _point_fields(st: PHStructure) -> list[ScalarField]:
    r = st.R
    return [
        st.A11,
        r,
        cov_deriv(st, r, "1"),
        sublaplacian(st, r),
        cov_deriv(st, r, "0"),
        cov_deriv(st, st.A11, "0", k=2),
        cov_deriv(st, st.A11, "1b1b", k=2),
        cov_deriv(st, st.A11, "11", k=2),
        cov_deriv(st, r, "11"),
        cartan_tensor(st),
    ]


def centre_values(st: PHStructure, centre: HPoint = ORIGIN) -> dict[str, complex]:
    values = evaluate(_point_fields(st), centre)
    return {n: complex(v[0]) for n, v in zip(POINT_QUANTITIES, values)}


@lru_cache(maxsize=None)
def _centre_matrix() -> np.ndarray:
    """Complex response of the centre quantities to each real coefficient direction.

    Products of the weight-4 coefficients have weight 8 and cannot reach the
    weight-0 quantities at the centre, so the response is exactly linear.
    """
    columns = []
    size = len(NORMAL4_MONOMIALS)
    for k in range(2 * size):
        coeffs = np.zeros(size, dtype=complex)
        coeffs[k % size] = 1.0 if k < size else 1j
        st = from_coframe(normal4_coframe(coeffs), "normal4-basis")
        vals = centre_values(st)
        columns.append([vals[n] for n in POINT_QUANTITIES])
    return np.array(columns, dtype=complex).T


def _decay_orders(cf: Coframe, st: PHStructure, radii=(0.025, 0.05, 0.1)) -> dict[str, float]:
    th = np.linspace(0.3, math.pi - 0.3, 5)
    ph = np.linspace(0.0, 2.0 * math.pi, 7, endpoint=False)
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    omega = st.omega_form()
    # omega in the basis (dz, dzbar, theta_0)
    om_dz = omega.az + 1j * ZBAR * omega.at
    om_dzb = omega.azbar - 1j * Z * omega.at
    zv = st.Z1
    comps = {
        "theta-theta0[dz]": cf.theta.az - FLAT_THETA.az,
        "theta-theta0[dzbar]": cf.theta.azbar - FLAT_THETA.azbar,
        "theta-theta0[dt]": cf.theta.at - FLAT_THETA.at,
        "theta1[dz]": cf.theta1.az - SQRT2,
        "theta1[dzbar]": cf.theta1.azbar,
        "theta1[theta0]": cf.theta1.at,
        "omega[dz]": om_dz,
        "omega[dzbar]": om_dzb,
        "omega[theta0]": omega.at,
        "Z1[Z1]": SQRT2 * zv.vz - 1.0,
        "Z1[Z1bar]": SQRT2 * zv.vzbar,
        "Z1[T]": zv.vt - 1j * ZBAR * zv.vz + 1j * Z * zv.vzbar,
    }
    names = list(comps)
    sizes = {n: [] for n in names}
    for r in radii:
        pts = polar_points(r, TH, PH)
        for n, v in zip(names, evaluate([comps[n] for n in names], pts)):
            sizes[n].append(float(np.max(np.abs(v))))
    out = {}
    for n in names:
        vals = sizes[n]
        out[n] = math.inf if max(vals) < 1e-300 else fit_decay_slope(radii, vals)
    return out


def normal_coords_model(bundle: NormalBundle | None = None, with_orders: bool = True) -> NormalModel:
    """Structure in CR normal coordinates at the origin realising the bundle's centre values."""
    bundle = bundle or NormalBundle()
    targets = bundle.targets()
    matrix = _centre_matrix()
    rows = [POINT_QUANTITIES.index(n) for n in targets]
    sub = matrix[rows]
    rhs = np.array([targets[n] for n in targets], dtype=complex)
    real_matrix = np.vstack([sub.real, sub.imag])
    real_rhs = np.concatenate([rhs.real, rhs.imag])
    solution, *_ = linalg.lstsq(real_matrix, real_rhs)
    residual = float(np.max(np.abs(real_matrix @ solution - real_rhs)))
    if residual > 1e-10 * max(1.0, float(np.max(np.abs(real_rhs)))):
        raise InconsistentBundleError(f"no weight-4 deformation realises the bundle (residual {residual:.3e})")
    size = len(NORMAL4_MONOMIALS)
    coefficients = solution[:size] + 1j * solution[size:]
    cf = normal4_coframe(coefficients)
    st = from_coframe(cf, "normal4")
    model = NormalModel(cf, st, coefficients, centre_values(st))
    if with_orders:
        model.orders = _decay_orders(cf, st)
    logger.info("normal coordinates model: Omega11(q) = %s", model.at_centre["Omega11"])
    return model


def normal_xx_yy(st: PHStructure, centre: HPoint = ORIGIN) -> tuple[float, float]:
    """(R_xx, R_yy) at the centre."""
    jet = st.R(centre, order=2)
    return float(jet.derivative((2, 0, 0))[0].real), float(jet.derivative((0, 2, 0))[0].real)


# registry ---------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class Example:
    name: str
    build: Callable[[], PHStructure]
    rho_range: tuple[float, float]
    description: str

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return random_points(rng, n, *self.rho_range)


EXAMPLES: dict[str, Example] = {
    "flat": Example("flat", flat_structure, (0.2, 5.0), "the Heisenberg group"),
    "af": Example("af", lambda: af_structure(AFModel(A=1.0)), (1.0, 20.0), "asymptotically flat model, A = 1"),
    "s2s1": Example("s2s1", s2s1_structure, (0.2, 5.0), "rho^-2 times the flat form"),
    "sphere": Example("sphere", sphere_structure, (0.1, 10.0), "CR sphere in the Cayley chart"),
    "normal4": Example(
        "normal4",
        lambda: normal_coords_model(NormalBundle(omega=1.0), with_orders=False).structure,
        (0.05, 0.5),
        "normal coordinates with Omega11(q) = 1",
    ),
}


def get_example(name: str) -> Example:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise ValueError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}") from None
