"""Convolution calculus of the flat Kohn Laplacian on the Heisenberg group.

Convolution is (h * k)(Z) = int h(W) k(W^-1 Z) dW with dW = theta ^ d theta = 4 dx dy dt.
With eta_eps = |z|^2 + eps^2 - it the two operators read

    K h = h * Phi,        Phi = log(wbar / w) / (8 pi^2 wbar),
    S h = lim_{eps -> 0} (h * eta_eps^-2) / (4 pi^2),

and K Box_b = Id - S.  The eps-limit is never evaluated at eps = 0: it is
extrapolated from a decreasing schedule of eps values.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .config import settings
from .fields import T, T_NONZERO, Z, Z_NONZERO, ZBAR, ScalarField, as_points, log
from .heisenberg_core import (
    ABSZ2,
    SQRT2,
    V,
    W,
    WBAR,
    HPoint,
    flat_Z1bar,
    gauge_rho_arrays,
    group_inv_arrays,
    group_mul_arrays,
    rho_power,
)
from .jets import Jet
from .quadrature import VolumeQuadrature
from .utils import DomainError, InvariantViolation, QuadratureError, fit_decay_slope, smooth_step

logger = logging.getLogger(__name__)

Sampler = Union[ScalarField, Callable[[np.ndarray], np.ndarray]]

EIGHT_PI2 = 8.0 * math.pi**2
FOUR_PI2 = 4.0 * math.pi**2


# kernels ------------------------------------------------------------------------------------


def _split(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r2 = pts[..., 0] ** 2 + pts[..., 1] ** 2
    return r2, pts[..., 2]


def _reject_origin(pts: np.ndarray, what: str) -> None:
    r2, t = _split(pts)
    if np.any((r2 == 0) & (t == 0)):
        raise DomainError(f"{what} is singular at the origin")


def kernel_phi_arrays(pts: np.ndarray) -> np.ndarray:
    """Phi on an (N, 3) array; log(wbar/w) = -2i arg(w) with arg(w) in [-pi/2, pi/2]."""
    pts = np.asarray(pts, dtype=float)
    _reject_origin(pts, "Phi")
    r2, t = _split(pts)
    log_ratio = -2j * np.arctan2(t, r2)
    return log_ratio / (EIGHT_PI2 * (r2 - 1j * t))


def kernel_phi(Z: HPoint) -> complex:
    return complex(kernel_phi_arrays(as_points(Z))[0])


def eta_inv_sq(pts: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """(|z|^2 + eps^2 - it)^-2; at eps = 0 singular at the origin."""
    pts = np.asarray(pts, dtype=float)
    if eps == 0:
        _reject_origin(pts, "eta_0^-2")
    r2, t = _split(pts)
    return (r2 + eps * eps - 1j * t) ** -2


@dataclass(frozen=True)
class ConvKernel:
    """A convolution kernel with an integrable singularity |k| <= C rho^-p (1 + |log rho|)."""

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    singularity: float

    def __post_init__(self):
        if not self.singularity < 4:
            raise InvariantViolation(
                f"kernel {self.name}: singularity order {self.singularity} is not integrable in homogeneous dimension 4"
            )

    def values(self, pts: np.ndarray) -> np.ndarray:
        return self.evaluator(pts)

    def __call__(self, Z) -> complex:
        return complex(self.evaluator(as_points(Z))[0])


PHI_KERNEL = ConvKernel("Phi", kernel_phi_arrays, 2.0)


def szego_kernel(eps: float) -> ConvKernel:
    """eta_eps^-2 / (4 pi^2), bounded by eps^-4 / (4 pi^2)."""
    if not eps > 0:
        raise DomainError("the Szego kernel is only sampled at eps > 0; the limit is extrapolated")
    return ConvKernel(f"eta_{eps:g}^-2", lambda pts: eta_inv_sq(pts, eps) / FOUR_PI2, 0.0)


# quadrature ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadConfig:
    """Near/far split: a ball of radius delta around the kernel centre in its own
    polar coordinates, the rest in polar coordinates about the origin out to P_max
    in dyadic shells with a geometric tail.
    """

    near_fraction: float = settings.NEAR_FRACTION
    near_floor: float = 1.0
    rho_min: float = 1e-4
    far_factor: float = 256.0
    n_phi: int = 48
    n_theta: int = 48
    n_radial: int = 8
    panel: float = 0.5

    def __post_init__(self):
        if not (self.near_fraction > 0 and self.near_floor > 0 and self.rho_min > 0):
            raise InvariantViolation("near-field radius and inner cutoff must be positive")
        if not self.far_factor > self.near_fraction * max(1.0, self.near_floor):
            raise InvariantViolation("far-field truncation P_max must exceed the near-field radius")
        if min(self.n_phi, self.n_theta, self.n_radial) < 2 or not self.panel > 0:
            raise InvariantViolation("quadrature node counts must be at least 2")

    def near_radius(self, rho_z: float) -> float:
        return self.near_fraction * max(rho_z, self.near_floor)

    def far_radius(self, rho_z: float) -> float:
        return self.far_factor * max(rho_z, 1.0)

    def volume(self) -> VolumeQuadrature:
        return VolumeQuadrature(self.n_phi, self.n_theta, self.n_radial, self.panel)


def _sampler(h: Sampler) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(h, ScalarField):
        return h.values
    return lambda pts: np.asarray(h(pts))


def _near_weight(rho: np.ndarray, delta: float) -> np.ndarray:
    """1 on rho <= delta/2, 0 on rho >= delta."""
    return 1.0 - smooth_step(2.0 * rho / delta - 1.0)


def convolve(h: Sampler, k: ConvKernel, Z, cfg: QuadConfig | None = None) -> tuple[complex, float]:
    """(h * k)(Z) and an error estimate taken from the far-field tail."""
    if isinstance(h, ScalarField) and h.const is not None and h.const == 0:
        return 0j, 0.0
    cfg = cfg or QuadConfig()
    centre = as_points(Z)[0]
    rho_z = float(gauge_rho_arrays(centre))
    delta = cfg.near_radius(rho_z)
    quad = cfg.volume()
    hv = _sampler(h)

    def near(v: np.ndarray) -> np.ndarray:
        # W = Z V^-1, so W^-1 Z = V
        w = group_mul_arrays(centre, group_inv_arrays(v))
        return hv(w) * k.values(v) * _near_weight(gauge_rho_arrays(v), delta)

    def far(w: np.ndarray) -> np.ndarray:
        rel = group_mul_arrays(group_inv_arrays(w), centre)
        weight = 1.0 - _near_weight(gauge_rho_arrays(rel), delta)
        out = np.zeros(w.shape[0], dtype=complex)
        keep = weight > 0
        out[keep] = hv(w[keep]) * k.values(rel[keep]) * weight[keep]
        return out

    near_value = quad.integrate(near, cfg.rho_min, delta)
    far_value, tail = quad.integrate_to_infinity(far, cfg.rho_min, cfg.far_radius(rho_z))
    value = 4.0 * (near_value + far_value)
    if not np.isfinite(value):
        raise QuadratureError(f"convolution with {k.name} at {tuple(centre)} did not converge")
    logger.debug("convolve %s at %s: near %.3e far %.3e tail %.1e", k.name, tuple(centre), abs(near_value), abs(far_value), tail)
    return complex(value), 4.0 * tail


def kohn_inverse(g: Sampler, Z, cfg: QuadConfig | None = None) -> complex:
    """(K g)(Z) = (g * Phi)(Z)."""
    return convolve(g, PHI_KERNEL, Z, cfg)[0]


# Szego projection ---------------------------------------------------------------------------


@dataclass
class SzegoEstimate:
    epsilons: tuple[float, ...]
    values: list[complex]
    limit: complex
    error: float


def szego_values(h: Sampler, Z, eps_schedule: Sequence[float] | None = None, cfg: QuadConfig | None = None) -> SzegoEstimate:
    """Sample h * eta_eps^-2 / (4 pi^2) and extrapolate to eps = 0 with a polynomial in eps^2."""
    eps = tuple(sorted((float(e) for e in (eps_schedule or settings.SZEGO_EPSILONS)), reverse=True))
    if len(eps) < 2:
        raise ValueError("the eps-extrapolation needs at least two values")
    if isinstance(h, ScalarField) and h.const is not None and h.const == 0:
        return SzegoEstimate(eps, [0j] * len(eps), 0j, 0.0)
    values = [convolve(h, szego_kernel(e), Z, cfg)[0] for e in eps]
    x = np.array(eps) ** 2
    y = np.array(values, dtype=complex)
    if not np.all(np.isfinite(y)):
        raise QuadratureError("non-finite Szego samples")
    full = np.linalg.solve(np.vander(x, len(x), increasing=True), y)[0]
    reduced = np.linalg.lstsq(np.vander(x[1:], len(x) - 1, increasing=True), y[1:], rcond=None)[0][0]
    error = float(abs(full - reduced))
    if error > 0.1 * abs(full):
        logger.warning("Szego extrapolation at %s is poorly converged: limit %.3e, spread %.1e", Z, abs(full), error)
    return SzegoEstimate(eps, values, complex(full), error)


def szego_apply(h: Sampler, Z, eps_schedule: Sequence[float] | None = None, cfg: QuadConfig | None = None) -> complex:
    return szego_values(h, Z, eps_schedule, cfg).limit


def reproduction_check(h: ScalarField, Z, box_h: ScalarField, cfg: QuadConfig | None = None) -> tuple[complex, complex]:
    """(K Box_b h + S h)(Z) next to h(Z)."""
    lhs = kohn_inverse(box_h, Z, cfg) + szego_apply(h, Z, cfg=cfg)
    return lhs, complex(h.values(as_points(Z))[0])


# the source and the spurious solutions ------------------------------------------------------------


def source_f_field(A: float) -> ScalarField:
    """f = 4 pi A zbar w / rho^6, homogeneous of degree -3."""
    return (4.0 * math.pi * A) * ZBAR * W * rho_power(-6.0)


def source_f_arrays(A: float, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    _reject_origin(pts, "the source")
    r2, t = _split(pts)
    zbar = pts[..., 0] - 1j * pts[..., 1]
    return 4.0 * math.pi * A * zbar * (r2 + 1j * t) / (r2 * r2 + t * t) ** 1.5


def source_f(A: float, Z) -> complex:
    return complex(source_f_arrays(A, as_points(Z))[0])


def cutoff_chi_arrays(pts: np.ndarray, inner: float = 1.0, outer: float = 2.0) -> np.ndarray:
    """0 on rho <= inner, 1 on rho >= outer."""
    return smooth_step((gauge_rho_arrays(np.asarray(pts, dtype=float)) - inner) / (outer - inner))


def chi_source_arrays(A: float, pts: np.ndarray, inner: float = 1.0, outer: float = 2.0) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    chi = cutoff_chi_arrays(pts, inner, outer)
    out = np.zeros(pts.shape[0], dtype=complex)
    live = chi > 0
    out[live] = chi[live] * source_f_arrays(A, pts[live])
    return out


SIGN_T = ScalarField(lambda c: Jet.constant(np.sign(c.t.value.real), c.n, c.order), domain=(T_NONZERO,), note="sgn t")
RHO2 = rho_power(2.0)


def spurious_g_tilde_field(A: float) -> ScalarField:
    """g~ = -4 i pi A rho^2 / (v z), defined for z != 0."""
    return ((-4j * math.pi * A) * RHO2 / (V * Z)).restrict(Z_NONZERO)


def spurious_g_hat_field(A: float) -> ScalarField:
    """g^ = -4 i pi A (rho^2/(v z) -+ 1/z) for t >< 0, written without the 1/z singularity:

    g^ = -4 i pi A zbar (|z|^2 / (rho^2 + |t|) - i sgn(t)) / v.
    """
    bracket = ABSZ2 / (RHO2 + SIGN_T * T) - 1j * SIGN_T
    return ((-4j * math.pi * A) * ZBAR * bracket / V).restrict(T_NONZERO)


def _values_at(field: ScalarField, Z) -> complex:
    return complex(field.values(as_points(Z))[0])


def spurious_g_tilde(A: float, Z) -> complex:
    return _values_at(spurious_g_tilde_field(A), Z)


def spurious_g_hat(A: float, Z) -> complex:
    return _values_at(spurious_g_hat_field(A), Z)


def gtilde_z1bar_closed_form(A: float) -> ScalarField:
    return (-2.0 * SQRT2 * math.pi * A) * rho_power(-2.0)


def gtilde_z1bar(A: float, Z) -> complex:
    """Z1bar g~ by jets where z != 0; on the t-axis the continuous extension -2 sqrt2 pi A / rho^2."""
    pts = as_points(Z)
    if pts[0, 0] == 0 and pts[0, 1] == 0:
        return _values_at(gtilde_z1bar_closed_form(A), pts)
    return _values_at(flat_Z1bar(spurious_g_tilde_field(A)), pts)


# the beta model -------------------------------------------------------------------------------------


def beta_minus1_field(A: float) -> ScalarField:
    """beta_-1 = g~ - (A/z) log(w/wbar): homogeneous of degree -1, Z1bar beta_-1 = -2 sqrt2 pi A/rho^2 - sqrt2 A/w."""
    if A == 0:
        return ScalarField.constant(0.0)
    phase = log(W) - log(WBAR)
    return spurious_g_tilde_field(A) - (A * phase / Z).restrict(Z_NONZERO)


def beta_field(A: float) -> ScalarField:
    return ZBAR + beta_minus1_field(A)


def beta_model(A: float, Z) -> complex:
    return _values_at(beta_field(A), Z)


def beta_1bar_field(A: float) -> ScalarField:
    """beta,1bar on the asymptotically flat end to the order used by the boundary identities:
    (1 - 2 pi A rho^-2) Z1bar(zbar) + Z1bar(beta_-1)."""
    if A == 0:
        return ScalarField.constant(1.0 / SQRT2)
    return (1.0 - 2.0 * math.pi * A * rho_power(-2.0)) / SQRT2 + flat_Z1bar(beta_minus1_field(A))


def beta_1bar_closed_form(A: float) -> ScalarField:
    """1/sqrt2 - 3 sqrt2 pi A / rho^2 - sqrt2 A / w."""
    if A == 0:
        return ScalarField.constant(1.0 / SQRT2)
    return 1.0 / SQRT2 - (3.0 * SQRT2 * math.pi * A) * rho_power(-2.0) - (SQRT2 * A) / W


def beta_z1bar_decomposition(A: float) -> ScalarField:
    """pi A z (F + i t G) / rho^6 + 2 A z wbar^2 / rho^8 with F = 3|z|^2, G = -3."""
    big_f = 3.0 * ABSZ2
    big_g = -3.0
    return (math.pi * A) * Z * (big_f + 1j * T * big_g) * rho_power(-6.0) + (2.0 * A) * Z * WBAR * WBAR * rho_power(-8.0)


def beta_t_decomposition(A: float) -> ScalarField:
    """-sqrt2 pi A i (F~ + i t G~) / rho^6 + i A sqrt2 wbar^2 / rho^8 with F~ = 0, G~ = 3."""
    return (-SQRT2 * math.pi * A * 1j) * (3j * T) * rho_power(-6.0) + (1j * A * SQRT2) * WBAR * WBAR * rho_power(-8.0)


# decay of the projected source ----------------------------------------------------------------------


@dataclass
class DecayFit:
    radii: tuple[float, ...]
    values: list[complex]
    slope: float


def szego_source_decay(
    A: float = 1.0,
    radii: Sequence[float] = (4.0, 8.0, 16.0),
    direction: tuple[float, float] = (1.0, 0.4),
    eps_schedule: Sequence[float] | None = None,
    cfg: QuadConfig | None = None,
) -> DecayFit:
    """|S(chi f)| along the dilation orbit of the polar direction (th, phi)."""
    th, phi = direction
    values = []
    for rho in radii:
        r = rho * math.sqrt(math.sin(th))
        Z = np.array([r * math.cos(phi), r * math.sin(phi), rho * rho * math.cos(th)])
        values.append(szego_apply(lambda pts: chi_source_arrays(A, pts), Z, eps_schedule, cfg))
        logger.info("S(chi f) at rho = %g: %.3e", rho, abs(values[-1]))
    return DecayFit(tuple(radii), values, fit_decay_slope(radii, values))
