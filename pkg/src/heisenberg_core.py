"""The Heisenberg group: points, group law, dilations, gauge, flat frame, CR inversion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import (
    RHO_POSITIVE,
    T,
    X,
    Y,
    Z,
    ZBAR,
    OneForm,
    ScalarField,
    VectorField,
    power,
)
from .utils import DomainError

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class HPoint:
    x: float
    y: float
    t: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.t)):
            raise DomainError(f"non-finite Heisenberg point {(self.x, self.y, self.t)}")

    @classmethod
    def from_complex(cls, z: complex, t: float) -> "HPoint":
        return cls(float(z.real), float(z.imag), float(t))

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.t])


ORIGIN = HPoint(0.0, 0.0, 0.0)


# group structure -------------------------------------------------------------


def group_mul(p: HPoint, q: HPoint) -> HPoint:
    """(a, s)(b, u) = (a + b, s + u + 2 Im(a conj(b))).

    With this law the frame Z1 = (d/dz + i zbar d/dt)/sqrt(2) is left invariant
    and W^-1 Z = (z - w, t - s - 2 Im(conj(z) w)).
    """
    a, b = p.z, q.z
    return HPoint.from_complex(a + b, p.t + q.t + 2.0 * (a * b.conjugate()).imag)


def group_inv(p: HPoint) -> HPoint:
    return HPoint(-p.x, -p.y, -p.t)


def group_mul_arrays(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Vectorised group law on (..., 3) arrays."""
    a = p[..., 0] + 1j * p[..., 1]
    b = q[..., 0] + 1j * q[..., 1]
    s = p[..., 2] + q[..., 2] + 2.0 * (a * np.conj(b)).imag
    c = a + b
    return np.stack(np.broadcast_arrays(c.real, c.imag, s), axis=-1)


def group_inv_arrays(p: np.ndarray) -> np.ndarray:
    return -np.asarray(p, dtype=float)


def random_points(rng: np.random.Generator, n: int, rho_min: float, rho_max: float) -> np.ndarray:
    """n points with log-uniform gauge in [rho_min, rho_max], kept off the t-axis."""
    rho = np.exp(rng.uniform(math.log(rho_min), math.log(rho_max), n))
    theta = rng.uniform(0.1, math.pi - 0.1, n)
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    r = rho * np.sqrt(np.sin(theta))
    return np.stack([r * np.cos(phi), r * np.sin(phi), rho * rho * np.cos(theta)], axis=1)


def dilate_arrays(lam: float, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    return pts * np.array([lam, lam, lam * lam])


def dilate(lam: float, p: HPoint) -> HPoint:
    if not lam > 0:
        raise DomainError(f"dilation factor must be positive, got {lam}")
    return HPoint(lam * p.x, lam * p.y, lam * lam * p.t)


def gauge_rho(p: HPoint) -> float:
    return (((p.x * p.x + p.y * p.y) ** 2) + p.t * p.t) ** 0.25


def gauge_rho_arrays(pts: np.ndarray) -> np.ndarray:
    r2 = pts[..., 0] ** 2 + pts[..., 1] ** 2
    return (r2 * r2 + pts[..., 2] ** 2) ** 0.25


# CR inversion ------------------------------------------------------------------


def cr_invert(p: HPoint) -> HPoint:
    """z* = z/v, t* = -t/|v|^2 with v = t + i|z|^2; rho(p*) = 1/rho(p).

    The map is not an involution: applied twice it sends (z, t) to (-z, t).
    """
    if p == ORIGIN or gauge_rho(p) == 0:
        raise DomainError("CR inversion is undefined at the origin")
    v = complex(p.t, abs(p.z) ** 2)
    return HPoint.from_complex(p.z / v, -p.t / abs(v) ** 2)


def cr_invert_inverse(p: HPoint) -> HPoint:
    """Inverse of cr_invert: z = -z*/v*, t = -t*/|v*|^2."""
    if p == ORIGIN or gauge_rho(p) == 0:
        raise DomainError("CR inversion is undefined at the origin")
    v = complex(p.t, abs(p.z) ** 2)
    return HPoint.from_complex(-p.z / v, -p.t / abs(v) ** 2)


# standard scalar fields ------------------------------------------------------------

ABSZ2 = (Z * ZBAR).named("|z|^2")
W = (ABSZ2 + 1j * T).named("w")  # |z|^2 + it
WBAR = (ABSZ2 - 1j * T).named("wbar")
V = (T + 1j * ABSZ2).named("v")  # t + i|z|^2 = i wbar
RHO4 = (ABSZ2 * ABSZ2 + T * T).named("rho^4")


def rho_power(p: float) -> ScalarField:
    """rho**p, valid away from the origin."""
    return power(RHO4, p / 4.0).restrict(RHO_POSITIVE).named(f"rho^{p:g}")


RHO = rho_power(1.0)


# flat frame and coframe -------------------------------------------------------------

FLAT_T = VectorField(0.0, 0.0, 1.0)
FLAT_Z1 = VectorField(1.0 / SQRT2, 0.0, 1j * ZBAR / SQRT2)
FLAT_Z1BAR = FLAT_Z1.conj()

FLAT_THETA = OneForm(-1j * ZBAR, 1j * Z, 1.0)  # dt + i z dzbar - i zbar dz
FLAT_THETA1 = OneForm(SQRT2, 0.0, 0.0)


def flat_Z1(f: ScalarField) -> ScalarField:
    return FLAT_Z1(f)


def flat_Z1bar(f: ScalarField) -> ScalarField:
    return FLAT_Z1BAR(f)


def flat_T(f: ScalarField) -> ScalarField:
    return FLAT_T(f)


def flat_sublaplacian(f: ScalarField) -> ScalarField:
    return flat_Z1(flat_Z1bar(f)) + flat_Z1bar(flat_Z1(f))


def flat_kohn_box(f: ScalarField) -> ScalarField:
    """-2 Z1 Z1bar f, the flat Kohn Laplacian on functions."""
    return -2.0 * flat_Z1(flat_Z1bar(f))


def polynomial_field(coeffs: dict[tuple[int, int, int], complex]) -> ScalarField:
    """sum c_abc x^a y^b t^c."""
    out = ScalarField.constant(0.0)
    for (a, b, c), value in coeffs.items():
        term = ScalarField.constant(value)
        for base, e in ((X, a), (Y, b), (T, c)):
            for _ in range(e):
                term = term * base
        out = out + term
    return out
