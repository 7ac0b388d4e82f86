"""Quadrature on Heisenberg spheres {rho = Lambda} and over regions of the Heisenberg group.

Heisenberg polar coordinates:  z = rho sqrt(sin th) e^{i phi},  t = rho^2 cos th,
with th in (0, pi), phi in [0, 2 pi).  Then dx dy dt = rho^3 d rho d th d phi.
Angles use the trapezoid rule in phi and Gauss-Legendre in th; the radial
direction is integrated in log(rho) with composite Gauss-Legendre panels.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy.special import roots_legendre

from .config import settings
from .fields import Z, ZBAR, ScalarField, TwoForm, evaluate
from .heisenberg_core import ABSZ2
from .utils import QuadratureError, geometric_tail

logger = logging.getLogger(__name__)

Integrand = Union[ScalarField, Callable[[np.ndarray], np.ndarray]]


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(n)
    return nodes, weights


def gl_interval(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gl(a: float, b: float, n: int, panel: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre with n nodes on each of ceil((b - a)/panel) equal panels."""
    if b <= a:
        return np.empty(0), np.empty(0)
    count = max(1, int(math.ceil((b - a) / panel - 1e-12)))
    edges = np.linspace(a, b, count + 1)
    xs, ws = zip(*(gl_interval(lo, hi, n) for lo, hi in zip(edges[:-1], edges[1:])))
    return np.concatenate(xs), np.concatenate(ws)


def trapezoid_angles(n: int) -> tuple[np.ndarray, float]:
    return 2.0 * np.pi * np.arange(n) / n, 2.0 * np.pi / n


def polar_points(rho, theta, phi) -> np.ndarray:
    """Points of the Heisenberg group from broadcastable (rho, th, phi)."""
    rho, theta, phi = np.broadcast_arrays(rho, theta, phi)
    r = rho * np.sqrt(np.sin(theta))
    return np.stack([r * np.cos(phi), r * np.sin(phi), rho * rho * np.cos(theta)], axis=-1).reshape(-1, 3)


def _values(fn: Integrand, pts: np.ndarray) -> np.ndarray:
    if isinstance(fn, ScalarField):
        return fn.values(pts)
    return np.asarray(fn(pts))


# surface integrals ------------------------------------------------------------------------


@dataclass
class SurfaceChart:
    """The sphere {rho = Lambda} with a (phi, th) product grid."""

    radius: float
    n_phi: int = settings.SURFACE_N_PHI
    n_theta: int = settings.SURFACE_N_THETA

    def __post_init__(self):
        if not self.radius > 0:
            raise QuadratureError(f"surface radius must be positive, got {self.radius}")

    def grid(self):
        th, wth = gauss_legendre(self.n_theta)
        th = 0.5 * np.pi * (th + 1.0)
        wth = 0.5 * np.pi * wth
        phi, wphi = trapezoid_angles(self.n_phi)
        TH, PHI = np.meshgrid(th, phi, indexing="ij")
        weights = np.repeat(wth, self.n_phi) * wphi
        pts = polar_points(self.radius, TH, PHI)
        return pts, TH.ravel(), weights

    def tangents(self, pts: np.ndarray, th: np.ndarray):
        """(d/dth, d/dphi) as (vz, vzbar, vt) triples."""
        z = pts[:, 0] + 1j * pts[:, 1]
        lam2 = self.radius**2
        u_z = 0.5 * z / np.tan(th)
        u = (u_z, np.conj(u_z), -lam2 * np.sin(th))
        v = (1j * z, -1j * np.conj(z), np.zeros_like(th))
        return u, v

    def integrate(self, form: TwoForm) -> complex:
        """Integral of a 2-form over the sphere, oriented so that the integral of dphi ^ dt is 4 pi Lambda^2."""
        pts, th, weights = self.grid()
        czzb, czt, czbt = evaluate(list(form.components), pts)
        (uz, uzb, ut), (vz, vzb, vt) = self.tangents(pts, th)
        density = czzb * (uz * vzb - uzb * vz) + czt * (uz * vt - ut * vz) + czbt * (uzb * vt - ut * vzb)
        return complex(np.sum(density * weights))

    def integrate_density(self, fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]) -> complex:
        """Integral of fn(pts, th, phi) dth dphi over the chart."""
        pts, th, weights = self.grid()
        phi = np.tile(trapezoid_angles(self.n_phi)[0], self.n_theta)
        return complex(np.sum(fn(pts, th, phi) * weights))


def surface_integral(form: TwoForm, radius: float, n_phi: int | None = None, n_theta: int | None = None) -> complex:
    chart = SurfaceChart(radius, n_phi or settings.SURFACE_N_PHI, n_theta or settings.SURFACE_N_THETA)
    return chart.integrate(form)


def dphi_dt_form() -> TwoForm:
    """dphi ^ dt away from the t-axis: dphi = (zbar dz - z dzbar) / (2 i |z|^2)."""
    inv = (2j * ABSZ2).reciprocal()
    return TwoForm(0.0, ZBAR * inv, -Z * inv)


# volume integrals ---------------------------------------------------------------------------


@dataclass
class VolumeQuadrature:
    n_phi: int = settings.VOLUME_N_PHI
    n_theta: int = settings.VOLUME_N_THETA
    n_radial: int = settings.VOLUME_N_RADIAL
    panel: float = settings.VOLUME_PANEL

    def angular(self):
        th, wth = gauss_legendre(self.n_theta)
        th = 0.5 * np.pi * (th + 1.0)
        wth = 0.5 * np.pi * wth
        phi, wphi = trapezoid_angles(self.n_phi)
        return th, wth, phi, wphi

    def shell_nodes(self, s: np.ndarray, ws: np.ndarray):
        """Nodes and weights for log-radial nodes s; the weights include rho^4 from d(log rho)."""
        th, wth, phi, wphi = self.angular()
        S, TH, PHI = np.meshgrid(s, th, phi, indexing="ij")
        rho = np.exp(S)
        pts = polar_points(rho, TH, PHI)
        w = (ws[:, None, None] * np.exp(4.0 * s)[:, None, None]) * wth[None, :, None] * wphi
        return pts, np.broadcast_to(w, S.shape).ravel()

    def integrate(self, fn: Integrand, rho_a: float, rho_b: float) -> complex:
        if rho_b <= rho_a:
            return 0j
        s_all, ws_all = composite_gl(math.log(rho_a), math.log(rho_b), self.n_radial, self.panel)
        total = 0j
        per_panel = self.n_radial
        # evaluate panel by panel to bound memory
        for start in range(0, s_all.size, per_panel):
            pts, w = self.shell_nodes(s_all[start : start + per_panel], ws_all[start : start + per_panel])
            total += complex(np.sum(_values(fn, pts) * w))
        return total

    def integrate_to_infinity(self, fn: Integrand, rho_a: float, rho_max: float) -> tuple[complex, float]:
        """Dyadic shells from rho_a to rho_max plus geometric tail extrapolation.

        Returns the extrapolated value and the size of the tail estimate.
        """
        if rho_max <= rho_a:
            raise QuadratureError("rho_max must exceed the inner radius")
        contributions = []
        lo = rho_a
        while lo < rho_max * (1 - 1e-12):
            hi = min(2.0 * lo, rho_max)
            contributions.append(self.integrate(fn, lo, hi))
            lo = hi
        total = sum(contributions)
        tail_re = geometric_tail([c.real for c in contributions])
        tail_im = geometric_tail([c.imag for c in contributions])
        tail = complex(tail_re, tail_im)
        logger.debug("volume integral: %d shells, tail %.3e", len(contributions), abs(tail))
        return total + tail, abs(tail)
