"""Pseudohermitian calculus: frame, connection, torsion, curvature and the operators built on them.

Conventions (h_{1 1bar} = 1 throughout):

* d theta = i theta^1 ^ theta^1bar  (mod theta)
* d theta^1 = theta^1 ^ omega + A^1_1bar theta ^ theta^1bar,  omega + conj(omega) = 0
* alpha ^ beta (X, Y) = alpha(X) beta(Y) - alpha(Y) beta(X)
* d alpha (X, Y) = X alpha(Y) - Y alpha(X) - alpha([X, Y])

Covariant derivatives of a tensor of weight k (number of 1 indices minus
number of 1bar indices) along an index a read c,a = Z_a c - k omega(Z_a) c,
and index words are applied left to right.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fields import ZERO, OneForm, ScalarField, VectorField, bracket, evaluate, lift
from .heisenberg_core import FLAT_T, FLAT_THETA, FLAT_THETA1, FLAT_Z1
from .config import settings
from .utils import Memo, SingularCoframeError

logger = logging.getLogger(__name__)

_INDEX = re.compile(r"1(?:b|̄)?|0")


@dataclass
class Coframe:
    """Admissible coframe (theta, theta^1); theta^1bar is the conjugate."""

    theta: OneForm
    theta1: OneForm
    note: str = ""

    @property
    def theta1bar(self) -> OneForm:
        return self.theta1.conj()

    def matrix(self) -> list[list[ScalarField]]:
        """Rows theta, theta^1, theta^1bar; columns dz, dzbar, dt."""
        return [list(self.theta.components), list(self.theta1.components), list(self.theta1bar.components)]

    def volume_density(self) -> ScalarField:
        """theta ^ d theta relative to dx dy dt, i.e. 2 det of the coframe matrix."""
        return 2.0 * _det3(self.matrix())


@dataclass
class PHStructure:
    """Frame, connection coefficients, torsion and curvature of a pseudohermitian structure.

    The connection is stored through its values on the frame:
    omega_Z1 = omega(Z1), omega_Z1bar = omega(Z1bar), omega_T = omega(T).
    """

    coframe: Coframe
    T: VectorField
    Z1: VectorField
    omega_Z1: ScalarField
    omega_Z1bar: ScalarField
    omega_T: ScalarField
    A11: ScalarField
    R: ScalarField
    name: str = ""
    _cache: Memo = field(default_factory=lambda: Memo(settings.MEMO_SIZE), repr=False, compare=False)

    @property
    def Z1bar(self) -> VectorField:
        return self._memo(("Z1bar",), lambda: self.Z1.conj())

    @property
    def A1bar1bar(self) -> ScalarField:
        return self._memo(("A1bar1bar",), lambda: self.A11.conj())

    def _memo(self, key, factory):
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache.put(key, factory())
        return hit

    def omega_form(self) -> OneForm:
        cf = self.coframe
        return self._memo(
            ("omega_form",),
            lambda: cf.theta1.scale(self.omega_Z1) + cf.theta1bar.scale(self.omega_Z1bar) + cf.theta.scale(self.omega_T),
        )

    def volume_density(self) -> ScalarField:
        return self._memo(("volume",), self.coframe.volume_density)

    def frame_vector(self, index: str) -> VectorField:
        return {"1": self.Z1, "1b": self.Z1bar, "0": self.T}[index]

    def omega_on(self, index: str) -> ScalarField:
        return {"1": self.omega_Z1, "1b": self.omega_Z1bar, "0": self.omega_T}[index]


# helpers -------------------------------------------------------------------------


def parse_word(word: str | Sequence[str]) -> list[str]:
    """'11b0' / '11̄0' / ['1', '1b', '0'] -> ['1', '1b', '0']."""
    if not isinstance(word, str):
        return [("1b" if w in ("1b", "1̄") else w) for w in word]
    tokens = _INDEX.findall(word)
    if "".join(tokens) != word:
        raise ValueError(f"malformed index word {word!r}")
    return ["1b" if tok != "1" and tok != "0" else tok for tok in tokens]


def _det3(m: list[list[ScalarField]]) -> ScalarField:
    (a, b, c), (d, e, f), (g, h, i) = m
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def _checked_reciprocal(det: ScalarField) -> ScalarField:
    def check(jet):
        if np.any(np.abs(jet.value) < 1e-300) or not np.all(np.isfinite(jet.value)):
            raise SingularCoframeError("coframe matrix is singular: degenerate contact structure")
        return jet.reciprocal()

    return det.map(check, "1/det")


# derivation from a coframe ------------------------------------------------------------


def dual_frame(cf: Coframe) -> tuple[VectorField, VectorField]:
    """(T, Z1) dual to (theta, theta^1, theta^1bar), by the cofactor inverse of the coframe matrix."""
    (a, b, c), (d, e, f), (g, h, i) = cf.matrix()
    inv_det = _checked_reciprocal(_det3(cf.matrix()))
    # columns of the inverse matrix are the dual vectors
    t_vec = VectorField((e * i - f * h) * inv_det, (f * g - d * i) * inv_det, (d * h - e * g) * inv_det)
    z_vec = VectorField((c * h - b * i) * inv_det, (a * i - c * g) * inv_det, (b * g - a * h) * inv_det)
    return t_vec, z_vec


def connection_torsion(cf: Coframe) -> tuple[OneForm, ScalarField]:
    st = from_coframe(cf)
    return st.omega_form(), st.A11


def from_coframe(cf: Coframe, name: str = "") -> PHStructure:
    """Solve the structure equations for an admissible coframe."""
    t_vec, z_vec = dual_frame(cf)
    zbar_vec = z_vec.conj()
    theta1 = cf.theta1
    omega_zbar = -theta1(bracket(z_vec, zbar_vec))
    omega_z = -omega_zbar.conj()
    omega_t = theta1(bracket(t_vec, z_vec))
    a1bar1bar = -theta1(bracket(t_vec, zbar_vec))
    r = z_vec(omega_zbar) - zbar_vec(omega_z) + 1j * omega_t + 2.0 * omega_z * omega_zbar
    logger.debug("derived pseudohermitian structure %s from coframe", name or cf.note)
    return PHStructure(cf, t_vec, z_vec, omega_z, omega_zbar, omega_t, a1bar1bar.conj(), r, name or cf.note)


def flat_structure() -> PHStructure:
    cf = Coframe(FLAT_THETA, FLAT_THETA1, "flat")
    return PHStructure(cf, FLAT_T, FLAT_Z1, ZERO, ZERO, ZERO, ZERO, ZERO, "flat")


def tw_curvature(st: PHStructure) -> ScalarField:
    return st.R


# covariant calculus ----------------------------------------------------------------------


def cov_deriv(st: PHStructure, f: ScalarField, word, k: int = 0) -> ScalarField:
    """Successive covariant derivatives of a weight-k tensor component along an index word."""
    out = lift(f)
    for index in parse_word(word):
        out = _cov_step(st, out, index, k)
        k += {"1": 1, "1b": -1, "0": 0}[index]
    return out


def _cov_step(st: PHStructure, c: ScalarField, index: str, k: int) -> ScalarField:
    key = ("cov", id(c), index, k)
    hit = st._cache.get(key)
    if hit is not None:
        return hit[1]
    out = st.frame_vector(index)(c)
    if k != 0:
        out = out - k * st.omega_on(index) * c
    return st._cache.put(key, (c, out))[1]


def sublaplacian(st: PHStructure, f: ScalarField) -> ScalarField:
    """Delta_b f = f,1 1bar + f,1bar 1."""
    return cov_deriv(st, f, "11b") + cov_deriv(st, f, "1b1")


def kohn_box(st: PHStructure, f: ScalarField) -> ScalarField:
    """Box_b f = -Delta_b f + i T f."""
    return -sublaplacian(st, f) + 1j * st.T(f)


def kohn_box_contracted(st: PHStructure, f: ScalarField) -> ScalarField:
    """Box_b f = -2 f,1bar 1."""
    return -2.0 * cov_deriv(st, f, "1b1")


def conformal_sublap(st: PHStructure, f: ScalarField) -> ScalarField:
    """L_b f = -4 Delta_b f + R f."""
    return -4.0 * sublaplacian(st, f) + st.R * f


def paneitz(st: PHStructure, f: ScalarField) -> ScalarField:
    """P f = 4 (f,1bar 1 1 + i A11 f,1bar),1bar."""
    inner = cov_deriv(st, f, "1b11") + 1j * st.A11 * cov_deriv(st, f, "1b")
    return 4.0 * cov_deriv(st, inner, "1b", k=1)


def paneitz_real_form(st: PHStructure, f: ScalarField) -> ScalarField:
    """P f = Delta_b^2 f + T^2 f + 4 Im (A1bar1bar f,1),1 for real f."""
    lap = sublaplacian(st, f)
    torsion_term = cov_deriv(st, st.A1bar1bar * cov_deriv(st, f, "1"), "1", k=-1)
    return sublaplacian(st, lap) + st.T(st.T(f)) + 4.0 * torsion_term.imag


def paneitz_third_order(st: PHStructure, f: ScalarField) -> ScalarField:
    """P_1 f = f,1bar 1 1 + i A11 f,1bar; vanishes exactly on CR-pluriharmonic functions."""
    return cov_deriv(st, f, "1b11") + 1j * st.A11 * cov_deriv(st, f, "1b")


def commutation_residuals(st: PHStructure, c: ScalarField, k: int) -> tuple[ScalarField, ScalarField, ScalarField]:
    """Residuals of the three commutation relations for a weight-k tensor component c."""
    d = lambda word: cov_deriv(st, c, word, k)  # noqa: E731
    a11 = st.A11
    abar = st.A1bar1bar
    r1 = d("11b") - d("1b1") - 1j * d("0") - k * c * st.R
    r2 = d("01") - d("10") - d("1b") * a11 + k * c * cov_deriv(st, a11, "1b", k=2)
    r3 = d("01b") - d("1b0") - d("1") * abar - k * c * cov_deriv(st, abar, "1", k=-2)
    return r1, r2, r3


def cartan_tensor(st: PHStructure) -> ScalarField:
    """Omega_11 = R,11/6 + (i/2) R A11 - A11,0 - (2/3) i A11,1bar1bar."""
    return (
        cov_deriv(st, st.R, "11") / 6.0
        + 0.5j * st.R * st.A11
        - cov_deriv(st, st.A11, "0", k=2)
        - (2.0j / 3.0) * cov_deriv(st, st.A11, "1b1b", k=2)
    )


# residual suites ------------------------------------------------------------------------------


def structure_residuals(st: PHStructure) -> dict[str, ScalarField]:
    """Duality, normalisation and structure-equation residual fields."""
    cf = st.coframe
    theta, theta1 = cf.theta, cf.theta1
    omega = st.omega_form()
    out = {
        "theta(T)-1": theta(st.T) - 1.0,
        "theta(Z1)": theta(st.Z1),
        "theta1(Z1)-1": theta1(st.Z1) - 1.0,
        "theta1(Z1bar)": theta1(st.Z1bar),
        "theta1(T)": theta1(st.T),
    }
    dtheta = theta.d()
    out["dtheta(Z1,Z1bar)-i"] = dtheta(st.Z1, st.Z1bar) - 1j
    out["dtheta(T,Z1)"] = dtheta(st.T, st.Z1)
    eq = theta1.d() - theta1.wedge(omega) - theta.wedge(cf.theta1bar).scale(st.A1bar1bar)
    for label, comp in zip(("dz^dzbar", "dz^dt", "dzbar^dt"), eq.components):
        out[f"structure[{label}]"] = comp
    out["omega(T)+conj"] = st.omega_T + st.omega_T.conj()
    out["omega(Z1)+conj(omega(Z1bar))"] = st.omega_Z1 + st.omega_Z1bar.conj()
    out["Im R"] = st.R.imag
    return out


def max_residuals(fields: dict[str, ScalarField], points) -> dict[str, float]:
    names = list(fields)
    values = evaluate([fields[n] for n in names], points)
    return {n: float(np.max(np.abs(v))) for n, v in zip(names, values)}

