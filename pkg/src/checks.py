"""Verification suites run by the command line and the HTTP front end.

Each suite turns a RunConfig into a list of CheckRecord; every record says
where its reference value comes from (REFERENCE, TRIVIAL or DERIVED).
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .asymptotic_mass import (
    AFModel,
    af_structure,
    blowup_inversion_check,
    boundary_zbar_term,
    boundary_reeb_term,
    box_b_zbar_expansion,
    connection_remainder_decay,
    flux_rho_inv_sq,
    mass_closed_form,
    paneitz_boundary,
    pmass,
    residual_piece,
    torsion_decay,
)
from .config import settings
from .conformal_deform import (
    DeformationField,
    check_Lb_covariance,
    check_paneitz_covariance,
    mass_first_variation,
    mass_variation_general,
    mass_variation_monte_carlo,
    paneitz_qform_variations,
)
from .fields import ONE, X, Y, T, evaluate, exp, jet_order_limit
from .heisenberg_core import RHO4, WBAR, flat_kohn_box, flat_Z1bar, random_points
from .kohn_szego import (
    QuadConfig,
    gtilde_z1bar_closed_form,
    source_f_field,
    spurious_g_hat,
    spurious_g_hat_field,
    spurious_g_tilde,
    spurious_g_tilde_field,
    szego_source_decay,
    szego_values,
)
from .model_examples import (
    EXAMPLES,
    NormalBundle,
    centre_values,
    normal_coords_model,
    normal_xx_yy,
    s2s1_structure,
    s2s1_torsion_closed_form,
    sphere_coordinates,
    sphere_structure,
)
from .ph_calculus import commutation_residuals, flat_structure, max_residuals, structure_residuals
from .quadrature import VolumeQuadrature
from .schemas import CheckRecord, Report, RunConfig
from .utils import GeometryError, relative_error
from .yamabe_quotient import (
    Y0,
    ball_boundary_term,
    bubble_arrays,
    bubble_gradient_sq_arrays,
    bubble_quotient,
    bubble_residual,
    deficit_scan,
    fit_deficit_limit,
)

logger = logging.getLogger(__name__)

PI = math.pi
PI2 = math.pi**2


# record helpers --------------------------------------------------------------------------------------


def compare(name: str, value: float, reference: float, tol: float, provenance: str, note: str = "") -> CheckRecord:
    """Relative comparison, absolute when the reference is 0."""
    ok = bool(np.isfinite(value)) and relative_error(value, reference) <= tol
    return CheckRecord(name=name, value=float(value), reference=float(reference), provenance=provenance, tolerance=tol, passed=ok, note=note)


def below(name: str, value: float, limit: float, provenance: str, note: str = "") -> CheckRecord:
    ok = bool(np.isfinite(value)) and value < limit
    return CheckRecord(name=name, value=float(value), reference=float(limit), provenance=provenance, passed=ok, note=note)


def within(name: str, value: float, lo: float, hi: float, provenance: str, note: str = "") -> CheckRecord:
    ok = bool(np.isfinite(value)) and lo <= value <= hi
    return CheckRecord(name=name, value=float(value), provenance=provenance, passed=ok, note=note or f"expected in [{lo:g}, {hi:g}]")


def info(name: str, value: float, provenance: str, reference: float | None = None, note: str = "") -> CheckRecord:
    return CheckRecord(name=name, value=float(value), reference=reference, provenance=provenance, passed=True, note=note)


@dataclass
class SuiteResult:
    checks: list[CheckRecord] = field(default_factory=list)
    rows: list[dict[str, float]] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)

    def extend(self, other: "SuiteResult") -> None:
        self.checks.extend(other.checks)
        self.rows.extend(other.rows)
        self.timing.update(other.timing)


def _tol(cfg: RunConfig, default: float) -> float:
    return cfg.tol if cfg.tol is not None else default


def _volume(cfg: RunConfig) -> VolumeQuadrature:
    q = cfg.quadrature
    return VolumeQuadrature(q.volume_n_phi, q.volume_n_theta, q.volume_n_radial, settings.VOLUME_PANEL)


def _grid(cfg: RunConfig) -> tuple[int, int]:
    return cfg.quadrature.surface_n_phi, cfg.quadrature.surface_n_theta


# suites -----------------------------------------------------------------------------------------------


def mass_suite(cfg: RunConfig) -> SuiteResult:
    st = af_structure(AFModel(A=cfg.A))
    estimate = pmass(st, cfg.schedule, _grid(cfg))
    out = SuiteResult()
    out.checks.append(
        compare("pmass", estimate.mass, mass_closed_form(cfg.A), _tol(cfg, 1e-3), "REFERENCE", f"extrapolation error {estimate.error:.2e}")
    )
    if cfg.A != 0:
        rng = np.random.default_rng(cfg.seed)
        slope = torsion_decay(AFModel.noisy(cfg.A, rng))
        out.checks.append(within("torsion decay slope", slope, -4.3, -3.7, "REFERENCE"))
        out.checks.append(below("connection remainder slope", connection_remainder_decay(AFModel(cfg.A)), -4.5, "DERIVED"))
        blowup = blowup_inversion_check(cfg.A)
        theta_limit = 10.0 * blowup.predicted_theta_error + 1e-10
        out.checks.append(below("blow-up theta mismatch", blowup.theta_error, theta_limit, "DERIVED"))
        out.checks.append(below("blow-up theta1 mismatch", blowup.theta1_error, theta_limit, "DERIVED"))
        out.checks.append(
            below(
                "blow-up connection mismatch",
                blowup.omega_error,
                10.0 * blowup.predicted_omega_error + 1e-10,
                "DERIVED",
                "pulled-back omega - i dphi against the closed form, dz* part",
            )
        )
    return out


def flux_suite(cfg: RunConfig) -> SuiteResult:
    one = flux_rho_inv_sq(1.0)
    two = flux_rho_inv_sq(2.0)
    return SuiteResult(
        [
            compare("flux of rho^-2", one, -8.0 * PI, _tol(cfg, 1e-6), "REFERENCE"),
            compare("flux radius independence", two, one, _tol(cfg, 1e-8), "TRIVIAL"),
        ]
    )


def identities_suite(cfg: RunConfig) -> SuiteResult:
    A = cfg.A
    m = mass_closed_form(A)
    zbar_term, reeb_term = boundary_zbar_term(A), boundary_reeb_term(A)
    pan = paneitz_boundary(A)
    checks = [
        compare("zbar boundary term", zbar_term, 28.0 * PI2 * A, _tol(cfg, 5e-3), "REFERENCE"),
        compare("Reeb boundary term", reeb_term, -20.0 * PI2 * A, _tol(cfg, 5e-3), "REFERENCE"),
        compare("zbar + Reeb boundary terms", zbar_term + reeb_term, m / 6.0, _tol(cfg, 1e-2), "REFERENCE"),
        compare("residual piece", residual_piece(A), 4.0 * PI2 * A, _tol(cfg, 1e-8), "DERIVED"),
        compare("Paneitz boundary term", pan, -64.0 * PI2 * A, _tol(cfg, 5e-3), "REFERENCE"),
    ]
    if A != 0:
        checks.append(compare("Paneitz boundary / mass", pan / m, -4.0 / 3.0, _tol(cfg, 1e-2), "REFERENCE"))
        box = box_b_zbar_expansion(AFModel.noisy(A, np.random.default_rng(cfg.seed)))
        checks.append(compare("Box_b zbar leading coefficient", box.leading, 4.0 * PI * A, _tol(cfg, 1e-2), "REFERENCE"))
        checks.append(below("Box_b zbar remainder slope", box.remainder_slope, -3.7 + 1e-12, "REFERENCE"))
    return SuiteResult(checks)


def kohn_suite(cfg: RunConfig) -> SuiteResult:
    A = cfg.A if cfg.A != 0 else 1.0
    tol = _tol(cfg, settings.RESIDUAL_TOL)
    pts = random_points(np.random.default_rng(cfg.seed), 200, 0.3, 5.0)
    f = source_f_field(A)
    g_tilde, g_hat = spurious_g_tilde_field(A), spurious_g_hat_field(A)
    scale = float(np.max(np.abs(evaluate([f], pts)[0])))
    res = max_residuals(
        {
            "Box g~ + f": flat_kohn_box(g_tilde) + f,
            "Box g^ + f": flat_kohn_box(g_hat) + f,
            "g~,1bar - closed form": flat_Z1bar(g_tilde) - gtilde_z1bar_closed_form(A),
        },
        pts,
    )
    checks = [below(name, value / scale, tol, "REFERENCE") for name, value in res.items()]
    checks.append(compare("g~(1, 0)", spurious_g_tilde(A, (1.0, 0.0, 0.0)).real, -4.0 * PI * A, 1e-12, "DERIVED"))
    z = complex(0.7, -0.4)
    jump = spurious_g_hat(A, (z.real, z.imag, 1e-9)) - spurious_g_hat(A, (z.real, z.imag, -1e-9))
    checks.append(compare("g^ jump across t = 0", abs(jump - 8j * PI * A / z), 0.0, 1e-6, "DERIVED"))

    qc = QuadConfig()
    szego = szego_values((1.0 + WBAR) ** -2, (0.0, 0.0, 0.0), cfg=qc)
    for eps, value in zip(szego.epsilons, szego.values):
        checks.append(compare(f"S_eps h(0), eps = {eps:g}", value.real, (1.0 + eps * eps) ** -2, _tol(cfg, 1e-4), "DERIVED"))
    checks.append(compare("S h(0) for h = (1 + wbar)^-2", szego.limit.real, 1.0, _tol(cfg, 1e-3), "TRIVIAL"))
    decay = szego_source_decay(A)
    checks.append(within("decay slope of S(chi f)", decay.slope, -math.inf, -3.5, "REFERENCE", "at most -3.5"))
    return SuiteResult(checks)


def bubble_suite(cfg: RunConfig) -> SuiteResult:
    tol = _tol(cfg, settings.RESIDUAL_TOL)
    rng = np.random.default_rng(cfg.seed)
    checks = []
    for lam in (0.5, 1.0, 5.0):
        pts = random_points(rng, 1000, 0.05 / lam, 20.0 / lam)
        worst = float(np.max(np.abs(evaluate([bubble_residual(lam)], pts)[0])))
        checks.append(below(f"bubble PDE residual, lambda = {lam:g}", worst / lam**3, tol, "REFERENCE"))
    q1, q2 = bubble_quotient(1.0), bubble_quotient(2.0)
    checks.append(compare("bubble quotient dilation invariance", q2.value, q1.value, 1e-4, "TRIVIAL"))
    checks.append(compare("Y0", q1.value, Y0, _tol(cfg, 1e-4), "DERIVED", "int omega^4 = pi^2"))
    lam, rho0 = 10.0, 1.0
    quad = VolumeQuadrature(8, 32, 12, 0.5)
    inner = math.exp(-12.0) / lam
    ball = 4.0 * quad.integrate(lambda p: bubble_gradient_sq_arrays(lam, p) - bubble_arrays(lam, p) ** 4, inner, rho0).real
    checks.append(compare("ball energy minus L4 against its boundary term", ball, ball_boundary_term(lam, rho0), 5e-3, "REFERENCE"))
    return SuiteResult(checks)


def quotient_suite(cfg: RunConfig) -> SuiteResult:
    rows = deficit_scan(cfg.Atilde, [(lam, cfg.rho0) for lam in sorted(cfg.grid)])
    checks = []
    for row in rows:
        checks.append(below(f"quotient at lambda = {row['lambda']:g}", row["quotient"], Y0, "REFERENCE"))
    last = rows[-1]
    if cfg.Atilde != 0:
        checks.append(
            compare("scaled deficit at the largest lambda", last["deficit_scaled"], last["predicted"], _tol(cfg, 0.1), "DERIVED",
                    "reference 8 pi / (1 + Atilde rho0^2)")
        )
        checks.append(info("scaled deficit against 8 pi", last["deficit_scaled"], "REFERENCE", 8.0 * PI, "rho0 -> 0 limit"))
    else:
        checks.append(compare("deficit without mass", last["deficit_scaled"], 0.0, _tol(cfg, 1e-3), "TRIVIAL"))
    if len({r["lambda"] for r in rows}) >= 2:
        fit = fit_deficit_limit(rows)
        checks.append(info("fitted limit of -deficit lambda^2 / Atilde", fit.limit, "DERIVED", note=f"+- {fit.error:.2e}"))
        checks.append(info("fitted limit of -deficit lambda^2 rho0^2 / Atilde", fit.limit_rho0, "DERIVED", note=f"+- {fit.error_rho0:.2e}"))
    return SuiteResult(checks, rows)


def variation_suite(cfg: RunConfig) -> SuiteResult:
    quad = _volume(cfg)
    checks = []
    mprime = mass_first_variation(4, quad)
    mc = mass_variation_monte_carlo(4, 400_000, cfg.seed)
    checks.append(below("mass first variation", mprime, 0.0, "REFERENCE"))
    checks.append(compare("mass first variation against -3/2 |E11,1|^2", mprime, -1.5 * mc, _tol(cfg, 1e-2), "REFERENCE", "Monte-Carlo reference"))
    null = mass_variation_general(DeformationField(exp(-RHO4)), quad)
    checks.append(compare("mass variation of a decaying deformation", null, 0.0, 1e-6, "REFERENCE"))

    z1, _ = sphere_coordinates()
    first, second = paneitz_qform_variations(DeformationField(ONE), z1 + z1.conj())
    checks.append(below("sphere second variation", second, 0.0, "REFERENCE"))
    checks.append(compare("sphere first variation", first / abs(second), 0.0, 1e-6, "REFERENCE"))

    rng = np.random.default_rng(cfg.seed)
    pts = random_points(rng, 50, 0.3, 3.0)
    st = flat_structure()
    f = 0.1 * X * T + 0.2 * Y
    phi = X * X + T
    checks.append(below("L_b covariance residual", check_Lb_covariance(st, f, phi, pts), _tol(cfg, 1e-6), "REFERENCE"))
    checks.append(below("Paneitz covariance residual", check_paneitz_covariance(st, f, phi, pts), _tol(cfg, 1e-6), "REFERENCE"))
    return SuiteResult(checks)


def examples_suite(cfg: RunConfig) -> SuiteResult:
    tol = _tol(cfg, settings.RESIDUAL_TOL)
    rng = np.random.default_rng(cfg.seed)
    checks = []
    word_field = X * X * T + Y
    for name, example in EXAMPLES.items():
        st = example.build()
        pts = example.sample(rng, 200)
        res = max_residuals(structure_residuals(st), pts)
        checks.append(below(f"{name}: structure equations", max(res.values()), tol, "REFERENCE"))
        comm = commutation_residuals(st, word_field, 0)
        worst = max(max_residuals({"r1": comm[0], "r2": comm[1], "r3": comm[2]}, pts).values())
        checks.append(below(f"{name}: commutation relations", worst, tol, "REFERENCE"))

    st = s2s1_structure()
    pts = random_points(rng, 100, 0.2, 5.0)
    diff = max_residuals({"A11": st.A11 - s2s1_torsion_closed_form()}, pts)["A11"]
    checks.append(below("S2xS1 torsion against its closed form", diff, 1e-9, "REFERENCE"))

    sphere = sphere_structure()
    pts = random_points(rng, 100, 0.1, 10.0)
    a11, r = evaluate([sphere.A11, sphere.R], pts)
    checks.append(below("sphere torsion", float(np.max(np.abs(a11))), 1e-9, "REFERENCE"))
    checks.append(below("sphere curvature spread", float(np.std(r.real) / np.mean(r.real)), 1e-8, "DERIVED"))
    checks.append(info("sphere curvature", float(np.mean(r.real)), "DERIVED"))

    model = normal_coords_model(NormalBundle(omega=1.0), with_orders=False)
    values = centre_values(model.structure)
    targets = NormalBundle(omega=1.0).targets()
    for key in ("A11,0", "A11,1b1b", "R,11"):
        checks.append(compare(f"normal4 {key}", abs(values[key] - targets[key]), 0.0, 1e-6, "REFERENCE"))
    rxx, ryy = normal_xx_yy(model.structure)
    checks.append(compare("normal4 R_yy + R_xx", rxx + ryy, 0.0, 1e-8, "REFERENCE"))
    return SuiteResult(checks)


SUITES: dict[str, Callable[[RunConfig], SuiteResult]] = {
    "mass": mass_suite,
    "flux": flux_suite,
    "identities": identities_suite,
    "kohn": kohn_suite,
    "bubble": bubble_suite,
    "quotient": quotient_suite,
    "variation": variation_suite,
    "examples": examples_suite,
}


def run_suite(cfg: RunConfig) -> SuiteResult:
    names = list(SUITES) if cfg.command == "suite" else [cfg.command]
    out = SuiteResult()
    for name in names:
        start = time.perf_counter()
        try:
            result = SUITES[name](cfg)
        except GeometryError as e:
            logger.error("suite %s failed: %s", name, e)
            result = SuiteResult([CheckRecord(name=f"{name}: error", value=None, provenance="DERIVED", passed=False, note=str(e))])
        result.timing[name] = time.perf_counter() - start
        logger.info("suite %s: %d checks in %.2f s", name, len(result.checks), result.timing[name])
        out.extend(result)
    return out


def run_report(cfg: RunConfig, with_timing: bool = False) -> Report:
    """Run the configured suite and wrap it in a versioned report."""
    with jet_order_limit(cfg.jet_order):
        result = run_suite(cfg)
    return Report(
        command=cfg.command,
        parameters=cfg.parameters(),
        checks=result.checks,
        rows=result.rows,
        timing=result.timing if with_timing else {},
    )
