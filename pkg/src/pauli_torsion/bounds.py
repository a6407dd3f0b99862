"""Analytic bounds on the Pauli ground energy and on the potential minimum.

Exponentially small energies are evaluated through their logarithms so that
they stay finite for ``h`` far below the double-precision underflow scale.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import DomainSpec, GeometryReport, Grid, geometry_report
from .potential import MagneticField, MinimizerReport

__all__ = [
    "BESSEL_J0_ZERO",
    "APERY",
    "VDBC_CONSTANT",
    "NonPositiveHessian",
    "FluxTooLarge",
    "RhoBoundSkipped",
    "PsiBound",
    "Check",
    "BoundsLedger",
    "ekp_lower",
    "upper_case1",
    "case2_envelope",
    "crossover_h",
    "torsion_bounds",
    "polya_szego_bound",
    "vdbc_bounds",
    "bandle_bound",
    "bandle_admissible_C",
    "assemble_ledger",
    "ledger_to_dict",
    "export_ledger_json",
]

BESSEL_J0_ZERO = 2.404825557695773
APERY = 1.2020569031595942  # zeta(3)
VDBC_CONSTANT = 7 * APERY / 16 * BESSEL_J0_ZERO**2


class NonPositiveHessian(ValueError):
    def __init__(self, index, hessian):
        super().__init__(f"Hessian of minimizer {index} is not positive definite: {np.asarray(hessian).tolist()}")
        self.index = index


class FluxTooLarge(ValueError):
    pass


class RhoBoundSkipped(UserWarning):
    pass


def _finite_exp(log_value):
    return math.exp(log_value) if log_value > -745 else 0.0


def ekp_lower(h: float, lambdaD: float, psi_min: float):
    """``h^2 lambdaD exp(2 psi_min / h)`` as ``(value, log value)``."""
    if not (h > 0 and lambdaD > 0 and psi_min <= 0):
        raise ValueError("need h > 0, lambdaD > 0 and psi_min <= 0")
    log_v = 2 * math.log(h) + math.log(lambdaD) + 2 * psi_min / h
    return _finite_exp(log_v), log_v


def _laplace_prefactor_log(flux, hessians):
    dets = []
    for j, H in enumerate(hessians):
        H = np.asarray(H, dtype=float)
        ev = np.linalg.eigvalsh(0.5 * (H + H.T))
        if not np.all(np.isfinite(ev)) or ev[0] <= 0:
            raise NonPositiveHessian(j, H)
        dets.append(float(np.prod(ev)))
    if not dets:
        raise ValueError("at least one minimizer is required")
    return math.log(4 * flux) - math.log(math.fsum(d**-0.5 for d in dets))


def upper_case1(h: float, flux: float, hessians, psi_min: float):
    """``4 flux / sum_j det(H_j)^{-1/2} * exp(2 psi_min / h)`` as ``(value, log value)``.

    Valid when every minimizer of the potential is non-degenerate.
    """
    if not (h > 0 and flux > 0):
        raise ValueError("need h > 0 and positive flux")
    log_v = _laplace_prefactor_log(flux, hessians) + 2 * psi_min / h
    return _finite_exp(log_v), log_v


def case2_envelope(h: float, psi_min: float):
    """Exponential rate and power of ``h`` in the degenerate-minimum upper envelope."""
    return 2 * psi_min, 0.25


def crossover_h(lambdaD: float, flux: float, hessians) -> float:
    """Largest ``h`` at which the exponential lower bound stays below the Laplace upper bound.

    Both share the factor ``exp(2 psi_min / h)``, so the comparison reduces to
    ``h^2 lambdaD <= prefactor``.
    """
    return math.sqrt(math.exp(_laplace_prefactor_log(flux, hessians)) / lambdaD)


@dataclass(frozen=True)
class PsiBound:
    """Bound on the potential minimum: ``side="lower"`` means ``value <= psi_min``."""

    name: str
    side: str
    value: float
    applicable: bool = True
    reference: str = ""


def torsion_bounds(geom: GeometryReport, B0: float) -> list[PsiBound]:
    """Diameter, width and (convex only) inradius lower bounds on ``psi_min``."""
    if not B0 > 0:
        raise ValueError("B0 must be positive")
    out = [
        PsiBound("delta", "lower", -B0 * geom.diameter**2 / 4, True, "diameter bound"),
        PsiBound("ell", "lower", -B0 * geom.width**2 / 8, True, "minimal-width bound"),
    ]
    if geom.convex:
        out.append(PsiBound("rho", "lower", -B0 * geom.inradius**2 / 2, True, "inradius bound, convex domains"))
    else:
        warnings.warn("inradius bound skipped: domain is not convex", RhoBoundSkipped, stacklevel=2)
    return out


def polya_szego_bound(area: float, B0: float) -> float:
    """Minimum of the potential on the disk of equal area, ``-B0 R^2 / 4``."""
    if not area > 0:
        raise ValueError("area must be positive")
    return -B0 * area / (4 * math.pi)


def vdbc_bounds(lambdaD: float):
    """van den Berg-Carroll bracket ``(1/lambdaD, 7 zeta(3) j^2 / (16 lambdaD))`` on ``|psi_min|`` for unit field."""
    if not lambdaD > 0:
        raise ValueError("lambdaD must be positive")
    return 1.0 / lambdaD, VDBC_CONSTANT / lambdaD


def bandle_bound(C: float, total_flux_M: float) -> float:
    """Bandle upper bound on ``|psi_min|`` for a field with ``lap log B + 2 C B >= 0``."""
    M = total_flux_M
    if not M > 0:
        raise ValueError("total flux must be positive")
    if C < 0:
        raise ValueError("C must be non-negative")
    if C * M >= 4 * math.pi:
        raise FluxTooLarge(f"C M = {C * M:.6g} is not below 4 pi")
    if C == 0:
        return M / (4 * math.pi)
    return -math.log1p(-C * M / (4 * math.pi)) / C


def bandle_admissible_C(grid: Grid, B: MagneticField) -> float:
    """Smallest ``C >= 0`` with ``lap_h log B + 2 C B >= 0`` on nodes with four interior neighbours."""
    if B.kind == "constant":
        return 0.0
    vals = B.on_grid(grid)
    if np.any(vals <= 0):
        raise ValueError("field must be positive")
    nb = grid.neighbors
    deep = np.nonzero(np.all(nb >= 0, axis=1))[0]
    if len(deep) == 0:
        return 0.0
    lb = np.log(vals)
    lap = (lb[nb[deep]].sum(axis=1) - 4 * lb[deep]) / grid.spacing**2
    return max(0.0, float(np.max(-lap / (2 * vals[deep]))))


# --- ledger ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class BoundsLedger:
    h: float
    lower_ekp: float | None
    lower_ekp_log: float | None
    upper_case1: float | None
    upper_case1_log: float | None
    case2_flag: bool
    case2_envelope: tuple[float, float] | None
    psi_min_bounds: list[PsiBound]
    flux: float
    measured_psi_min: float
    h_star: float | None = None
    diamagnetic_note: float | None = None
    eigenvalue: float | None = None
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]


def assemble_ledger(h: float, domain: DomainSpec, B: MagneticField, measured_psi_min: float,
                    minimizer_report: MinimizerReport, lambdaD: float, grid: Grid,
                    geometry: GeometryReport | None = None, eigenvalue: float | None = None,
                    eigen_residual: float = 0.0, erdos: tuple[float, float] | None = None,
                    psi_tolerance: float = 0.0) -> BoundsLedger:
    """Evaluate every applicable bound and the consistency relations between them.

    ``lambdaD`` is the Dirichlet Laplacian ground energy of the domain,
    ``eigenvalue`` an optional computed Pauli ground energy at this ``h`` and
    ``erdos`` an optional pair ``(energy on domain, energy on equal-area disk)``.
    ``psi_tolerance`` absorbs discretization error in ``measured_psi_min``.
    """
    geom = geometry if geometry is not None else geometry_report(domain, grid)
    bvals = B.on_grid(grid)
    positive = bool(np.all(bvals > 0))
    constant = B.kind == "constant"
    bmax = float(bvals.max())
    flux = B.flux(grid, geom.area)
    checks: list[Check] = []

    lower = lower_log = upper = upper_log = hstar = None
    envelope = None
    diamagnetic = None
    degenerate = any(m.degenerate for m in minimizer_report.minimizers)
    if positive:
        lower, lower_log = ekp_lower(h, lambdaD, min(measured_psi_min, 0.0))
        if degenerate:
            envelope = case2_envelope(h, measured_psi_min)
        else:
            hess = [m.hessian for m in minimizer_report.minimizers]
            upper, upper_log = upper_case1(h, flux, hess, measured_psi_min)
            hstar = crossover_h(lambdaD, flux, hess)
            if h <= hstar:
                checks.append(Check("ekp_below_laplace_upper", lower_log <= upper_log,
                                    f"log lower {lower_log:.6g} vs log upper {upper_log:.6g}"))
        if eigenvalue is not None:
            slack = 1 + 2 * eigen_residual / max(abs(eigenvalue), 1e-300)
            checks.append(Check("ekp_below_eigenvalue", lower <= eigenvalue * slack,
                                f"{lower:.6g} <= {eigenvalue:.6g}"))
    else:
        diamagnetic = h**2 * lambdaD

    bounds: list[PsiBound] = []
    if positive:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RhoBoundSkipped)
            bounds += torsion_bounds(geom, bmax)
        bounds.append(PsiBound("polya_szego", "lower", polya_szego_bound(geom.area, bmax), True,
                               "Polya-Szego equal-area disk"))
        lo, hi = vdbc_bounds(lambdaD)
        b0 = bmax if constant else math.nan
        bounds.append(PsiBound("vdbc_lower", "upper", -b0 * lo, constant,
                               "van den Berg-Carroll, lower bound on |psi_min|"))
        bounds.append(PsiBound("vdbc_upper", "lower", -b0 * hi, constant,
                               "van den Berg-Carroll, upper bound on |psi_min|"))
        C = bandle_admissible_C(grid, B)
        M = 2 * math.pi * flux
        try:
            bounds.append(PsiBound("bandle", "lower", -bandle_bound(C, M), True,
                                   f"Bandle isoperimetric bound, C = {C:.6g}"))
        except FluxTooLarge:
            bounds.append(PsiBound("bandle", "lower", math.nan, False, "Bandle: C M >= 4 pi"))

    for b in bounds:
        if not b.applicable:
            continue
        if b.side == "lower":
            ok = b.value <= measured_psi_min + psi_tolerance
        else:
            ok = measured_psi_min - psi_tolerance <= b.value
        checks.append(Check(f"psi_min_{b.name}", ok, f"{b.side} {b.value:.10g} vs psi_min {measured_psi_min:.10g}"))

    if erdos is not None:
        lam_dom, lam_disk = erdos
        checks.append(Check("erdos_equal_area_disk", lam_dom > lam_disk, f"{lam_dom:.10g} > {lam_disk:.10g}"))

    return BoundsLedger(h, lower, lower_log, upper, upper_log, degenerate, envelope, bounds, flux,
                        measured_psi_min, hstar, diamagnetic, eigenvalue, checks)


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, np.floating):
        return _clean(float(x))
    return x


def ledger_to_dict(ledger: BoundsLedger) -> dict:
    d = asdict(ledger)
    d["energy_bounds"] = [
        {"name": "ekp_lower", "value": ledger.lower_ekp, "log_value": ledger.lower_ekp_log,
         "applicable": ledger.lower_ekp is not None, "reference": "exponential lower bound for positive fields"},
        {"name": "laplace_upper", "value": ledger.upper_case1, "log_value": ledger.upper_case1_log,
         "applicable": ledger.upper_case1 is not None,
         "reference": "Laplace-method upper bound, non-degenerate minima"},
        {"name": "degenerate_envelope", "value": ledger.case2_envelope,
         "applicable": ledger.case2_flag, "reference": "rate and h power, no constant"},
        {"name": "diamagnetic", "value": ledger.diamagnetic_note,
         "applicable": ledger.diamagnetic_note is not None, "reference": "diamagnetic inequality"},
    ]
    d["passed"] = ledger.passed
    return _clean(d)


def export_ledger_json(ledger: BoundsLedger, path, meta: dict | None = None) -> Path:
    path = Path(path)
    d = ledger_to_dict(ledger)
    if meta:
        d = {"meta": meta, **d}
    path.write_text(json.dumps(d, indent=2, sort_keys=False) + "\n")
    return path
