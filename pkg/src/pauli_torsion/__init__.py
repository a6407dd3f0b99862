"""Magnetic Pauli ground states and the torsion-like scalar potential.

The lowest eigenvalue of the Dirichlet Pauli operator in a positive field
decays like ``exp(2 psi_min / h)`` where ``psi`` solves ``lap psi = B`` with
zero boundary values.  The subpackages cover the geometry, the potential,
the bounds on ``psi_min`` and on the energy, finite-difference spectra and
the exactly solvable disk.
"""

from .geometry import DomainSpec, Grid, GeometryReport, build_grid, domain_from_dict, geometry_report
from .potential import (
    MagneticField,
    MinimizerReport,
    ScalarField,
    analytic_psi,
    find_minimizers,
    solve_poisson,
    vector_potential,
)
from .bounds import BoundsLedger, assemble_ledger, ekp_lower, upper_case1
from .spectrum import (
    DiscreteOperator,
    assemble_pauli,
    assemble_weighted_form,
    dirichlet_lambda,
    semiclassical_sweep,
    smallest_eigs,
)
from .disk_exact import RadialChannel, channel_eigenvalue, channel_spectrum, disk_ground, temple_bounds

__all__ = [
    "DomainSpec", "Grid", "GeometryReport", "build_grid", "domain_from_dict", "geometry_report",
    "MagneticField", "MinimizerReport", "ScalarField", "analytic_psi", "find_minimizers",
    "solve_poisson", "vector_potential",
    "BoundsLedger", "assemble_ledger", "ekp_lower", "upper_case1",
    "DiscreteOperator", "assemble_pauli", "assemble_weighted_form", "dirichlet_lambda",
    "semiclassical_sweep", "smallest_eigs",
    "RadialChannel", "channel_eigenvalue", "channel_spectrum", "disk_ground", "temple_bounds",
]
__version__ = "0.1.0"
