"""
The torsion-like potential and its bounds
=========================================

The exponential rate of the ground energy is set by the minimum of ``psi``,
the solution of ``lap psi = B`` vanishing on the boundary.  We solve it on a
few shapes, compare with closed forms, and bracket the minimum with the
classical isoperimetric-type bounds.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from pauli_torsion.bounds import assemble_ledger, polya_szego_bound, torsion_bounds
from pauli_torsion.geometry import DomainSpec, build_grid, geometry_report
from pauli_torsion.potential import MagneticField, analytic_psi, find_minimizers, solve_poisson
from pauli_torsion.spectrum import dirichlet_lambda

unit = MagneticField.constant(1.0)
shapes = {
    "disk": DomainSpec.disk(1.0),
    "ellipse 2x1": DomainSpec.ellipse(2.0, 1.0),
    "triangle": DomainSpec.equilateral_triangle(1.0),
    "square": DomainSpec.rectangle(2.0, 2.0),
}

###############################################################################
# Numerical minima against closed forms
# -------------------------------------

fields = {}
for name, dom in shapes.items():
    grid = build_grid(dom, 1 / 64)
    psi = solve_poisson(grid, unit)
    fields[name] = psi
    exact = analytic_psi(dom, 1.0).psi_min
    print(f"{name:12s} numerical {psi.values.min():+.6f}  closed form {exact:+.6f}")

###############################################################################
# Geometric bounds
# ----------------
# Diameter, width and inradius give lower bounds; the equal-area disk
# (Polya-Szego) gives another, sharp on the disk itself.

for name, dom in shapes.items():
    psi = fields[name]
    geom = geometry_report(dom, psi.grid)
    parts = [f"{b.name} {b.value:+.4f}" for b in torsion_bounds(geom, 1.0)]
    parts.append(f"equal-area disk {polya_szego_bound(geom.area, 1.0):+.4f}")
    print(f"{name:12s} psi_min {psi.values.min():+.4f} | " + ", ".join(parts))

###############################################################################
# The full ledger for the square
# ------------------------------
# Energy bounds need the Dirichlet eigenvalue, the flux and the Hessian at
# the minimum as well.

psi = fields["square"]
rep = find_minimizers(psi, B=unit)
ledger = assemble_ledger(0.1, shapes["square"], unit, rep.psi_min, rep, dirichlet_lambda(psi.grid), psi.grid,
                         psi_tolerance=10 / 64**2)
print(f"square, h = 0.1: {ledger.lower_ekp:.3e} <= lambda <= {ledger.upper_case1:.3e}, all checks pass: {ledger.passed}")

fig, axes = plt.subplots(1, 4, figsize=(12, 3))
for ax, (name, psi) in zip(axes, fields.items()):
    g = psi.grid
    im = ax.pcolormesh(g.xs, g.ys, psi.to_array(fill=0.0), shading="auto", cmap="viridis")
    ax.set_aspect("equal")
    ax.set_title(name)
    fig.colorbar(im, ax=ax, shrink=0.7)
fig.tight_layout()
fig.savefig("torsion_potentials.png", dpi=120)
