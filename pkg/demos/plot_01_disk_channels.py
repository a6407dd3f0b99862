"""
The disk: exact channels and Temple enclosures
==============================================

On the unit disk in a unit field the Pauli operator separates in polar
coordinates.  Each angular momentum ``m`` gives a radial problem whose
eigenvalues are the roots of a Kummer function, so the disk serves as the
reference every numerical method here is checked against.
"""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from pauli_torsion.disk_exact import RadialChannel, asymptotic_eig, channel_eigenvalue, disk_ground

###############################################################################
# Ground energies per channel
# ---------------------------
# The lowest channel is ``m = 0``.  Its energy sits exponentially close to
# zero, roughly ``exp(-1 / 2h)``.

for h in (0.2, 0.1, 0.05):
    lams = [channel_eigenvalue(RadialChannel(m, h)) for m in range(4)]
    print(f"h = {h:5.2f}: " + "  ".join(f"m={m}: {v:.4e}" for m, v in enumerate(lams)))

###############################################################################
# Temple enclosures
# -----------------
# A trial state with a known image under the operator gives an upper bound
# (its Rayleigh quotient) and, with the gap to the next Landau level, a
# lower bound.  The enclosure tightens as ``h`` shrinks.

for h in (0.2, 0.1, 0.05, 0.03):
    rep = disk_ground(h)
    print(f"h = {h:5.2f}: {rep.temple_lower:.6e} <= {rep.ground:.6e} <= {rep.rayleigh_upper:.6e}"
          f"  (relative width {rep.enclosure_width:.2e}, ratio to asymptotics {rep.ratio:.4f})")

###############################################################################
# How fast the asymptotic law sets in
# -----------------------------------
# The ratio of the exact root to the small-h formula approaches one only
# slowly, and not monotonically.

hs = np.geomspace(0.02, 0.5, 40)
fig, ax = plt.subplots(figsize=(6, 4))
for m in range(3):
    ratio = [math.exp(math.log(channel_eigenvalue(RadialChannel(m, h))) - asymptotic_eig(RadialChannel(m, h)))
             for h in hs]
    ax.semilogx(hs, ratio, label=f"m = {m}")
ax.axhline(1.0, color="k", lw=0.5)
ax.set_xlabel("h")
ax.set_ylabel("exact / asymptotic")
ax.legend()
fig.tight_layout()
fig.savefig("disk_channel_ratios.png", dpi=120)
