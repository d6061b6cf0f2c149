"""
Eigenvalue density of a product of random unitaries
===================================================

The product U = prod_k exp(i eps H_k) diffuses on the unitary group. Its
eigenphases start at theta = 0 and spread out. While m2 t < 4 they fill an
arc, and from m2 t = 4 on they cover the whole circle.

Here we solve for the limiting density at a few times and compare it with
a small simulation.
"""

import numpy as np

from unidiff import analytic as an
from unidiff import stats
from unidiff.diffusion import simulate
from unidiff.ensembles import EnsembleSpec

###############################################################################
# The analytic density on the default 2048-point grid. ``edge_points`` gives
# the end of the arc in closed form.

times = [0.5, 1.0, 2.0, 4.0, 5.5]
curves = {t: an.density(t, 1.0) for t in times}
for t in times:
    e = an.edge_points(t, 1.0)
    where = "full circle" if e.full_circle else f"|theta| < {e.theta_edge:.4f}"
    print(f"m2 t = {t:<4g} support {where:<22} rho(0) = {curves[t].rho_values[1023]:.4f}")

###############################################################################
# A quick simulation: N = 100, 40 samples, all times along one trajectory per
# sample. The histogram is compared bin by bin with the analytic density
# averaged over each bin.

batch = simulate(EnsembleSpec("gaussian", 100, 1.0, seed=1), times, 40)
for t in times:
    h = stats.histogram(batch.at(t), 48)
    ref = stats.bin_average_density(t, 1.0, h.bin_edges)
    print(f"m2 t = {t:<4g} L1(histogram, analytic) = {stats.l1_distance(h, ref):.3f}")

###############################################################################
# Plot, if matplotlib is around.

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:  # pragma: no cover
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for t in times:
        sol = curves[t]
        (line,) = ax.plot(sol.theta_grid, sol.rho_values, label=f"m2 t = {t:g}")
        h = stats.histogram(batch.at(t), 48)
        ax.plot(h.bin_centers, h.normalized, ".", color=line.get_color())
    ax.set_xlabel("theta")
    ax.set_ylabel("rho")
    ax.legend()
    fig.savefig("density.png", dpi=120)
    print("wrote density.png")
