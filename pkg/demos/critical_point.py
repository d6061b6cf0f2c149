"""
The critical time t_c = 4 / m2
==============================

At m2 t = 4 the two ends of the arc meet at theta = pi. There the density
has a cube-root cusp, rho ~ C |theta - pi|^(1/3), so the number of phases
within L of pi grows like N L^(4/3). The spacing at pi then shrinks like
N^(-3/4) instead of 1/N.
"""

import warnings

import numpy as np

from unidiff import analytic as an
from unidiff import presets, stats
from unidiff.diffusion import simulate
from unidiff.ensembles import EnsembleSpec

t_c = an.critical_time(1.0)

###############################################################################
# The density at pi opens between 3.9 and 4.1.

for x in (3.8, 3.9, 4.0, 4.1, 4.2):
    print(f"m2 t = {x}: rho(pi) = {an.density(x, 1.0, np.array([np.pi])).rho_values[0]:.2e}")

###############################################################################
# Cusp exponent and coefficient from the analytic density.

d = np.geomspace(1e-2, 1e-4, 25)
rho = an.density(t_c, 1.0, np.pi - d).rho_values
slope, icpt = np.polyfit(np.log(d), np.log(rho), 1)
print(f"slope {slope:.5f} (1/3), coefficient {np.exp(icpt):.5f} (closed form {an.CRITICAL_COEFFICIENT:.5f})")

###############################################################################
# Counting exponent and mean gap at pi. The acceptance batch (N = 128, 500
# samples) is used when it is in the cache. Otherwise a small batch is
# simulated and the count floor of the fit is lowered, so expect a noisy
# slope.

if presets.is_cached("critical_n128"):
    phases, floor = presets.load("critical_n128").at(t_c), None
else:
    phases, floor = simulate(EnsembleSpec("gaussian", 96, 1.0, seed=5), (t_c,), 60).at(t_c), 200
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    fit = stats.critical_spacing_fit(phases, window=(0.02, 0.3), min_count=floor)
print(f"N = {fit.n}: {fit.pooled_count} phases in window, counting slope {fit.slope:.3f} +- {fit.slope_stderr:.3f} (4/3)")
print(f"mean gap at pi {fit.gap_mean:.4f} +- {fit.gap_stderr:.4f}")
