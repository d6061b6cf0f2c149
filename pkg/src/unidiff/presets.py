"""Named simulation batches used by the acceptance suite and the demos.

All are at m2 = 1, so the evolution time t equals m2 t.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .ensembles import EnsembleSpec, Family

SEED = 20240

# m2 t in {0.25, 0.5, ..., 5.5} plus the two sides of the critical point
MOMENT_TIMES = tuple(float(x) for x in np.round(np.arange(1, 23) * 0.25, 10))
DENSITY_TIMES = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 5.5)
GAUSSIAN_TIMES = tuple(sorted(set(MOMENT_TIMES) | {3.9, 4.1}))
UNIVERSALITY_TIMES = (1.0, 4.0)

PRESETS = {
    # moments, density histograms, edges
    "gaussian_n200": dict(spec=EnsembleSpec(Family.GAUSSIAN, 200, 1.0, SEED), t=GAUSSIAN_TIMES, samples=200),
    "sign_n200": dict(spec=EnsembleSpec(Family.SIGN, 200, 1.0, SEED), t=UNIVERSALITY_TIMES, samples=200),
    "uniform_n200": dict(spec=EnsembleSpec(Family.UNIFORM, 200, 1.0, SEED), t=UNIVERSALITY_TIMES, samples=200),
    # critical point
    "critical_n128": dict(spec=EnsembleSpec(Family.GAUSSIAN, 128, 1.0, SEED), t=(4.0,), samples=500),
    "critical_n256": dict(spec=EnsembleSpec(Family.GAUSSIAN, 256, 1.0, SEED), t=(4.0,), samples=500),
    "critical_n512": dict(spec=EnsembleSpec(Family.GAUSSIAN, 512, 1.0, SEED), t=(4.0,), samples=120),
}


def cache_dir() -> Path:
    """``$UNIDIFF_CACHE`` or ``.unidiff_cache`` in the working directory."""
    return Path(os.environ.get("UNIDIFF_CACHE", ".unidiff_cache"))


def load(name: str, cache=None, threads=None):
    from .io import cached_simulate

    p = PRESETS[name]
    return cached_simulate(
        cache_dir() if cache is None else cache,
        p["spec"],
        p["t"],
        p["samples"],
        threads=threads,
    )


def is_cached(name: str, cache=None) -> bool:
    """True if ``load(name)`` would read from disk instead of simulating."""
    from .io import batch_key

    p = PRESETS[name]
    key = batch_key(p["spec"], p["t"], p["samples"], 100)
    return (Path(cache_dir() if cache is None else cache) / (key + ".npz")).exists()
