"""Empirical densities, moments, edges and critical spacing from eigenphase samples.

Functions accept either a list of :class:`~unidiff.diffusion.EigenphaseSample`
(all at one time) or a plain ``(n_samples, N)`` array of phases. Uncertainties
are computed across samples, never across eigenvalues of one matrix, because
phases of the same matrix are strongly correlated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analytic.moments import MomentSource, MomentTable

__all__ = [
    "InsufficientStatistics",
    "DensityHistogram",
    "SpacingFit",
    "histogram",
    "bin_average_density",
    "l1_distance",
    "empirical_moments",
    "jackknife",
    "estimate_edge",
    "gaps_at_pi",
    "counting_fit",
    "critical_spacing_fit",
    "gap_exponent",
]

MIN_BINS = 16
MIN_EDGE_SAMPLES = 50
TARGET_WINDOW_COUNT = 100_000
MIN_WINDOW_COUNT = 1_000


class InsufficientStatistics(RuntimeError):
    """Too few eigenvalues for the requested estimate."""


def _phases(samples, n_min: int = 1):
    """``(array (S, N), t or None, m2 or None)`` from samples or an array."""
    if isinstance(samples, np.ndarray):
        arr = np.atleast_2d(np.asarray(samples, dtype=float))
        t = m2 = None
    else:
        samples = list(samples)
        if not samples:
            raise ValueError("no samples")
        ts = {float(s.t) for s in samples}
        if len(ts) > 1:
            raise ValueError(f"samples are at different times: {sorted(ts)}")
        t = ts.pop()
        m2s = {float(getattr(s, "m2", math.nan)) for s in samples}
        m2 = m2s.pop() if len(m2s) == 1 else None
        if m2 is not None and math.isnan(m2):
            m2 = None
        arr = np.stack([np.asarray(s.thetas, dtype=float) for s in samples])
    if arr.shape[0] < n_min:
        raise ValueError(f"need at least {n_min} samples, got {arr.shape[0]}")
    return arr, t, m2


@dataclass
class DensityHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    normalized: np.ndarray
    n_eigenvalues_total: int
    stderr: np.ndarray
    t: Optional[float] = None

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def bin_widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    def normalization(self) -> float:
        return float(np.sum(self.normalized * self.bin_widths))


def _bin_index(arr: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # right-closed bins (a, b], so theta = pi lands in the last bin and -pi
    # (which eigenphases never take) would wrap there too
    idx = np.searchsorted(edges, arr, side="left") - 1
    n_bins = len(edges) - 1
    return np.where(idx < 0, n_bins - 1, idx)


def histogram(samples, n_bins: int = 64) -> DensityHistogram:
    """Normalized density estimate on equal bins over (-pi, pi].

    ``stderr`` is the standard error of each bin's density across samples.
    """
    if int(n_bins) != n_bins or n_bins < MIN_BINS:
        raise ValueError(f"n_bins must be an integer >= {MIN_BINS}")
    arr, t, _ = _phases(samples)
    n_bins = int(n_bins)
    edges = np.linspace(-np.pi, np.pi, n_bins + 1)
    width = 2 * np.pi / n_bins
    idx = _bin_index(arr, edges)
    per_sample = np.stack([np.bincount(row, minlength=n_bins) for row in idx])
    counts = per_sample.sum(axis=0)
    total = int(arr.size)
    normalized = counts / (total * width)
    S, N = arr.shape
    if S > 1:
        stderr = per_sample.std(axis=0, ddof=1) / (N * width * math.sqrt(S))
    else:
        stderr = np.full(n_bins, np.nan)
    return DensityHistogram(edges, counts, normalized, total, stderr, t)


def bin_average_density(t: float, m2: float, bin_edges, oversample: int = 32) -> np.ndarray:
    """Analytic density averaged over each bin (midpoint rule on sub-bins)."""
    from .analytic.resolvent import density

    edges = np.asarray(bin_edges, dtype=float)
    n_bins = len(edges) - 1
    u = (np.arange(oversample) + 0.5) / oversample
    grid = (edges[:-1, None] + np.diff(edges)[:, None] * u[None, :]).ravel()
    if m2 * t == 0:
        raise ValueError("the density at t = 0 is a point mass; use the histogram directly")
    rho = density(t, m2, grid).rho_reported()
    return rho.reshape(n_bins, oversample).mean(axis=1)


def l1_distance(hist: DensityHistogram, other) -> float:
    """Integral of |rho_hat - rho_ref| over the circle, bin by bin.

    ``other`` is either another histogram on the same bins or an array of
    per-bin reference values (e.g. :func:`bin_average_density`).
    """
    if isinstance(other, DensityHistogram):
        if not np.allclose(other.bin_edges, hist.bin_edges):
            raise ValueError("histograms have different bins")
        ref = other.normalized
    else:
        ref = np.asarray(other, dtype=float)
        if ref.shape != hist.normalized.shape:
            raise ValueError("reference has the wrong number of bins")
    return float(np.sum(np.abs(hist.normalized - ref) * hist.bin_widths))


def jackknife(values: np.ndarray):
    """Leave-one-out mean and standard error along axis 0."""
    x = np.asarray(values)
    S = x.shape[0]
    if S < 2:
        raise ValueError("jackknife needs at least two samples")
    mean = x.mean(axis=0)
    loo = (S * mean - x) / (S - 1)
    dev = loo - loo.mean(axis=0)
    se = np.sqrt((S - 1) / S * np.sum(np.abs(dev) ** 2, axis=0))
    return mean, se


def empirical_moments(samples, k_max: int) -> MomentTable:
    """a_k = < (1/N) sum_j exp(i k theta_j) > for k = 1..k_max.

    ``a`` holds the real parts, ``imag`` the imaginary parts (which should be
    consistent with zero), ``stderr`` the jackknife errors of the real parts.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    arr, t, m2 = _phases(samples, n_min=2)
    k = np.arange(1, k_max + 1)
    per_sample = np.exp(1j * k[None, :, None] * arr[:, None, :]).mean(axis=2)
    mean, _ = jackknife(per_sample)
    _, se = jackknife(per_sample.real)
    return MomentTable(
        t=math.nan if t is None else t,
        m2=math.nan if m2 is None else m2,
        k_max=int(k_max),
        a=mean.real.copy(),
        source=MomentSource.MONTE_CARLO,
        stderr=se,
        imag=mean.imag.copy(),
    )


def estimate_edge(samples):
    """``(theta_max, quantile_99)`` of |theta| pooled over all samples.

    Only meaningful while the support is an arc, i.e. m2 t < 4.
    """
    arr, t, m2 = _phases(samples)
    if arr.shape[0] < MIN_EDGE_SAMPLES:
        raise ValueError(f"need at least {MIN_EDGE_SAMPLES} samples, got {arr.shape[0]}")
    if t is not None and m2 is not None and m2 * t >= 4:
        raise ValueError(f"m2 t = {m2 * t:g} >= 4: the support has no edge")
    a = np.abs(arr)
    return float(a.max()), float(np.quantile(a, 0.99))


def gaps_at_pi(samples) -> np.ndarray:
    """Per-sample spacing between the two sorted phases straddling theta = pi."""
    arr, _, _ = _phases(samples)
    arr = np.sort(arr, axis=1)
    return arr[:, 0] + 2 * np.pi - arr[:, -1]


@dataclass
class SpacingFit:
    t: float
    n: int
    window: tuple
    slope: float
    slope_stderr: float
    intercept: float
    n_points: int = 0
    pooled_count: int = 0
    gap_mean: float = math.nan
    gap_stderr: float = math.nan


def _fit_counts(d: np.ndarray, lam: np.ndarray):
    """Slope/intercept of log mean count vs log lam, plus a jackknife slope error.

    ``d`` is (S, N) distances from pi.
    """
    counts = np.stack([np.searchsorted(np.sort(row), lam, side="right") for row in d])
    S = counts.shape[0]
    x = np.log(lam)
    X = np.vstack([x, np.ones_like(x)]).T
    mean = counts.mean(axis=0)
    if np.any(mean <= 0):
        raise InsufficientStatistics("zero counts at the inner end of the window")
    slope, intercept = np.linalg.lstsq(X, np.log(mean), rcond=None)[0]
    if S > 1:
        loo = (counts.sum(axis=0)[None, :] - counts) / (S - 1)
        with np.errstate(divide="ignore"):
            y = np.log(loo)
        ok = np.all(np.isfinite(y), axis=1)
        th = np.linalg.lstsq(X, y[ok].T, rcond=None)[0][0]
        m = len(th)
        se = float(np.sqrt((m - 1) / m * np.sum((th - th.mean()) ** 2)))
    else:
        se = math.nan
    return float(slope), float(intercept), se


def counting_fit(samples, window=(0.02, 0.3), n_points: int = 40) -> SpacingFit:
    """Power-law fit of the mean number of phases within distance L of pi.

    Fits log n(L) = slope log L + intercept on ``n_points`` log-spaced L in
    ``window``. This is the procedure behind :func:`critical_spacing_fit`
    without its criticality and sample-size preconditions, so it can also be
    run on control batches.
    """
    lo, hi = map(float, window)
    if not 0 < lo < hi <= 0.5:
        raise ValueError("window must satisfy 0 < lo < hi <= 0.5")
    if n_points < 20:
        raise ValueError("the fit needs at least 20 points")
    arr, t, _ = _phases(samples)
    d = np.pi - np.abs(arr)
    lam = np.geomspace(lo, hi, n_points)
    pooled = int(np.count_nonzero((d >= lo) & (d <= hi)))
    slope, intercept, se = _fit_counts(d, lam)
    g = gaps_at_pi(arr)
    g_se = float(g.std(ddof=1) / math.sqrt(len(g))) if len(g) > 1 else math.nan
    return SpacingFit(
        t=math.nan if t is None else t,
        n=int(arr.shape[1]),
        window=(lo, hi),
        slope=slope,
        slope_stderr=se,
        intercept=intercept,
        n_points=int(n_points),
        pooled_count=pooled,
        gap_mean=float(g.mean()),
        gap_stderr=g_se,
    )


def critical_spacing_fit(
    samples,
    window=(0.02, 0.3),
    n_points: int = 40,
    min_count: Optional[int] = None,
) -> SpacingFit:
    """Counting exponent near theta = pi for a batch at m2 t = 4.

    The mean number of phases within L of pi should grow like L^(4/3).
    A pooled window count below 1e5 gives a warning; below ``min_count`` the
    fit is refused with an estimate of the samples required.
    """
    min_count = MIN_WINDOW_COUNT if min_count is None else min_count
    arr, t, m2 = _phases(samples)
    if t is not None and m2 is not None and abs(m2 * t - 4) > 0.04:
        raise ValueError(f"m2 t = {m2 * t:g} is not within 1% of the critical value 4")
    lo, hi = map(float, window)
    d = np.pi - np.abs(arr)
    pooled = int(np.count_nonzero((d >= lo) & (d <= hi)))
    per_sample = pooled / arr.shape[0]
    if pooled < min_count:
        need = math.ceil(min_count / per_sample) if per_sample > 0 else float("inf")
        raise InsufficientStatistics(
            f"only {pooled} phases in the window {window}; "
            f"about {need} samples are needed for {min_count}"
        )
    if pooled < TARGET_WINDOW_COUNT:
        warnings.warn(
            f"{pooled} phases in the window {window} (fewer than {TARGET_WINDOW_COUNT}); "
            "consider more samples or a wider window",
            RuntimeWarning,
            stacklevel=2,
        )
    return counting_fit(arr if t is None else samples, window, n_points)


def gap_exponent(fit_small: SpacingFit, fit_large: SpacingFit):
    """``(exponent, stderr)`` of the mean gap at pi, gap ~ N^(-exponent)."""
    n1, n2 = fit_small.n, fit_large.n
    if not n2 > n1:
        raise ValueError("the second fit must be at the larger N")
    r = math.log(n2 / n1)
    expo = math.log(fit_small.gap_mean / fit_large.gap_mean) / r
    rel = math.hypot(
        fit_small.gap_stderr / fit_small.gap_mean, fit_large.gap_stderr / fit_large.gap_mean
    )
    return expo, rel / r
