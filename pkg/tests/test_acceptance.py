"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records one ``CRITERION k: PASS|FAIL`` line (printed in the pytest
terminal summary) before asserting. Simulation batches come from
``unidiff.presets`` and are cached on disk; run ``scripts/prewarm_cache.py``
first, otherwise the first run simulates them (a few CPU hours in total).

Run directly with ``python3 tests/test_acceptance.py`` to get just the lines.
"""

import itertools
import math
import time
import warnings

import numpy as np
import pytest

from unidiff import analytic as an
from unidiff import presets, stats
from unidiff.checks import run_checks

RESULTS = {}


def report(key, ok, detail):
    """Record the criterion line, then fail the test (without a traceback) if not ok."""
    line = f"CRITERION {key}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[key] = line
    print(line)
    if not ok:
        pytest.fail(line, pytrace=False)


@pytest.fixture(scope="module")
def gaussian():
    return presets.load("gaussian_n200")


# -- 1 ------------------------------------------------------------------------------

# closed forms exactly as published for a_1..a_5
PUBLISHED = {
    1: lambda x: math.exp(-x / 2),
    2: lambda x: math.exp(-x) * (-1 + x),
    3: lambda x: 0.5 * math.exp(-1.5 * x) * (2 - 6 * x + 3 * x**2),
    4: lambda x: -1 / 3 * math.exp(-2 * x) * (-3 + 18 * x - 24 * x**2 + 8 * x**3),
    5: lambda x: math.exp(-2.5 * x) / 24 * (24 - 240 * x + 600 * x**2 - 500 * x**3 + 125 * x**4),
}


def test_criterion_1_moment_closed_forms():
    t0 = time.perf_counter()
    grid = np.linspace(0, 5.5, 20)
    worst = {k: 0.0 for k in PUBLISHED}
    for x in grid:
        a = an.analytic_moments(x, 1.0, 5).a
        for k, f in PUBLISHED.items():
            ref = f(x)
            rel = abs(a[k - 1] - ref) / abs(ref) if ref != 0 else abs(a[k - 1])
            worst[k] = max(worst[k], rel)
    elapsed = time.perf_counter() - t0
    bad = [k for k, v in worst.items() if not v < 1e-10]
    ok = not bad and elapsed < 1.0
    detail = ", ".join(f"a{k} rel {v:.1e}" for k, v in worst.items())
    report(1, ok, f"{detail}; {elapsed:.3f} s" + (f"; mismatch for k = {bad}" if bad else ""))


# -- 2 ------------------------------------------------------------------------------


def test_criterion_2_fig2_moments(gaussian):
    worst_sigma, worst_se, where = 0.0, 0.0, None
    for t in presets.MOMENT_TIMES:
        m = stats.empirical_moments(gaussian.at(t), 4)
        a = an.analytic_moments(t, 1.0, 4).a
        z = np.abs(m.a - a) / m.stderr
        if z.max() > worst_sigma:
            worst_sigma, where = float(z.max()), (t, int(z.argmax()) + 1)
        worst_se = max(worst_se, float(m.stderr[:2].max()))
    ok = worst_sigma <= 4 and worst_se < 0.01
    report(2, ok, f"max |a - a_hat| / stderr = {worst_sigma:.2f} (at m2t, k = {where}), max stderr k<=2 = {worst_se:.4f}")


# -- 3 ------------------------------------------------------------------------------


def test_criterion_3_fig1_density(gaussian):
    dist = {}
    for t in presets.DENSITY_TIMES:
        h = stats.histogram(gaussian.at(t), 64)
        dist[t] = stats.l1_distance(h, stats.bin_average_density(t, 1.0, h.bin_edges))
    worst = max(dist.values())
    ok = worst < 0.05
    report(3, ok, "L1 " + ", ".join(f"{t:g}: {d:.4f}" for t, d in dist.items()))


# -- 4 ------------------------------------------------------------------------------


def test_criterion_4_edges(gaussian):
    theta_e = an.edge_points(2.0, 1.0).theta_edge
    assert theta_e == pytest.approx(math.pi / 2 + 1, abs=1e-12)
    theta_max, q99 = stats.estimate_edge(gaussian.at(2.0))
    near = {}
    for t in (3.9, 4.1):
        d = np.pi - np.abs(gaussian.phases(t))
        near[t] = int(np.count_nonzero(d < 0.05))
    part1 = abs(q99 - theta_e) <= 0.05
    part2 = near[3.9] == 0
    part3 = near[4.1] > 0
    ok = part1 and part2 and part3
    report(
        4,
        ok,
        f"q99 = {q99:.4f} vs edge {theta_e:.4f} (|diff| {abs(q99 - theta_e):.4f}, {'ok' if part1 else 'over 0.05'}); "
        f"counts within 0.05 of pi: {near[3.9]} at 3.9 ({'gap' if part2 else 'no gap'}), "
        f"{near[4.1]} at 4.1 ({'ok' if part3 else 'gap'}); theta_max {theta_max:.4f}",
    )


# -- 5 ------------------------------------------------------------------------------


def test_criterion_5_critical_time():
    taus = np.round(np.arange(3.5, 4.5 + 1e-9, 0.1), 10)
    at_pi = {float(x): float(an.density(x, 1.0, np.array([np.pi])).rho_values[0]) for x in taus}
    closed = [x for x, v in at_pi.items() if v < 1e-8]
    opened = [x for x, v in at_pi.items() if v >= 1e-8]
    ok = max(closed) <= 3.9 + 1e-9 and min(opened) >= 3.9 and min(opened) <= 4.1 + 1e-9
    ok = ok and all(x < min(opened) for x in closed)
    ok = ok and an.critical_time(1.0) > max(closed) and an.critical_time(1.0) <= 4.1
    report(5, ok, "rho(pi): " + ", ".join(f"{x:g}: {v:.1e}" for x, v in at_pi.items()))


# -- 6 ------------------------------------------------------------------------------


def test_criterion_6_critical_exponents():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit256 = stats.critical_spacing_fit(presets.load("critical_n256").at(4.0), (0.02, 0.3))
        fit128 = stats.critical_spacing_fit(presets.load("critical_n128").at(4.0), (0.02, 0.3))
        fit512 = stats.critical_spacing_fit(presets.load("critical_n512").at(4.0), (0.02, 0.3))
    slope_ok = abs(fit256.slope - 4 / 3) <= 0.1

    d = np.geomspace(1e-2, 1e-4, 25)
    rho = an.density(4.0, 1.0, np.pi - d).rho_values
    a_slope, a_icpt = np.polyfit(np.log(d), np.log(rho), 1)
    coef = math.exp(a_icpt)
    a_slope_ok = abs(a_slope - 1 / 3) <= 0.01
    coef_ok = abs(coef / 0.0789 - 1) <= 0.02

    expo, expo_se = stats.gap_exponent(fit128, fit512)
    gap_ok = abs(expo - 0.75) <= 0.1

    ok = slope_ok and a_slope_ok and coef_ok and gap_ok
    report(
        6,
        ok,
        f"counting slope N=256 {fit256.slope:.4f} +- {fit256.slope_stderr:.4f} ({'ok' if slope_ok else 'off'}, "
        f"{fit256.pooled_count} in window); analytic slope {a_slope:.5f} ({'ok' if a_slope_ok else 'off'}); "
        f"coefficient {coef:.5f} vs 0.0789 ({'ok' if coef_ok else f'ratio {coef / 0.0789:.4f}'}); "
        f"gap exponent 128->512 {expo:.3f} +- {expo_se:.3f} ({'ok' if gap_ok else 'off'})",
    )


# -- 7 ------------------------------------------------------------------------------


def test_criterion_7_universality(gaussian):
    batches = {
        "gaussian": gaussian,
        "sign": presets.load("sign_n200"),
        "uniform": presets.load("uniform_n200"),
    }
    worst_l1, worst_z = 0.0, 0.0
    parts = []
    for t in presets.UNIVERSALITY_TIMES:
        hists = {k: stats.histogram(b.at(t), 64) for k, b in batches.items()}
        moms = {k: stats.empirical_moments(b.at(t), 2) for k, b in batches.items()}
        for a, b in itertools.combinations(batches, 2):
            l1 = stats.l1_distance(hists[a], hists[b])
            z = np.abs(moms[a].a - moms[b].a) / np.hypot(moms[a].stderr, moms[b].stderr)
            worst_l1 = max(worst_l1, l1)
            worst_z = max(worst_z, float(z.max()))
            parts.append(f"{t:g} {a[0]}/{b[0]}: L1 {l1:.4f}, {z.max():.2f} sigma")
    ok = worst_l1 < 0.03 and worst_z <= 4
    report(7, ok, f"max L1 {worst_l1:.4f}, max {worst_z:.2f} sigma; " + "; ".join(parts))


# -- 8 ------------------------------------------------------------------------------

# series length needed for the Fourier sum to resolve the square-root edges
FOURIER_KMAX = {1.0: 100_000, 2.0: 200_000, 5.5: 200}


def test_criterion_8_cross_oracles():
    t0 = time.perf_counter()
    grid = an.default_grid(2048)
    diffs = {}
    for tau, kmax in FOURIER_KMAX.items():
        a = an.density(tau, 1.0, grid).rho_values
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            b = an.density_from_moments(tau, 1.0, kmax, grid).rho_values
        diffs[tau] = float(np.max(np.abs(a - b)))
    zs = [r * np.exp(1j * p) for r in np.linspace(0.05, 0.25, 5) for p in np.linspace(0, 2 * np.pi, 10, endpoint=False)]
    s_res = max(an.s_transform_check(z, tau, 1.0) for tau in (0.5, 1.0, 2.0) for z in zs)
    elapsed = time.perf_counter() - t0
    ok = max(diffs.values()) < 1e-5 and s_res < 1e-10
    report(
        8,
        ok,
        "max |density - Fourier| " + ", ".join(f"{t:g}: {d:.1e} (k_max {FOURIER_KMAX[t]})" for t, d in diffs.items())
        + f"; S-transform residual {s_res:.1e} on {len(zs)} z; {elapsed:.0f} s",
    )


# -- 9 ------------------------------------------------------------------------------

REQUIRED = ("normalization", "symmetry", "unitarity", "scaling", "moments = int rho", "control slope")


def test_criterion_9_invariant_suite():
    t0 = time.perf_counter()
    res = run_checks()
    elapsed = time.perf_counter() - t0
    failed = [c.name for c in res if not c.passed]
    covered = all(any(key in c.name for c in res) for key in REQUIRED)
    ok = not failed and covered and elapsed < 300
    report(9, ok, f"{len(res) - len(failed)}/{len(res)} checks passed in {elapsed:.0f} s" + (f"; failed: {failed}" if failed else ""))


if __name__ == "__main__":  # pragma: no cover
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
