"""Reduced-scale self-test: every structural property the package relies on.

Each check returns a :class:`Check` with the measured quantity and the bound it
must respect. ``run_checks`` runs them all; the whole suite takes well under
a minute on one core.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import analytic as an
from . import stats
from .diffusion import DiffusionRun, eigenphases, run_to_checkpoints, simulate, unitarity_defect
from .ensembles import EnsembleSpec, Family, estimate_moments_of_H, sample_hermitian, stream

__all__ = ["Check", "run_checks", "format_table", "CHECKS"]

SEED = 11


@dataclass
class Check:
    name: str
    measured: float
    bound: float
    passed: bool
    note: str = ""
    seconds: float = 0.0


def _le(name, measured, bound, note=""):
    measured = float(measured)
    return Check(name, measured, bound, bool(measured <= bound), note)


def _ge(name, measured, bound, note=""):
    measured = float(measured)
    return Check(name, measured, bound, bool(measured >= bound), note)


# -- analytic ---------------------------------------------------------------


def _normalization(density_fn, tau):
    theta, w = an.quadrature_nodes(tau, 1.0)
    rho = density_fn(tau, 1.0, theta).rho_values
    return _le(f"normalization m2t={tau:g}", abs(w @ rho - 1), 1e-6, "|int rho - 1|")


def _uniform_limit(density_fn):
    rho = density_fn(100.0, 1.0, an.default_grid(512)).rho_values
    return _le("uniform limit m2t=100", np.max(np.abs(rho - 1 / (2 * np.pi))), 1e-8, "max|rho - 1/2pi|")


def _positivity(density_fn):
    worst = min(float(np.min(density_fn(tau, 1.0, an.default_grid(512)).rho_values)) for tau in (1, 3, 5))
    return _ge("positivity", worst, -1e-12, "min rho")


def _symmetry(density_fn):
    th = an.default_grid(2048)
    rho = density_fn(2.0, 1.0, th).rho_values
    # grid point k mirrors point n - 2 - k; the last point is pi itself
    mirror = rho[:-1][::-1]
    return _le("reflection symmetry m2t=2", np.max(np.abs(rho[:-1] - mirror)), 1e-10, "max|rho(th)-rho(-th)|")


def _support(density_fn):
    tau = 2.0
    e = an.edge_points(tau, 1.0).theta_edge
    th = np.array([0.0, 0.5 * e, 0.95 * e, 1.02 * e, 0.5 * (e + np.pi), np.pi])
    rho = density_fn(tau, 1.0, th).rho_values
    outside = float(np.max(np.abs(rho[3:])))
    inside = float(np.min(rho[:3]))
    ok = outside == 0 and inside > 0
    return Check("support is [-edge, edge] m2t=2", outside, 0.0, ok, f"min inside {inside:.3g}")


def _scaling(density_fn):
    th = an.default_grid(512)
    a = density_fn(4.0, 1.0, th).rho_values
    b = density_fn(2000.0, 0.002, th).rho_values
    return _le("m2 t scaling (m2=0.002, t=2000)", np.max(np.abs(a - b)), 1e-9)


def _critical(density_fn):
    below = abs(float(density_fn(3.9, 1.0, np.array([np.pi])).rho_values[0]))
    above = float(density_fn(4.1, 1.0, np.array([np.pi])).rho_values[0])
    return Check("rho(pi) opens between 3.9 and 4.1", below, 1e-8, below < 1e-8 and above > 1e-3, f"rho(pi) at 4.1 = {above:.3g}")


def _moment_quadrature(density_fn, tau):
    theta, w = an.quadrature_nodes(tau, 1.0)
    rho = density_fn(tau, 1.0, theta).rho_values
    k = np.arange(1, 6)
    quad = (w * rho) @ np.cos(np.outer(theta, k))
    ref = an.analytic_moments(tau, 1.0, 5).a
    return _le(f"moments = int rho cos(k th) m2t={tau:g}", np.max(np.abs(quad - ref)), 1e-8)


def _moment_closed_forms():
    err = 0.0
    for tau in np.linspace(0, 5.5, 12):
        a = an.analytic_moments(tau, 1.0, 3).a
        ref = np.exp(-np.array([1, 2, 3]) * tau / 2) * np.array(
            [1.0, 1 - tau, 1 - 3 * tau + 1.5 * tau**2]
        )
        err = max(err, float(np.max(np.abs(a - ref))))
    return _le("a_1..a_3 closed forms", err, 1e-12)


def _moments_at_zero():
    a = an.analytic_moments(0.0, 1.0, 10).a
    return _le("a_k(t=0) = 1", np.max(np.abs(a - 1)), 0.0)


def _fourier_oracle():
    th = an.default_grid(2048)
    a = an.density(5.5, 1.0, th).rho_values
    b = an.density_from_moments(5.5, 1.0, 200, th).rho_values
    return _le("density vs moment series m2t=5.5", np.max(np.abs(a - b)), 1e-10)


def _residual():
    worst = 0.0
    for tau in (0.5, 2.0, 5.0):
        sol = an.density(tau, 1.0, an.default_grid(256))
        z = np.exp(1j * sol.theta_grid)
        r = max(abs(an.residual(f, zz, tau)) for f, zz in zip(sol.f_values, z))
        worst = max(worst, float(r))
    return _le("functional equation residual", worst, 1e-10)


def _s_transform():
    worst = 0.0
    for tau in (0.5, 1.0, 2.0):
        for r in np.linspace(0.05, 0.25, 5):
            for phi in np.linspace(0, 2 * np.pi, 10, endpoint=False):
                worst = max(worst, an.s_transform_check(r * np.exp(1j * phi), tau, 1.0))
    return _le("S-transform consistency (150 z)", worst, 1e-10)


def _critical_profile():
    d = np.array([1e-2, 1e-3, 1e-4])
    rho = an.density(4.0, 1.0, np.pi - d).rho_values
    slope = np.polyfit(np.log(d), np.log(rho), 1)[0]
    return _le("cusp exponent 1/3 at m2t=4", abs(slope - 1 / 3), 0.01, f"slope {slope:.4f}")


# -- ensembles and diffusion ------------------------------------------------


def _generator_moments(family):
    spec = EnsembleSpec(family, 40, 1.5, SEED)
    m1, m2, (s1, s2) = estimate_moments_of_H(spec, 200)
    # sign entries make tr H^2 / N exactly m2, so the second error can vanish
    z1 = abs(m1) / s1
    z2 = abs(m2 - 1.5) / s2 if s2 > 0 else (0.0 if abs(m2 - 1.5) < 1e-12 else math.inf)
    z = max(z1, z2)
    return _le(f"generator m1=0, m2 ({family.value})", z, 4.0, "max deviation / stderr")


def _hermitian():
    spec = EnsembleSpec(Family.SIGN, 25, 1.0, SEED)
    h = sample_hermitian(spec, stream(spec, 0))
    return _le("generator exactly Hermitian", np.max(np.abs(h - h.conj().T)), 0.0)


def _unitarity():
    spec = EnsembleSpec(Family.GAUSSIAN, 24, 1.0, SEED)
    run = DiffusionRun(spec, (3.0,), m_per_unit=100, reunitarize_every=10**9)
    run_to_checkpoints(run, 0)
    return _le("unitarity without repair (300 steps)", unitarity_defect(run.u_current), 1e-8)


def _eig_modulus():
    spec = EnsembleSpec(Family.GAUSSIAN, 24, 1.0, SEED)
    run = DiffusionRun(spec, (2.0,))
    run_to_checkpoints(run, 1)
    lam = np.linalg.eigvals(run.u_current)
    return _le("|eigenvalues| = 1", np.max(np.abs(np.abs(lam) - 1)), 1e-6)


def _step_size():
    worst = 0.0
    for t in (0.3, 1.0, 5.5, 40.0):
        run = DiffusionRun(EnsembleSpec(Family.GAUSSIAN, 2, 2.0), (t,), m_per_unit=100)
        worst = max(worst, run.eps2 * run.spec.m2 * 100)
    return _le("eps^2 m2 <= 1/m_per_unit", worst, 1.0 + 1e-12, "eps^2 m2 m_per_unit")


def _determinism():
    spec = EnsembleSpec(Family.UNIFORM, 12, 1.0, SEED)
    a = simulate(spec, (0.5, 1.0), 3, threads=1).thetas
    b = simulate(spec, (0.5, 1.0), 3, threads=1).thetas
    c = simulate(spec, (0.5, 1.0), 2, start_index=1, threads=1).thetas
    diff = max(float(np.max(np.abs(a - b))), float(np.max(np.abs(a[1:] - c))))
    return _le("seeded determinism and index streams", diff, 0.0)


# -- stats --------------------------------------------------------------------


def _small_batch():
    spec = EnsembleSpec(Family.GAUSSIAN, 32, 1.0, SEED)
    return simulate(spec, (1.0,), 60, threads=1).at(1.0)


def _hist_norm(samples):
    h = stats.histogram(samples, 64)
    return _le("histogram normalization", abs(h.normalization() - 1), 1e-12)


def _moment_bounds(samples):
    m = stats.empirical_moments(samples, 6)
    return _le("|a_k empirical| <= 1", np.max(np.hypot(m.a, m.imag)), 1.0)


def _imag_zero(samples):
    arr = np.stack([s.thetas for s in samples])
    k = np.arange(1, 7)
    per = np.exp(1j * k[None, :, None] * arr[:, None, :]).mean(axis=2).imag
    _, se = stats.jackknife(per)
    z = np.max(np.abs(per.mean(axis=0)) / se)
    return _le("Im a_k consistent with 0", z, 4.0, "max |Im a_k| / stderr")


def _empirical_vs_analytic(samples):
    m = stats.empirical_moments(samples, 3)
    ref = an.analytic_moments(1.0, 1.0, 3).a
    z = np.max(np.abs(m.a - ref) / m.stderr)
    return _le("empirical a_1..a_3 vs analytic m2t=1", z, 4.0, "max deviation / stderr")


def _jackknife_scaling():
    rng = np.random.default_rng(SEED)
    ratios = []
    for _ in range(20):
        big = rng.uniform(-np.pi, np.pi, (400, 16))
        se_small = stats.empirical_moments(big[:100], 1).stderr[0]
        se_big = stats.empirical_moments(big, 1).stderr[0]
        ratios.append(se_small / se_big)
    r = float(np.mean(ratios))
    return _le("jackknife stderr ~ 1/sqrt(n)", abs(r - 2), 0.2, f"se(100)/se(400) = {r:.3f}")


def _control_slope():
    from scipy.stats import unitary_group

    rng = np.random.default_rng(SEED)
    gen = unitary_group(64, seed=rng)
    arr = np.stack([eigenphases(gen.rvs()) for _ in range(400)])
    fit = stats.counting_fit(arr, (0.02, 0.3))
    return _le(
        "control slope on Haar phases",
        abs(fit.slope - 1.0),
        0.05,
        f"slope {fit.slope:.4f} +- {fit.slope_stderr:.4f}",
    )


def _csv_determinism():
    import tempfile
    from pathlib import Path

    from .io import read_csv, write_csv

    rows = [(float(x), float(np.sin(x))) for x in np.linspace(0, 1, 7)]
    with tempfile.TemporaryDirectory() as d:
        p1 = write_csv(Path(d) / "a.csv", ["x", "y"], rows, {"k": 1})
        p2 = write_csv(Path(d) / "b.csv", ["x", "y"], rows, {"k": 1})
        same = p1.read_text().splitlines()[1:] == p2.read_text().splitlines()[1:]
        back = read_csv(p1)[2]
    err = float(np.max(np.abs(back - np.array(rows))))
    return Check("CSV payload determinism and round trip", err, 0.0, same and err == 0.0)


def _build(density_fn):
    d = density_fn
    checks = [
        *[(f"normalization {tau}", lambda tau=tau: _normalization(d, tau)) for tau in (0.5, 1.0, 2.0, 4.0, 5.5)],
        ("uniform limit", lambda: _uniform_limit(d)),
        ("positivity", lambda: _positivity(d)),
        ("symmetry", lambda: _symmetry(d)),
        ("support", lambda: _support(d)),
        ("scaling", lambda: _scaling(d)),
        ("critical", lambda: _critical(d)),
        *[(f"moment quadrature {tau}", lambda tau=tau: _moment_quadrature(d, tau)) for tau in (1.0, 2.0, 5.0)],
        ("closed forms", _moment_closed_forms),
        ("moments at zero", _moments_at_zero),
        ("fourier oracle", _fourier_oracle),
        ("residual", _residual),
        ("s-transform", _s_transform),
        ("cusp", _critical_profile),
        *[(f"generator {f.value}", lambda f=f: _generator_moments(f)) for f in Family],
        ("hermitian", _hermitian),
        ("unitarity", _unitarity),
        ("eig modulus", _eig_modulus),
        ("step size", _step_size),
        ("determinism", _determinism),
    ]
    batch = {}

    def sample_check(fn):
        def go():
            if "s" not in batch:
                batch["s"] = _small_batch()
            return fn(batch["s"])

        return go

    checks += [
        ("hist norm", sample_check(_hist_norm)),
        ("moment bounds", sample_check(_moment_bounds)),
        ("imag zero", sample_check(_imag_zero)),
        ("empirical vs analytic", sample_check(_empirical_vs_analytic)),
        ("jackknife", _jackknife_scaling),
        ("control slope", _control_slope),
        ("csv", _csv_determinism),
    ]
    return checks


CHECKS = [name for name, _ in _build(an.density)]


def run_checks(density_fn: Optional[Callable] = None, only=None) -> list:
    """Run the suite; ``density_fn`` replaces :func:`unidiff.analytic.density`.

    A check that raises is recorded as failed with the exception as its note.
    """
    out = []
    for key, fn in _build(density_fn or an.density):
        if only is not None and key not in only:
            continue
        t0 = time.perf_counter()
        try:
            c = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            c = Check(key, math.nan, math.nan, False, f"{type(exc).__name__}: {exc}")
        c.seconds = time.perf_counter() - t0
        out.append(c)
    return out


def format_table(checks) -> str:
    w = max(len(c.name) for c in checks)
    lines = [f"{'check':<{w}}  {'measured':>11}  {'bound':>9}  result  note"]
    for c in checks:
        lines.append(
            f"{c.name:<{w}}  {c.measured:>11.3e}  {c.bound:>9.2e}  "
            f"{'PASS' if c.passed else 'FAIL':<6}  {c.note}"
        )
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return "\n".join(lines)
