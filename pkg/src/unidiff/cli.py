"""Command-line front end.

    unidiff density  --m2 1 --t 1,2,4,5.5
    unidiff simulate --family gaussian --n 200 --t 0.5,1,2,4 --samples 200 --seed 7
    unidiff moments  --kmax 4 --n 200 --samples 200
    unidiff critical --n 128,512 --samples 500
    unidiff check

Every flag can also come from ``--config FILE`` (JSON with the same keys, or
any output file of a previous run, whose provenance header is read back);
flags given on the command line win. Exit codes: 0 success, 1 usage error,
2 numerical failure, 3 invariant or tolerance violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import analytic as an
from . import io, presets, stats
from .diffusion import EigensolveError, UnitarityError, default_threads
from .ensembles import EnsembleSpec, Family

__all__ = ["RunConfig", "main", "EXIT_OK", "EXIT_USAGE", "EXIT_NUMERICAL", "EXIT_INVARIANT"]

log = logging.getLogger("unidiff")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3

DEFAULT_TOLERANCES = {
    "sigma": 4.0,  # moments: max |analytic - empirical| / stderr
    "slope": 0.1,  # critical: counting exponent vs 4/3
    "gap": 0.1,  # critical: gap exponent vs 3/4
    "density_slope": 0.01,  # critical: analytic cusp exponent vs 1/3
}

COMMAND_DEFAULTS = {
    "density": dict(t=[1.0, 2.0, 4.0, 5.5]),
    "simulate": dict(t=[0.5, 1.0, 2.0, 4.0], samples=200),
    "moments": dict(t=[0.0, *presets.MOMENT_TIMES], samples=200, kmax=4),
    "critical": dict(n=[128, 512], samples=500),
    "check": dict(),
}


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class InvariantViolation(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a command needs; serialized into each output header."""

    command: str
    family: str = "gaussian"
    n: list = field(default_factory=lambda: [200])
    m2: float = 1.0
    t: list = field(default_factory=list)
    samples: int = 200
    seed: int = 0
    bins: int = 64
    kmax: Optional[int] = None
    grid_points: int = 2048
    m_per_unit: int = 100
    out_dir: str = "unidiff_out"
    threads: int = 1
    cache_dir: Optional[str] = None
    tolerance: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self):
        if self.family not in {f.value for f in Family}:
            raise UsageError(f"unknown family {self.family!r}")
        if not self.n or any(int(n) != n or n < 2 for n in self.n):
            raise UsageError(f"--n must be integers >= 2, got {self.n}")
        if not (self.m2 > 0 and math.isfinite(self.m2)):
            raise UsageError(f"--m2 must be positive, got {self.m2}")
        if any(not math.isfinite(t) or t < 0 for t in self.t):
            raise UsageError(f"--t must be nonnegative, got {self.t}")
        if self.command != "check" and not self.t and self.command != "critical":
            raise UsageError("--t is empty")
        if self.samples < 0 or self.bins < 16 or self.grid_points < 16:
            raise UsageError("--samples must be >= 0, --bins and --grid-points >= 16")
        if self.kmax is not None and self.kmax < 1:
            raise UsageError("--kmax must be >= 1")
        if self.threads < 1 or self.m_per_unit < 1:
            raise UsageError("--threads and m_per_unit must be >= 1")
        unknown = set(self.tolerance) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise UsageError(f"unknown tolerance(s): {sorted(unknown)}")


# -- argument handling --------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(s: str) -> list:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}")


def _ints(s: str) -> list:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def _tol(s: str):
    key, sep, val = s.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {s!r}")
    return key.strip(), float(val)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="unidiff", description="Spectra of products of random unitary matrices.")
    p.add_argument("--version", action="version", version=f"unidiff {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    common = _Parser(add_help=False)
    # everything defaults to None so that config-file values are not clobbered
    common.add_argument("--config", help="JSON config, or an output file to re-run")
    common.add_argument("--family", choices=[f.value for f in Family])
    common.add_argument("--n", type=_ints, help="matrix size(s), comma separated")
    common.add_argument("--m2", type=float, help="second moment of the generator")
    common.add_argument("--t", type=_floats, help="times, comma separated")
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--bins", type=int)
    common.add_argument("--kmax", type=int)
    common.add_argument("--grid-points", dest="grid_points", type=int)
    common.add_argument("--m-per-unit", dest="m_per_unit", type=int, help="steps per unit of m2 t")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--threads", type=int, help="worker processes (default $UNIDIFF_THREADS or 1)")
    common.add_argument("--cache-dir", dest="cache_dir", help="reuse simulated batches stored here")
    common.add_argument("--tolerance", type=_tol, action="append", metavar="NAME=VALUE")
    common.add_argument("-v", "--verbose", action="store_true")

    helps = {
        "density": "analytic density on a grid, one CSV per time",
        "simulate": "simulate trajectories, write eigenphases and histograms",
        "moments": "analytic vs empirical moments a_k(t)",
        "critical": "spacing exponents at the critical time",
        "check": "run the invariant suite",
    }
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h, description=h)
    return p


def _load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file {path} not found")
    if path.suffix == ".csv":
        header, _, _ = io.read_csv(path)
        if header is None:
            raise UsageError(f"{path} has no provenance header")
        data = header
    else:
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: {exc}")
    # provenance headers and manifests nest the run configuration
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    if "run" in data and isinstance(data["run"], dict):
        data = data["run"]
    return data


def make_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.command is None:
        raise UsageError("a command is required: density, simulate, moments, critical or check")
    merged = dict(COMMAND_DEFAULTS[args.command])
    merged["threads"] = default_threads()
    if args.config:
        cfg = _load_config_file(args.config)
        cfg.pop("command", None)
        known = set(RunConfig.__dataclass_fields__) - {"command"}
        bad = set(cfg) - known
        if bad:
            raise UsageError(f"unknown config keys: {sorted(bad)}")
        merged.update(cfg)
    for key in RunConfig.__dataclass_fields__:
        if key in ("command", "tolerance"):
            continue
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(merged.pop("tolerance", {}) or {})
    for k, v in args.tolerance or []:
        tol[k] = v
    if isinstance(merged.get("n"), int):
        merged["n"] = [merged["n"]]
    if isinstance(merged.get("t"), (int, float)):
        merged["t"] = [merged["t"]]
    try:
        cfg = RunConfig(command=args.command, tolerance=tol, **merged)
        cfg.n = [int(n) if int(n) == n else n for n in cfg.n]
        cfg.t = [float(t) for t in cfg.t]
        cfg.m2 = float(cfg.m2)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))
    cfg.validate()
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return cfg


# -- helpers --------------------------------------------------------------------


def _header(cfg: RunConfig, **extra) -> dict:
    h = io.provenance(**cfg.to_dict())
    h.update(extra)
    return h


def _tag(x: float) -> str:
    return f"{x:g}".replace("-", "m")


def _spec(cfg: RunConfig, n: int) -> EnsembleSpec:
    try:
        return EnsembleSpec(cfg.family, n, cfg.m2, cfg.seed)
    except ValueError as exc:
        raise UsageError(str(exc))


def _batch(cfg: RunConfig, n: int, times):
    spec = _spec(cfg, n)
    try:
        return io.cached_simulate(
            cfg.cache_dir, spec, sorted(times), cfg.samples, cfg.m_per_unit, threads=cfg.threads
        )
    except (EigensolveError, UnitarityError) as exc:
        raise NumericalFailure(str(exc))


def _write_histogram(path, hist, header):
    rows = zip(hist.bin_centers, hist.normalized, hist.stderr)
    return io.write_csv(path, ["bin_center", "rho_hat", "stderr"], rows, header)


# -- commands ---------------------------------------------------------------------


def cmd_density(cfg: RunConfig) -> list:
    out = Path(cfg.out_dir)
    grid = an.default_grid(cfg.grid_points)
    files, failures = [], []
    for t in cfg.t:
        if cfg.m2 * t == 0:
            raise UsageError("t = 0: the spectrum is a point mass at theta = 0, there is no density")
        sol = an.density(t, cfg.m2, grid)
        theta, w, rho_q = an.density_quadrature(t, cfg.m2)
        norm = float(w @ rho_q)
        hdr = _header(cfg, t=t, normalization=norm, failed_points=len(sol.failed))
        rows = zip(grid, sol.f_values.real, sol.f_values.imag, sol.rho_reported())
        files.append(
            io.write_csv(out / f"density_m2_{_tag(cfg.m2)}_t_{_tag(t)}.csv", ["theta", "re_f", "im_f", "rho"], rows, hdr)
        )
        if sol.failed:
            failures.append((t, sol.failed))
            log.error("t = %g: solver failed at %d grid points, first theta = %.6f", t, len(sol.failed), grid[sol.failed[0]])
        if cfg.kmax:
            fm = an.density_from_moments(t, cfg.m2, cfg.kmax, grid)
            rows = zip(grid, fm.rho_values, sol.rho_values, fm.rho_values - sol.rho_values)
            files.append(
                io.write_csv(
                    out / f"density_moments_m2_{_tag(cfg.m2)}_t_{_tag(t)}.csv",
                    ["theta", "rho_moments", "rho_resolvent", "difference"],
                    rows,
                    hdr,
                )
            )
        print(f"t = {t:g}: normalization {norm:.12f}, {len(sol.failed)} failed points")
    if failures:
        raise NumericalFailure(f"solver failures at t = {[t for t, _ in failures]}")
    return files


def cmd_simulate(cfg: RunConfig) -> list:
    out = Path(cfg.out_dir)
    files = []
    for n in cfg.n:
        batch = _batch(cfg, n, cfg.t)
        stem = f"{cfg.family}_n{n}"
        for t in batch.t_checkpoints:
            hdr = _header(cfg, n_current=n, t_current=t)
            files.append(io.write_eigenphases_csv(out / f"eigenphases_{stem}_t_{_tag(t)}.csv", batch, t, hdr))
            if cfg.m2 * t > 0:
                hist = stats.histogram(batch.phases(t), cfg.bins)
                files.append(_write_histogram(out / f"histogram_{stem}_t_{_tag(t)}.csv", hist, hdr))
        files.append(io.write_manifest(out / f"manifest_{stem}.json", batch, run=cfg.to_dict()))
        print(f"{stem}: {len(batch.indices)} samples, {len(batch.failed)} failed, checkpoints {list(batch.t_checkpoints)}")
    return files


def cmd_moments(cfg: RunConfig) -> list:
    out = Path(cfg.out_dir)
    kmax = cfg.kmax or 4
    times = sorted(cfg.t)
    n = cfg.n[0]
    empirical = {}
    if cfg.samples > 0:
        if cfg.samples < 2:
            raise UsageError("empirical moments need --samples >= 2 (or 0 for analytic only)")
        batch = _batch(cfg, n, times)
        for t in times:
            empirical[t] = stats.empirical_moments(batch.phases(t), kmax)
    rows, worst = [], {k: 0.0 for k in range(1, kmax + 1)}
    for t in times:
        a = an.analytic_moments(t, cfg.m2, kmax).a
        for k in range(1, kmax + 1):
            row = [t, k, a[k - 1]]
            if t in empirical:
                e = empirical[t]
                diff = abs(a[k - 1] - e.a[k - 1])
                se = e.stderr[k - 1]
                z = diff / se if se > 0 else (0.0 if diff < 1e-12 else math.inf)
                worst[k] = max(worst[k], z)
                row += [e.a[k - 1], se, e.imag[k - 1], z]
            rows.append(row)
    cols = ["t", "k", "a_k"]
    if empirical:
        cols += ["a_k_empirical", "stderr", "imag_empirical", "deviation_sigma"]
    hdr = _header(cfg)
    files = [io.write_csv(out / f"moments_{cfg.family}_n{n}.csv", cols, rows, hdr)]
    summary = {"max_deviation_sigma": {str(k): v for k, v in worst.items()}, "tolerance_sigma": cfg.tolerance["sigma"]}
    files.append(io.write_json(out / f"moments_{cfg.family}_n{n}_summary.json", {**hdr, "summary": summary}))
    if empirical:
        for k, v in worst.items():
            print(f"a_{k}: max |analytic - empirical| / stderr = {v:.2f}")
        bad = [k for k, v in worst.items() if not v <= cfg.tolerance["sigma"]]
        if bad:
            raise InvariantViolation(f"moments k = {bad} exceed {cfg.tolerance['sigma']} sigma")
    return files


def _analytic_cusp(m2: float):
    """Slope and coefficient of log rho vs log|theta - pi| on [1e-4, 1e-2]."""
    t_c = an.critical_time(m2)
    d = np.geomspace(1e-2, 1e-4, 25)
    rho = an.density(t_c, m2, np.pi - d).rho_values
    slope, icpt = np.polyfit(np.log(d), np.log(rho), 1)
    coef_fixed = float(np.exp(np.mean(np.log(rho) - np.log(d) / 3)))
    return d, rho, float(slope), float(np.exp(icpt)), coef_fixed


def cmd_critical(cfg: RunConfig) -> list:
    t_c = an.critical_time(cfg.m2)
    if cfg.t and any(abs(t - t_c) > 1e-9 * t_c for t in cfg.t):
        raise UsageError(f"critical runs only at t_c = 4/m2 = {t_c:g} (got --t {','.join(f'{t:g}' for t in cfg.t)})")
    ns = sorted(cfg.n)
    out = Path(cfg.out_dir)
    hdr = _header(cfg, t_c=t_c)
    fits = []
    for n in ns:
        batch = _batch(cfg, n, [t_c])
        try:
            fit = stats.critical_spacing_fit(batch.at(t_c))
        except stats.InsufficientStatistics as exc:
            raise NumericalFailure(f"N = {n}: {exc}")
        fits.append(fit)
        print(f"N = {n}: slope {fit.slope:.4f} +- {fit.slope_stderr:.4f}, mean gap at pi {fit.gap_mean:.5f}")
    cols = ["n", "slope", "slope_stderr", "intercept", "pooled_count", "gap_mean", "gap_stderr"]
    rows = [[f.n, f.slope, f.slope_stderr, f.intercept, f.pooled_count, f.gap_mean, f.gap_stderr] for f in fits]
    files = [io.write_csv(out / "spacing_fits.csv", cols, rows, hdr)]

    d, rho, slope_a, coef_a, coef_fixed = _analytic_cusp(cfg.m2)
    prof = an.near_critical_profile(np.pi - d)
    files.append(io.write_csv(out / "critical_profile.csv", ["distance_from_pi", "rho", "rho_leading_order"], zip(d[::-1], rho[::-1], prof[::-1]), hdr))

    gaps = []
    if len(fits) >= 2:
        gaps.append((fits[0].n, fits[-1].n, *stats.gap_exponent(fits[0], fits[-1])))
    tol = cfg.tolerance
    checks = {
        "counting_slope": [(f.n, f.slope, 4 / 3, abs(f.slope - 4 / 3) <= tol["slope"]) for f in fits],
        "gap_exponent": [(a, b, e, 3 / 4, abs(e - 0.75) <= tol["gap"]) for a, b, e, _ in gaps],
        "density_slope": (slope_a, 1 / 3, abs(slope_a - 1 / 3) <= tol["density_slope"]),
    }
    summary = {
        "t_c": t_c,
        "fits": [dict(zip(cols, r)) for r in rows],
        "gap_exponents": [dict(n_small=a, n_large=b, exponent=e, stderr=s) for a, b, e, s in gaps],
        "analytic_density_slope": slope_a,
        "analytic_coefficient_fit": coef_a,
        "analytic_coefficient_fixed_slope": coef_fixed,
        "leading_order_coefficient": an.CRITICAL_COEFFICIENT,
        "predicted": {"counting": 4 / 3, "gap": 3 / 4, "density": 1 / 3},
        "tolerance": tol,
        "within_tolerance": checks,
    }
    files.append(io.write_json(out / "critical_summary.json", {**hdr, "summary": summary}))
    for a, b, e, s in gaps:
        print(f"gap exponent N = {a} -> {b}: {e:.4f} +- {s:.4f} (predicted 0.75)")
    print(f"analytic cusp: slope {slope_a:.5f}, coefficient {coef_fixed:.5f}")
    ok = all(c[-1] for c in checks["counting_slope"]) and all(c[-1] for c in checks["gap_exponent"]) and checks["density_slope"][-1]
    if not ok:
        raise InvariantViolation("critical exponents outside tolerance; see critical_summary.json")
    return files


def cmd_check(cfg: RunConfig) -> list:
    from .checks import format_table, run_checks

    t0 = time.perf_counter()
    results = run_checks()
    print(format_table(results))
    print(f"({time.perf_counter() - t0:.1f} s)")
    if not all(c.passed for c in results):
        raise InvariantViolation(f"{sum(not c.passed for c in results)} check(s) failed")
    return []


COMMANDS = {
    "density": cmd_density,
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "critical": cmd_critical,
    "check": cmd_check,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = make_config(argv)
        COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"unidiff: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, an.BranchLossError, EigensolveError, UnitarityError) as exc:
        print(f"unidiff: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except InvariantViolation as exc:
        print(f"unidiff: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
