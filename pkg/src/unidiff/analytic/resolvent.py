"""Large-N resolvent of the multiplicative unitary diffusion.

Everything is driven by the single transcendental equation

    g(f; z) = z f - (1 + f) exp(-tau (f + 1/2)) = 0,    tau = m2 * t,

for the auxiliary function f(z) = z G(z) - 1. The physical solution is the
branch with f ~ a_1 / z at infinity. On the unit circle it is the boundary
value from |z| > 1, and the eigenvalue density is

    rho(theta) = Re(1/2 + f(e^{i theta})) / pi,

which integrates to one and tends to 1/(2 pi) as tau -> infinity.

Two facts make branch selection on |z| = 1 mechanical:

* If f solves the equation at z = e^{i theta} then so does -1 - conj(f),
  with the opposite sign of Re(1/2 + f). On the support the physical root is
  the one with Re(1/2 + f) > 0.
* Off the support, 1/2 + f = i y is purely imaginary and
  theta = pi + 2 arctan(2 y) - tau y (mod 2 pi). The physical root sits on the
  monotone piece |y| < y_edge, y_edge^2 = (4 - tau) / (4 tau).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "BranchLossError",
    "ResolventSolution",
    "residual",
    "solve_f",
    "solve_f_exterior",
    "green",
    "density",
    "default_grid",
]

RESIDUAL_TOL = 1e-12
MAX_NEWTON = 100
REGULATOR = 1e-8


class BranchLossError(RuntimeError):
    """Newton iteration failed to converge on the tracked branch."""


@dataclass
class ResolventSolution:
    t: float
    m2: float
    theta_grid: np.ndarray
    f_values: np.ndarray
    rho_values: np.ndarray
    failed: list = field(default_factory=list)
    method: str = "resolvent"
    k_max: Optional[int] = None

    @property
    def tau(self) -> float:
        return self.m2 * self.t

    def normalization(self) -> float:
        """Periodic trapezoid rule; assumes a uniform grid covering the circle."""
        h = 2 * np.pi / len(self.theta_grid)
        return float(np.sum(self.rho_values) * h)

    def rho_reported(self) -> np.ndarray:
        return np.clip(self.rho_values, 0.0, None)


def default_grid(n_points: int = 2048) -> np.ndarray:
    """Uniform grid on (-pi, pi], right endpoint included."""
    return -np.pi + 2 * np.pi * np.arange(1, n_points + 1) / n_points


def residual(f: complex, z: complex, tau: float) -> complex:
    return z * f - (1 + f) * cmath.exp(-tau * (f + 0.5))


def _newton(f0: complex, z: complex, tau: float, max_iter: int = MAX_NEWTON):
    """Damped Newton on g(f; z). Returns (f, |g|, converged)."""
    f = complex(f0)
    g = residual(f, z, tau)
    ag = abs(g)
    converged = False
    for _ in range(max_iter):
        if ag < RESIDUAL_TOL * (1 + abs(f)):
            converged = True
        e = cmath.exp(-tau * (f + 0.5))
        dg = z - e * (1 - tau * (1 + f))
        if dg == 0:
            return f, ag, False
        step = g / dg
        lam = 1.0
        for _ in range(30):
            trial = f - lam * step
            gt = residual(trial, z, tau)
            if abs(gt) < ag or lam < 1e-6:
                break
            lam *= 0.5
        # keep polishing past the tolerance while the residual still drops;
        # matters at the multiple roots near the support edges
        if converged and (abs(gt) >= ag or abs(trial - f) <= 1e-15 * (1 + abs(f))):
            if abs(gt) < ag:
                f, ag = trial, abs(gt)
            return f, ag, True
        f, g = trial, gt
        ag = abs(g)
    return f, ag, ag < RESIDUAL_TOL * (1 + abs(f))


def solve_f(z: complex, t: float, m2: float, f_init: complex) -> complex:
    """Solve z f = (1 + f) exp(-t m2 (f + 1/2)) by Newton from ``f_init``.

    The caller is responsible for supplying a seed on the wanted branch
    (see :func:`solve_f_exterior` for the physical exterior branch).
    Raises :class:`BranchLossError` if Newton with backtracking fails.
    """
    z = complex(z)
    if abs(z) < 1 - 1e-14:
        raise ValueError(f"|z| must be >= 1, got {abs(z)}")
    tau = m2 * t
    if tau == 0:
        if z == 1:
            raise ValueError("z = 1 is the pole of f at t = 0")
        return 1 / (z - 1)
    f, ag, ok = _newton(f_init, z, tau)
    if not ok:
        raise BranchLossError(f"Newton failed at z={z}, tau={tau}: |g|={ag:.3e}")
    return f


def _series_seed(z: complex, tau: float, k: int = 6) -> complex:
    from .moments import moment_series

    a = moment_series(tau, 1.0, k)
    w = 1 / z
    return complex(sum(a[j] * w ** (j + 1) for j in range(k)))


def solve_f_exterior(
    z: complex, t: float, m2: float, r_start: float = 10.0, n_steps: int = 200
) -> complex:
    """Physical f(z) for |z| >= 1, tracked radially in from a large circle.

    The seed on |z| = r_start comes from the first few moments, so the
    branch is the one with f -> 0 at infinity.
    """
    z = complex(z)
    if abs(z) < 1 - 1e-14:
        raise ValueError(f"|z| must be >= 1, got {abs(z)}")
    tau = m2 * t
    if tau == 0:
        return solve_f(z, t, m2, 0j)
    r_end = abs(z)
    phase = z / r_end
    r0 = max(r_start, 2 * r_end)
    f = solve_f(r0 * phase, t, m2, _series_seed(r0 * phase, tau))
    for r in np.geomspace(r0, r_end, n_steps)[1:]:
        f = _track(f, complex(r * phase), tau)
    return f


def green(z: complex, t: float, m2: float) -> complex:
    """G(z) = (1 + f(z)) / z on the physical sheet, |z| >= 1."""
    z = complex(z)
    return (1 + solve_f_exterior(z, t, m2)) / z


def _track(f_prev: complex, z: complex, tau: float, max_jump: float = 0.25) -> complex:
    f, ag, ok = _newton(f_prev, z, tau)
    if not ok or abs(f - f_prev) > max_jump * (1 + abs(f_prev)):
        raise BranchLossError(f"lost branch at z={z}, tau={tau}")
    return f


# -- unit circle --------------------------------------------------------------


def _edge_y(tau: float) -> float:
    return math.sqrt((4 - tau) / (4 * tau)) if tau < 4 else math.inf


def _offsupport_root(theta: float, tau: float) -> complex:
    """Physical f at e^{i theta} outside the support (tau < 4)."""
    ye = _edge_y(tau)
    # signed distance from pi, wrapped into (-pi, pi]
    d = math.remainder(theta - math.pi, 2 * math.pi)

    def phi(y):
        return 2 * math.atan(2 * y) - tau * y - d

    y = brentq(phi, -ye, ye, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return complex(-0.5, y)


def _select(f: complex, theta: float, tau: float, support_tol: float) -> complex:
    """Map a converged root at e^{i theta} onto the physical branch."""
    x = f.real + 0.5
    if x < -support_tol:
        return -1 - f.conjugate()
    if abs(x) <= support_tol and tau < 4:
        y = f.imag
        if 1 + 4 * y * y > 4 / tau:
            return _offsupport_root(theta, tau)
    return f


def _seed_on_circle(tau: float) -> complex:
    """f(1): walk the real ray from r = 10 down to the unit circle."""
    r0 = 10.0
    f = solve_f(r0, tau, 1.0, _series_seed(r0, tau))
    for r in np.geomspace(r0, 1.0, 400)[1:]:
        f = _track(f, complex(r), tau)
    return complex(f.real, 0.0)


def _solve_on_circle(theta, f_prev, tau, support_tol):
    z = cmath.exp(1j * theta)
    f, ag, ok = _newton(f_prev, z, tau)
    if not ok:
        # near-critical triple root: solve just outside, then polish
        zr = (1 + REGULATOR) * z
        f, ag, ok = _newton(f_prev, zr, tau)
        if ok:
            fp, agp, okp = _newton(f, z, tau)
            if okp:
                f = fp
    if not ok:
        return None
    return _select(f, theta, tau, support_tol)


def _continue_arc(thetas, f0, tau, support_tol, max_depth=40):
    """Continue f along the ordered angles ``thetas`` starting from f(0) = f0."""
    out = np.empty(len(thetas), dtype=complex)
    failed = []
    th_prev, f_prev = 0.0, f0
    for i, th in enumerate(thetas):
        f_new = _bisect_step(th_prev, th, f_prev, tau, support_tol, max_depth)
        if f_new is None:
            failed.append(i)
            out[i] = complex(np.nan, np.nan)
            continue
        out[i] = f_new
        th_prev, f_prev = th, f_new
    return out, failed


def _bisect_step(th_a, th_b, f_a, tau, support_tol, depth):
    stack = [(th_b, depth)]
    th_cur, f_cur = th_a, f_a
    while stack:
        target, d = stack[-1]
        f = _solve_on_circle(target, f_cur, tau, support_tol)
        jump_ok = f is not None and abs(f - f_cur) <= 0.1 + 4 * math.sqrt(abs(target - th_cur))
        if jump_ok:
            stack.pop()
            th_cur, f_cur = target, f
            continue
        if d == 0:
            return None
        mid = 0.5 * (th_cur + target)
        stack.append((mid, d - 1))
    return f_cur


def density(
    t: float,
    m2: float,
    theta_grid=None,
    support_tol: float = 1e-9,
) -> ResolventSolution:
    """Limiting eigenvalue density on ``theta_grid`` (default: 2048 points).

    f is seeded at theta = 0 by walking the real axis in from |z| = 10 and then
    continued along the circle separately towards +pi and -pi.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if m2 <= 0:
        raise ValueError(f"m2 must be positive, got {m2}")
    tau = m2 * t
    if tau == 0:
        raise ValueError("at t = 0 the spectral measure is a point mass at theta = 0")
    theta = default_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    if np.any(np.diff(theta) <= 0):
        raise ValueError("theta_grid must be strictly ascending")
    if theta[0] <= -np.pi or theta[-1] > np.pi:
        raise ValueError("theta_grid must lie in (-pi, pi]")

    f0 = _seed_on_circle(tau)
    f = np.empty(len(theta), dtype=complex)
    failed = []
    pos = np.flatnonzero(theta >= 0)
    neg = np.flatnonzero(theta < 0)[::-1]
    for idx in (pos, neg):
        if len(idx) == 0:
            continue
        vals, bad = _continue_arc(theta[idx], f0, tau, support_tol)
        f[idx] = vals
        failed.extend(int(idx[b]) for b in bad)
    rho = (f.real + 0.5) / np.pi
    # off-support roots are exact to rounding; report them as zero
    rho = np.where(np.abs(rho) < support_tol, 0.0, rho)
    return ResolventSolution(
        t=float(t),
        m2=float(m2),
        theta_grid=theta,
        f_values=f,
        rho_values=rho,
        failed=sorted(failed),
    )
