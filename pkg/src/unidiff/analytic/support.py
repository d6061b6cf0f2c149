"""Support edges, critical time, near-critical profile and S-transform check."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .resolvent import BranchLossError, density, solve_f_exterior

__all__ = [
    "EdgePoints",
    "edge_points",
    "critical_time",
    "CRITICAL_COEFFICIENT",
    "near_critical_profile",
    "s_transform",
    "s_transform_check",
    "density_quadrature",
    "quadrature_nodes",
]

# rho(theta) ~ CRITICAL_COEFFICIENT * |theta - pi|^(1/3) at m2 t = 4, for the
# density normalized to one on (-pi, pi].
CRITICAL_COEFFICIENT = (3 / 16) ** (1 / 3) * math.cos(math.pi / 6) / math.pi
PROFILE_WINDOW = 0.3


@dataclass(frozen=True)
class EdgePoints:
    t: float
    m2: float
    theta_edge: Optional[float]

    @property
    def full_circle(self) -> bool:
        return self.theta_edge is None

    @property
    def tau(self) -> float:
        return self.m2 * self.t


def edge_points(t: float, m2: float) -> EdgePoints:
    """Edge angle of the support, or ``theta_edge=None`` once it covers the circle.

    The edges are where 1 + tau f + tau f^2 = 0; mapping those f back through
    the functional equation gives

        z_edge = (sqrt(4 - tau) + i sqrt(tau)) / (sqrt(4 - tau) - i sqrt(tau))
                 * exp(i sqrt(tau) sqrt(4 - tau) / 2).
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if m2 <= 0:
        raise ValueError(f"m2 must be positive, got {m2}")
    tau = m2 * t
    if tau >= 4:
        return EdgePoints(float(t), float(m2), None)
    a = math.sqrt(4 - tau)
    b = math.sqrt(tau)
    z = (a + 1j * b) / (a - 1j * b) * cmath.exp(0.5j * a * b)
    theta = cmath.phase(z)
    if theta < 0:
        theta += 2 * math.pi
    if tau > 0 and theta == 0:  # pragma: no cover - rounding guard
        theta = 2 * b
    return EdgePoints(float(t), float(m2), float(theta))


def critical_time(m2: float) -> float:
    """Time at which the support closes around the circle: 4 / m2."""
    if m2 <= 0:
        raise ValueError(f"m2 must be positive, got {m2}")
    return 4.0 / m2


def near_critical_profile(theta) -> np.ndarray:
    """Leading-order density near theta = pi at the critical time.

    Setting f = -1/2 + F at tau = 4 gives z = -1 - 16 F^3 / 3 + O(F^4), hence
    rho ~ (3/16)^(1/3) cos(pi/6) |theta - pi|^(1/3) / pi.
    """
    th = np.asarray(theta, dtype=float)
    d = np.abs(np.remainder(th - np.pi + np.pi, 2 * np.pi) - np.pi)
    if np.any(d >= PROFILE_WINDOW):
        raise ValueError(f"profile only valid for |theta - pi| < {PROFILE_WINDOW}")
    out = CRITICAL_COEFFICIENT * np.cbrt(d)
    return out if out.ndim else float(out)


def s_transform(z: complex, t: float, m2: float) -> complex:
    """S-transform of the product at time t: exp(m2 t (z + 1/2))."""
    return cmath.exp(m2 * t * (complex(z) + 0.5))


def s_transform_check(z: complex, t: float, m2: float) -> float:
    """|G(w) / (z S(z)) - 1| with w = (1 + z) / (z S(z)).

    Ties the S-transform of the product to the resolvent equation. G is
    evaluated on the exterior sheet, so w must land outside the closed unit
    disk; otherwise :class:`BranchLossError` is raised and the caller should
    pick a smaller |z|.
    """
    z = complex(z)
    if z == 0:
        raise ValueError("z = 0 is not admissible")
    S = s_transform(z, t, m2)
    w = (1 + z) / (z * S)
    if abs(w) <= 1:
        raise BranchLossError(f"w = {w:.4g} is not outside the unit circle (z = {z})")
    if m2 * t == 0:
        G = 1 / (w - 1)
    else:
        G = (1 + solve_f_exterior(w, t, m2)) / w
    return abs(G / (z * S) - 1)


def quadrature_nodes(t: float, m2: float, n_nodes: int = 400):
    """Nodes and weights for integrating smooth functions against rho.

    The substitution is chosen so the integrand is smooth in the new variable:
    theta = theta_edge cos(phi) across a support with square-root edges,
    pi - theta = pi s^3 around the cube-root cusp at the critical time, and the
    plain periodic trapezoid once the support is the whole circle.
    Returns ``(theta, weights)`` with theta ascending in (-pi, pi].
    """
    tau = m2 * t
    edge = edge_points(t, m2)
    if not edge.full_circle:
        x, wx = np.polynomial.legendre.leggauss(n_nodes)
        phi = 0.5 * np.pi * (x + 1)
        theta = edge.theta_edge * np.cos(phi)
        w = 0.5 * np.pi * wx * edge.theta_edge * np.sin(phi)
    elif abs(tau - 4) < 1e-12:
        x, wx = np.polynomial.legendre.leggauss(n_nodes // 2)
        s = 0.5 * (x + 1)
        half = np.pi - np.pi * s**3
        wh = 0.5 * wx * 3 * np.pi * s**2
        theta = np.concatenate([-half, half])
        w = np.concatenate([wh, wh])
    else:
        n = max(n_nodes, 2048)
        theta = -np.pi + 2 * np.pi * np.arange(1, n + 1) / n
        w = np.full(n, 2 * np.pi / n)
    order = np.argsort(theta)
    theta, w = theta[order], w[order]
    keep = (theta > -np.pi) & (theta <= np.pi)
    return theta[keep], w[keep]


def density_quadrature(t: float, m2: float, n_nodes: int = 400):
    """``(theta, weights, rho)``: :func:`quadrature_nodes` plus the density there."""
    theta, w = quadrature_nodes(t, m2, n_nodes)
    sol = density(t, m2, theta)
    return theta, w, sol.rho_values
