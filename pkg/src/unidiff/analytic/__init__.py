"""Large-N spectral law of the product: resolvent, density, moments, edges."""

from .moments import (
    MomentSource,
    MomentTable,
    analytic_moments,
    density_from_moments,
    laguerre_moments,
    moment_series,
    tail_bound,
)
from .resolvent import (
    BranchLossError,
    ResolventSolution,
    default_grid,
    density,
    green,
    residual,
    solve_f,
    solve_f_exterior,
)
from .support import (
    CRITICAL_COEFFICIENT,
    EdgePoints,
    critical_time,
    density_quadrature,
    edge_points,
    near_critical_profile,
    quadrature_nodes,
    s_transform,
    s_transform_check,
)

__all__ = [
    "MomentSource",
    "MomentTable",
    "analytic_moments",
    "density_from_moments",
    "laguerre_moments",
    "moment_series",
    "tail_bound",
    "BranchLossError",
    "ResolventSolution",
    "default_grid",
    "density",
    "green",
    "residual",
    "solve_f",
    "solve_f_exterior",
    "CRITICAL_COEFFICIENT",
    "EdgePoints",
    "critical_time",
    "density_quadrature",
    "edge_points",
    "near_critical_profile",
    "quadrature_nodes",
    "s_transform",
    "s_transform_check",
]
