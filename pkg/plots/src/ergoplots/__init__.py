"""Figure rendering for exported trajectory and sweep artifacts."""

from .artifacts import (
    ArtifactError,
    Sweep,
    Trajectory,
    density_grid,
    load_sweep,
    load_trajectory,
    obstacle_outline,
)
from .render import RenderResult, gamma_curve, sweep_table, trajectory_heatmap

__all__ = [
    "ArtifactError",
    "RenderResult",
    "Sweep",
    "Trajectory",
    "density_grid",
    "gamma_curve",
    "load_sweep",
    "load_trajectory",
    "obstacle_outline",
    "sweep_table",
    "trajectory_heatmap",
]
