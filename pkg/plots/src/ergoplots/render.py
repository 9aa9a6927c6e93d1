"""The three figure kinds rendered from exported artifacts.

Every renderer is a pure function of its input files: it parses, draws,
writes one image, and returns the data it plotted so callers (and tests)
can check the figure against the source values without image decoding.
"""

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import numpy as np

from .artifacts import (
    ArtifactError,
    Trajectory,
    density_grid,
    load_sweep,
    load_trajectory,
    obstacle_outline,
)


@dataclass(frozen=True)
class RenderResult:
    """What was drawn: the output path plus the plotted series by name."""

    out_path: Path
    data: dict


def _finish(fig, out_path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path


def trajectory_heatmap(artifact_path, out_path) -> RenderResult:
    """Trajectory over the information-density heatmap, obstacles outlined."""
    traj = load_trajectory(artifact_path)
    xs, ys, values = density_grid(traj.scenario)
    fig, ax = plt.subplots(figsize=(6, 6 * (ys[-1] - ys[0]) / (xs[-1] - xs[0])))
    ax.pcolormesh(xs, ys, values, cmap="Greys", shading="auto", rasterized=True)
    px, py = traj.positions[:, 0], traj.positions[:, 1]
    ax.plot(px, py, color="tab:blue", linewidth=1.2)
    ax.plot(px[0], py[0], "o", color="tab:green", markersize=6, label="start")
    ax.plot(px[-1], py[-1], "s", color="tab:red", markersize=6, label="end")
    for obs in traj.scenario.get("obstacles", ()):
        outline = obstacle_outline(obs)
        ax.fill(outline[:, 0], outline[:, 1], color="tab:orange", alpha=0.65)
    ax.set_xlim(xs[0], xs[-1])
    ax.set_ylim(ys[0], ys[-1])
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(
        f"{traj.scenario.get('name', 'trajectory')}: "
        f"t_f = {traj.t_f:.2f} s, metric = {traj.ergodic_metric:.4f}"
    )
    ax.legend(loc="upper right", fontsize=8)
    out = _finish(fig, out_path)
    return RenderResult(out, {"positions": traj.positions, "t_f": traj.t_f})


def _match_artifacts(sweep, artifact_paths) -> list:
    """Pair every sweep row with the trajectory echoing that value."""
    trajectories = [load_trajectory(p) for p in artifact_paths]
    matched = []
    for row in sweep.rows:
        hits = [
            t for t in trajectories
            if t.scenario.get(sweep.parameter) == row["value"]
        ]
        if len(hits) != 1:
            raise ArtifactError(
                f"{sweep.path}: {len(hits)} artifacts echo "
                f"{sweep.parameter} = {row['value']} (need exactly 1)"
            )
        matched.append(hits[0])
    return matched


def gamma_curve(sweep_path, artifact_paths, out_path) -> RenderResult:
    """Optimized time and time-normalized control cost versus the bound.

    The time series is plotted exactly as stored in the sweep CSV; the
    cost series is recomputed from each matched artifact's control knots.
    """
    sweep = load_sweep(sweep_path)
    if sweep.parameter != "gamma":
        raise ArtifactError(
            f"{sweep.path}: sweep is over {sweep.parameter!r}, not gamma"
        )
    matched = _match_artifacts(sweep, artifact_paths)
    gammas = [row["value"] for row in sweep.rows]
    tfs = [row["t_f"] for row in sweep.rows]
    costs = [t.control_cost for t in matched]

    fig, ax = plt.subplots(figsize=(6, 4))
    order = np.argsort(gammas)
    g_sorted = np.asarray(gammas)[order]
    ax.plot(g_sorted, np.asarray(tfs)[order], "o-", color="tab:blue")
    ax.set_xlabel("ergodic upper bound")
    ax.set_ylabel("optimized time [s]", color="tab:blue")
    ax.set_xscale("log")
    ax2 = ax.twinx()
    ax2.plot(g_sorted, np.asarray(costs)[order], "s--", color="tab:red")
    ax2.set_ylabel("mean control effort", color="tab:red")
    ax.set_title("time and effort versus coverage bound")
    out = _finish(fig, out_path)
    return RenderResult(out, {"gamma": gammas, "t_f": tfs, "control_cost": costs})


def sweep_table(sweep_path, out_path) -> RenderResult:
    """The sweep CSV as a rendered table, summary rows included."""
    sweep = load_sweep(sweep_path)
    header = ["value", "t_f [s]", "metric", "feasible", "converged", "wall [s]"]
    cells = [
        [
            f"{row['value']:g}",
            f"{row['t_f']:.4f}",
            f"{row['ergodic_metric']:.5f}",
            str(row["feasible"]),
            str(row["converged"]),
            f"{row['wall_time_s']:.1f}",
        ]
        for row in sweep.rows
    ]
    for name, value in sweep.summary:
        cells.append([name, f"{value:.4f}", "", "", "", ""])
    fig, ax = plt.subplots(figsize=(7, 0.4 * (len(cells) + 2)))
    ax.axis("off")
    table = ax.table(cellText=cells, colLabels=header, loc="center")
    table.auto_set_font_size(False)
    table.set_fontsize(9)
    ax.set_title(f"{sweep.parameter} sweep: {sweep.path.name}")
    out = _finish(fig, out_path)
    return RenderResult(out, {"rows": [row["t_f"] for row in sweep.rows]})
