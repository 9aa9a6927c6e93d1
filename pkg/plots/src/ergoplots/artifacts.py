"""Load and validate the exported artifact files.

This package reads only the documented JSON/CSV contract; it never links
against the solver. Anything that fails schema validation raises
:class:`ArtifactError` with a message naming the file and the problem.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

_TRAJECTORY_KEYS = {
    "schema_version", "scenario", "t_f", "position_columns",
    "x_knots", "u_knots", "ergodic_metric",
}
_SWEEP_COLUMNS = {
    "parameter", "value", "t_f", "ergodic_metric",
    "feasible", "converged", "wall_time_s", "error",
}


class ArtifactError(ValueError):
    """The input file does not match the documented artifact contract."""


@dataclass(frozen=True)
class Trajectory:
    """One exported solve: the scenario echo plus the knot arrays."""

    path: Path
    scenario: dict
    t_f: float
    positions: np.ndarray      # (N+1, v) workspace-projected knots
    u_knots: np.ndarray        # (N, m)
    ergodic_metric: float

    @property
    def control_cost(self) -> float:
        # time-normalized effort (1/t_f) * sum ||u_t|| dt = mean ||u_t||
        return float(np.linalg.norm(self.u_knots, axis=1).mean())


def load_trajectory(path) -> Trajectory:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"{path}: not a readable JSON artifact ({exc})")
    missing = _TRAJECTORY_KEYS - set(payload)
    if missing:
        raise ArtifactError(f"{path}: missing artifact fields {sorted(missing)}")
    if payload["schema_version"] != SCHEMA_VERSION:
        raise ArtifactError(
            f"{path}: schema_version {payload['schema_version']} "
            f"(this tool reads {SCHEMA_VERSION})"
        )
    x = np.asarray(payload["x_knots"], dtype=float)
    u = np.asarray(payload["u_knots"], dtype=float)
    cols = list(payload["position_columns"])
    if x.ndim != 2 or u.ndim != 2 or x.shape[0] != u.shape[0] + 1:
        raise ArtifactError(f"{path}: knot arrays have inconsistent shapes")
    if any(not 0 <= c < x.shape[1] for c in cols):
        raise ArtifactError(f"{path}: position_columns {cols} outside state")
    return Trajectory(
        path=path,
        scenario=dict(payload["scenario"]),
        t_f=float(payload["t_f"]),
        positions=x[:, cols],
        u_knots=u,
        ergodic_metric=float(payload["ergodic_metric"]),
    )


@dataclass(frozen=True)
class Sweep:
    """Parsed sweep CSV: per-value rows plus the appended summary rows."""

    path: Path
    parameter: str
    rows: tuple          # dicts with typed value/t_f/ergodic_metric fields
    summary: tuple       # (name, value) pairs


def load_sweep(path) -> Sweep:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) != _SWEEP_COLUMNS:
                raise ArtifactError(
                    f"{path}: expected sweep columns {sorted(_SWEEP_COLUMNS)}, "
                    f"got {reader.fieldnames}"
                )
            raw = list(reader)
    except OSError as exc:
        raise ArtifactError(f"{path}: not a readable sweep CSV ({exc})")
    rows = []
    summary = []
    for r in raw:
        if r["parameter"] == "summary":
            summary.append((r["value"], float(r["t_f"])))
            continue
        rows.append(
            {
                "parameter": r["parameter"],
                "value": float(r["value"]),
                "t_f": float(r["t_f"]),
                "ergodic_metric": float(r["ergodic_metric"]),
                "feasible": r["feasible"] == "True",
                "converged": r["converged"] == "True",
                "wall_time_s": float(r["wall_time_s"]),
                "error": r["error"],
            }
        )
    if not rows:
        raise ArtifactError(f"{path}: sweep CSV has no data rows")
    parameter = rows[0]["parameter"]
    return Sweep(path=path, parameter=parameter, rows=tuple(rows), summary=tuple(summary))


def density_grid(scenario: dict, resolution: int = 200):
    """Evaluate the echoed information density on a workspace grid.

    Returns ``(xs, ys, values)`` for 2-D workspaces. The mixture density is
    unnormalized (rendering only needs relative mass).
    """
    ws = scenario.get("workspace", {})
    lengths = np.asarray(ws.get("lengths", ()), dtype=float)
    offsets = np.asarray(ws.get("offsets", np.zeros_like(lengths)), dtype=float)
    if lengths.size != 2:
        raise ArtifactError(
            f"heatmaps need a 2-D workspace, scenario has {lengths.size} dims"
        )
    xs = np.linspace(offsets[0], offsets[0] + lengths[0], resolution)
    ys = np.linspace(offsets[1], offsets[1] + lengths[1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    dist = scenario.get("distribution", {"kind": "uniform"})
    kind = dist.get("kind")
    if kind == "uniform":
        values = np.ones_like(gx)
    elif kind == "gaussian-mixture":
        centers = np.asarray(dist["centers"], dtype=float)
        bw = float(dist["bandwidth"])
        pts = np.stack([gx, gy], axis=-1)[..., np.newaxis, :]   # (ry, rx, 1, 2)
        d2 = ((pts - centers) ** 2).sum(axis=-1)                # (ry, rx, n)
        values = np.exp(-0.5 * d2 / bw**2).sum(axis=-1)
    elif kind == "gridded":
        values = np.asarray(dist["values"], dtype=float)
        if values.ndim != 2:
            raise ArtifactError("gridded density must be a 2-D value table")
    else:
        raise ArtifactError(f"unknown density kind {kind!r}")
    return xs, ys, values


def obstacle_outline(obstacle: dict, samples: int = 200) -> np.ndarray:
    """Boundary polyline of one echoed obstacle, shape ``(samples, 2)``.

    The barrier bounds the quartic superellipse |xi/h|_4 <= 1 in the box
    frame, so the outline traces that level set rather than the rectangle.
    """
    center = np.asarray(obstacle["center"], dtype=float)
    half = np.asarray(obstacle["half_extents"], dtype=float)
    theta = float(obstacle.get("rotation") or 0.0)
    t = np.linspace(0.0, 2.0 * np.pi, samples)
    # superellipse parameterization: |cos|^(1/2) carries the L4 exponent
    bx = half[0] * np.sign(np.cos(t)) * np.abs(np.cos(t)) ** 0.5
    by = half[1] * np.sign(np.sin(t)) * np.abs(np.sin(t)) ** 0.5
    rot = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )
    return center + np.stack([bx, by], axis=1) @ rot.T
