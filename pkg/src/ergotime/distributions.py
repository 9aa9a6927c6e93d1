"""Information densities over the workspace and their spectral coefficients.

Three density families: uniform, isotropic Gaussian mixtures, and gridded
rasters.  Every family is normalized to unit mass over the workspace at
construction time; coefficient computation integrates ``phi * F_k`` with a
midpoint tensor rule, specialised per family so the hot path stays a few
1-D contractions instead of a dense grid sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ergodic import BasisSet, Workspace
from .errors import ContractError

DEFAULT_RESOLUTION = 100

UNIFORM = "uniform"
GAUSSIAN_MIXTURE = "gaussian-mixture"
GRIDDED = "gridded"


@dataclass(frozen=True)
class InfoDistribution:
    """Normalized information density ``phi`` on a workspace.

    ``normalization`` is the scale factor applied to the raw (unnormalized)
    density so that it integrates to 1 over the box; it is computed once at
    construction with the same midpoint rule the coefficients use.

    Build instances through :func:`uniform`, :func:`gaussian_mixture`,
    :func:`gridded`, or :func:`gridded_from_csv`.
    """

    kind: str
    ws: Workspace
    normalization: float
    centers: np.ndarray = None      # (n_components, v), mixtures only
    bandwidth: float = None         # shared isotropic sigma, mixtures only
    weights: np.ndarray = None      # (n_components,), mixtures only
    values: np.ndarray = None       # cell-value grid, gridded only

    def __post_init__(self):
        if self.kind not in (UNIFORM, GAUSSIAN_MIXTURE, GRIDDED):
            raise ContractError(f"unknown distribution kind {self.kind!r}")
        if self.normalization <= 0 or not np.isfinite(self.normalization):
            raise ContractError(
                f"normalization must be positive and finite, got {self.normalization}"
            )


@dataclass(frozen=True)
class PhiCoefficients:
    """Spectral coefficients of a density, aligned with a basis set."""

    values: np.ndarray
    quadrature_resolution: int


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def uniform(ws: Workspace) -> InfoDistribution:
    """Constant density ``1 / volume(W)``."""
    return InfoDistribution(kind=UNIFORM, ws=ws, normalization=1.0 / ws.volume)


def _mixture_raw_axis_weights(centers, bandwidth, points_a, axis):
    # (n_components, resolution) Gaussian factors along one axis
    d = points_a[np.newaxis, :] - centers[:, axis][:, np.newaxis]
    return np.exp(-(d * d) / (2.0 * bandwidth * bandwidth))


def _axis_midpoints(ws: Workspace, resolution: int, axis: int):
    delta = ws.lengths[axis] / resolution
    return ws.offsets[axis] + (np.arange(resolution) + 0.5) * delta, delta


def gaussian_mixture(
    ws: Workspace,
    centers,
    bandwidth: float,
    weights=None,
    resolution: int = DEFAULT_RESOLUTION,
) -> InfoDistribution:
    """Sum of isotropic Gaussians ``sum_i w_i exp(-||w - c_i||^2 / (2 sigma^2))``.

    ``bandwidth`` is the shared standard deviation sigma (workspace units).
    Weights default to 1 per component.  Mass is taken over the workspace
    only, so tails outside the box are excluded by normalization.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] != ws.dims:
        raise ContractError(
            f"centers have {centers.shape[1]} coordinates, workspace has {ws.dims}"
        )
    if bandwidth <= 0:
        raise ContractError(f"bandwidth must be positive, got {bandwidth}")
    if weights is None:
        weights = np.ones(centers.shape[0])
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (centers.shape[0],):
            raise ContractError("one weight per mixture component required")
        if np.any(weights < 0):
            raise ContractError("mixture weights must be nonnegative")
    if resolution < 2:
        raise ContractError(f"resolution must be >= 2, got {resolution}")
    # separable mass: product over axes of 1-D Gaussian sums, per component
    mass_per_component = weights.copy()
    for axis in range(ws.dims):
        pts, delta = _axis_midpoints(ws, resolution, axis)
        axis_w = _mixture_raw_axis_weights(centers, bandwidth, pts, axis)
        mass_per_component *= axis_w.sum(axis=1) * delta
    mass = float(mass_per_component.sum())
    if mass <= 0:
        raise ContractError("mixture has no mass inside the workspace")
    return InfoDistribution(
        kind=GAUSSIAN_MIXTURE,
        ws=ws,
        normalization=1.0 / mass,
        centers=centers,
        bandwidth=float(bandwidth),
        weights=weights,
    )


def gridded(ws: Workspace, values) -> InfoDistribution:
    """Piecewise-constant density from a cell-value grid.

    ``values`` has one axis per workspace dimension (row-major: axis 0 of
    the array is workspace axis 0); each entry is the density value on a
    uniform cell.  Values must be nonnegative with positive total mass.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != ws.dims:
        raise ContractError(
            f"value grid has {values.ndim} axes, workspace has {ws.dims}"
        )
    if np.any(values < 0):
        raise ContractError("gridded density values must be nonnegative")
    mass = float(values.mean() * ws.volume)
    if mass <= 0:
        raise ContractError("gridded density has zero mass")
    return InfoDistribution(
        kind=GRIDDED, ws=ws, normalization=1.0 / mass, values=values
    )


def gridded_from_csv(path, ws: Workspace = None) -> InfoDistribution:
    """Load a 2-D raster density from CSV.

    First line is a header of the form
    ``# offsets=<o0>,<o1> lengths=<L0>,<L1>``; the remaining lines are the
    cell values, row-major (rows run along workspace axis 0).  A workspace
    passed explicitly must agree with the header.
    """
    with open(path) as fh:
        header = fh.readline().strip()
    fields = {}
    for token in header.lstrip("#").split():
        if "=" in token:
            key, _, raw = token.partition("=")
            fields[key] = np.array([float(s) for s in raw.split(",")])
    if "lengths" not in fields:
        raise ContractError(
            f"{path}: header must specify lengths=<L0>,<L1> (got {header!r})"
        )
    offsets = fields.get("offsets", np.zeros_like(fields["lengths"]))
    header_ws = Workspace(lengths=fields["lengths"], offsets=offsets)
    if ws is not None and (
        not np.array_equal(ws.lengths, header_ws.lengths)
        or not np.array_equal(ws.offsets, header_ws.offsets)
    ):
        raise ContractError(
            f"{path}: raster extents {header_ws.lengths}/{header_ws.offsets} "
            f"do not match the scenario workspace"
        )
    values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return gridded(header_ws, values)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_phi(dist: InfoDistribution, w):
    """Normalized density at a workspace point (or batch of points).

    Raises :class:`~ergotime.errors.DomainError` outside the box.
    """
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1
    points = w[np.newaxis, :] if single else w
    dist.ws.require_inside(points, label="density evaluation point")
    if dist.kind == UNIFORM:
        raw = np.ones(points.shape[0])
    elif dist.kind == GAUSSIAN_MIXTURE:
        d2 = ((points[:, np.newaxis, :] - dist.centers[np.newaxis, :, :]) ** 2).sum(axis=2)
        raw = np.exp(-d2 / (2.0 * dist.bandwidth**2)) @ dist.weights
    else:
        shape = np.array(dist.values.shape)
        rel = (points - dist.ws.offsets) / dist.ws.lengths
        cells = np.clip((rel * shape).astype(int), 0, shape - 1)
        raw = dist.values[tuple(cells.T)]
    out = dist.normalization * raw
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------

def _axis_cosines(ws: Workspace, k_max: int, points_a, axis: int):
    # C[k, j] = cos(k * pi * (w_j - off) / L)
    theta = (points_a - ws.offsets[axis]) * (np.pi / ws.lengths[axis])
    return np.cos(np.outer(np.arange(k_max), theta))


def _separable_coefficients(ws, basis, per_axis_1d, component_weights):
    """Assemble full coefficients from per-component 1-D axis integrals.

    ``per_axis_1d[axis]`` has shape ``(n_components, k_max)``.  The tensor
    product over axes is accumulated component by component in row-major
    mode order, matching the basis layout.
    """
    k_max = basis.k_max
    v = ws.dims
    n_comp = component_weights.size
    total = np.zeros(k_max**v)
    for i in range(n_comp):
        acc = np.array([component_weights[i]])
        for axis in range(v):
            acc = np.multiply.outer(acc, per_axis_1d[axis][i]).reshape(-1)
        total += acc
    return total


def phi_coefficients(
    dist: InfoDistribution,
    basis: BasisSet,
    ws: Workspace,
    resolution: int = DEFAULT_RESOLUTION,
) -> PhiCoefficients:
    """Midpoint-rule coefficients ``Phi_k = integral of phi * F_k over W``.

    ``resolution`` is points per axis and must be at least ``2 * k_max``
    (Nyquist-style floor).  Gridded densities integrate on their own cell
    grid, which must satisfy the same floor.
    """
    if not np.array_equal(ws.lengths, dist.ws.lengths) or not np.array_equal(
        ws.offsets, dist.ws.offsets
    ):
        raise ContractError("workspace does not match the one the density was built on")
    if dist.kind == GRIDDED:
        shape = dist.values.shape
        if min(shape) < 2 * basis.k_max:
            raise ContractError(
                f"gridded density grid {shape} is below the Nyquist floor "
                f"2*k_max = {2 * basis.k_max}"
            )
        # contract value axes front to back, appending each k axis at the end;
        # after all axes the result is indexed (k_0, ..., k_{v-1}) row-major
        acc = dist.values * (ws.volume / dist.values.size)
        for axis in range(ws.dims):
            pts, _ = _axis_midpoints(ws, shape[axis], axis)
            cos_a = _axis_cosines(ws, basis.k_max, pts, axis)
            acc = np.tensordot(acc, cos_a, axes=(0, 1))
        coeffs = dist.normalization * acc.reshape(-1)
        return PhiCoefficients(values=coeffs / basis.h, quadrature_resolution=min(shape))

    if resolution < 2 * basis.k_max:
        raise ContractError(
            f"resolution {resolution} is below the Nyquist floor 2*k_max = "
            f"{2 * basis.k_max}"
        )
    if dist.kind == UNIFORM:
        centers = np.zeros((1, ws.dims))
        weights = np.ones(1)

        def axis_weights(points_a, axis):
            return np.ones((1, points_a.size))

    else:
        centers = dist.centers
        weights = dist.weights

        def axis_weights(points_a, axis):
            return _mixture_raw_axis_weights(centers, dist.bandwidth, points_a, axis)

    per_axis = []
    for axis in range(ws.dims):
        pts, delta = _axis_midpoints(ws, resolution, axis)
        e = axis_weights(pts, axis)                      # (n_comp, res)
        cos_a = _axis_cosines(ws, basis.k_max, pts, axis)  # (k_max, res)
        per_axis.append(e @ cos_a.T * delta)             # (n_comp, k_max)
    unnormalized = _separable_coefficients(ws, basis, per_axis, weights)
    coeffs = dist.normalization * unnormalized / basis.h
    return PhiCoefficients(values=coeffs, quadrature_resolution=int(resolution))
