"""Cosine Fourier basis, spectral trajectory statistics, and the ergodic metric.

The coverage quality of a trajectory is measured spectrally: the
time-average of the trajectory's workspace positions is expanded in a
cosine basis over the exploration box, and compared coefficient by
coefficient against the expansion of a target information density.  The
weighted sum of squared coefficient gaps is the ergodic metric.  An
equivalent running-integral form (the accumulated coefficient defect ``z``)
turns the metric into a terminal quantity, which is what the
optimality-condition checker consumes.

Everything here is a pure function of immutable inputs; the vectorised
helpers (``basis_matrix`` and friends) are what the transcription layer
uses in its hot loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError

# Tolerance for "inside the workspace" checks on evaluation points.
CONTAINMENT_TOL = 1e-9


# ---------------------------------------------------------------------------
# Workspace
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Workspace:
    """Bounded axis-aligned exploration box.

    Parameters
    ----------
    lengths : array-like of float
        Side length per axis, strictly positive (meters).
    offsets : array-like of float, optional
        Lower bound per axis.  Defaults to zero on every axis; non-zero
        offsets let scenarios use boxes such as ``[0, 3.5] x [-1, 3.5]``
        by translation.
    """

    lengths: np.ndarray
    offsets: np.ndarray = None

    def __post_init__(self):
        lengths = np.atleast_1d(np.asarray(self.lengths, dtype=float))
        if lengths.ndim != 1 or lengths.size < 1:
            raise ContractError("workspace lengths must be a 1-D vector")
        if np.any(lengths <= 0):
            raise ContractError(f"workspace lengths must be positive, got {lengths}")
        if self.offsets is None:
            offsets = np.zeros_like(lengths)
        else:
            offsets = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if offsets.shape != lengths.shape:
            raise ContractError(
                f"offsets shape {offsets.shape} != lengths shape {lengths.shape}"
            )
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "offsets", offsets)

    @property
    def dims(self) -> int:
        return self.lengths.size

    @property
    def upper(self) -> np.ndarray:
        return self.offsets + self.lengths

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, w, tol: float = CONTAINMENT_TOL) -> bool:
        w = np.asarray(w, dtype=float)
        return bool(
            np.all(w >= self.offsets - tol) and np.all(w <= self.upper + tol)
        )

    def require_inside(self, w, tol: float = CONTAINMENT_TOL, label: str = "point"):
        """Raise :class:`DomainError` naming the violating coordinate."""
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.dims:
            raise ContractError(
                f"{label} has {w.shape[-1]} coordinates, workspace has {self.dims}"
            )
        low = w < self.offsets - tol
        high = w > self.upper + tol
        if low.any() or high.any():
            axis = int(np.argmax(low | high))
            value = float(np.atleast_1d(w[..., axis]).ravel()[0]) if w.ndim == 1 else None
            detail = f"coordinate {axis}"
            if value is not None:
                detail += f" = {value}"
            raise DomainError(
                f"{label} outside workspace on {detail}; bounds are "
                f"[{self.offsets[axis]}, {self.upper[axis]}]"
            )


# ---------------------------------------------------------------------------
# Basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisIndex:
    """One cosine mode: multi-index ``k``, normalizer ``h_k``, weight ``lambda_k``.

    ``lambda_k = (1 + ||k||_2) ** (-(v+1)/2)`` down-weights high-frequency
    modes; ``h_k`` scales the mode so the family is orthonormal on the box
    (or is 1 under the alternate "unit" convention).
    """

    k: tuple
    h_k: float
    lambda_k: float

    def __post_init__(self):
        if self.h_k <= 0:
            raise ContractError(f"h_k must be positive, got {self.h_k}")


def _normalizers(ks: np.ndarray, lengths: np.ndarray, convention: str) -> np.ndarray:
    if convention == "orthonormal":
        # effective length is L_i for the constant factor, L_i/2 otherwise
        eff = np.where(ks == 0, lengths[np.newaxis, :], lengths[np.newaxis, :] / 2.0)
        return np.sqrt(np.prod(eff, axis=1))
    if convention == "unit":
        return np.ones(ks.shape[0])
    raise ContractError(f"unknown normalizer convention {convention!r}")


@dataclass(frozen=True)
class BasisSet:
    """All modes ``0 <= k_i < k_max`` in deterministic row-major order.

    Carries dense arrays (``ks``, ``h``, ``lam``) alongside the per-index
    records so vectorised evaluation never rebuilds them.
    """

    indices: tuple
    k_max: int
    ks: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.ks.shape[0]

    @staticmethod
    def build(ws: Workspace, k_max: int, normalizer: str = "orthonormal") -> "BasisSet":
        if k_max < 1:
            raise ContractError(f"k_max must be >= 1, got {k_max}")
        v = ws.dims
        grids = np.meshgrid(*[np.arange(k_max)] * v, indexing="ij")
        ks = np.stack([grid.ravel() for grid in grids], axis=1)  # row-major in k
        # scalar arithmetic so stored weights match the defining formula bitwise
        lam = np.array(
            [(1.0 + math.sqrt(float(row @ row))) ** (-(v + 1) / 2.0) for row in ks]
        )
        h = _normalizers(ks, ws.lengths, normalizer)
        indices = tuple(
            BasisIndex(tuple(int(j) for j in ks[i]), float(h[i]), float(lam[i]))
            for i in range(ks.shape[0])
        )
        return BasisSet(indices=indices, k_max=int(k_max), ks=ks, h=h, lam=lam)


# ---------------------------------------------------------------------------
# Vectorised evaluation (shared by the public ops and the transcription)
# ---------------------------------------------------------------------------

def basis_matrix(ws: Workspace, basis: BasisSet, points: np.ndarray) -> np.ndarray:
    """Evaluate every mode at every point.

    ``points`` has shape ``(T, v)``; the result has shape ``(T, K)`` with
    entry ``[t, k] = F_k(points[t])``.  No containment check: callers that
    promise in-domain points do it themselves.
    """
    points = np.asarray(points, dtype=float)
    theta = (points - ws.offsets) * (np.pi / ws.lengths)  # (T, v)
    modes = np.arange(basis.k_max, dtype=float)
    out = np.ones((points.shape[0], basis.size))
    for axis in range(ws.dims):
        # trig on the (T, k_max) per-axis table, then gather per mode
        table = np.cos(np.outer(theta[:, axis], modes))
        out *= table[:, basis.ks[:, axis]]
    out /= basis.h
    return out


def basis_matrix_and_gradient(
    ws: Workspace, basis: BasisSet, points: np.ndarray
) -> tuple:
    """Values ``(T, K)`` and gradients ``(T, K, v)`` in one pass.

    Shares the per-axis cosine/sine tables between the two outputs, which
    matters inside the optimizer where both are needed every iteration.
    """
    points = np.asarray(points, dtype=float)
    T = points.shape[0]
    v = ws.dims
    theta = (points - ws.offsets) * (np.pi / ws.lengths)
    modes = np.arange(basis.k_max, dtype=float)
    cos_ax = []
    dsin_ax = []
    for axis in range(v):
        ang = np.outer(theta[:, axis], modes)
        cos_t = np.cos(ang)
        dsin_t = np.sin(ang) * (-(modes * np.pi / ws.lengths[axis]))
        cos_ax.append(cos_t[:, basis.ks[:, axis]])
        dsin_ax.append(dsin_t[:, basis.ks[:, axis]])
    values = np.ones((T, basis.size))
    for axis in range(v):
        values *= cos_ax[axis]
    grad = np.empty((T, basis.size, v))
    for axis in range(v):
        partial = dsin_ax[axis]
        for other in range(v):
            if other != axis:
                partial = partial * cos_ax[other]
        grad[:, :, axis] = partial
    values /= basis.h
    grad /= basis.h[None, :, None]
    return values, grad


def basis_gradient_tensor(ws: Workspace, basis: BasisSet, points: np.ndarray) -> np.ndarray:
    """Gradients of every mode at every point, shape ``(T, K, v)``."""
    return basis_matrix_and_gradient(ws, basis, points)[1]


def coefficient_distance_gradient(
    ws: Workspace,
    basis: BasisSet,
    points: np.ndarray,
    c: np.ndarray,
    phi_k: np.ndarray,
) -> np.ndarray:
    """``d E / d points`` where ``E = sum_k lam_k (c_k - phi_k)^2`` and the
    coefficients are the left-Riemann average over ``N = len(points)`` knots.

    Returns shape ``(N, v)``.
    """
    N = points.shape[0]
    weights = basis.lam * (c - phi_k) * (2.0 / N)  # (K,)
    grad = basis_gradient_tensor(ws, basis, points)  # (N, K, v)
    return np.einsum("k,tkv->tv", weights, grad)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def fourier_basis(k: BasisIndex, w, ws: Workspace) -> float:
    """Value of one cosine mode at a workspace point.

    Raises :class:`DomainError` if ``w`` lies outside the box (tolerance
    ``1e-9``).  The magnitude never exceeds ``1 / h_k``.
    """
    w = np.asarray(w, dtype=float)
    ws.require_inside(w, label="basis evaluation point")
    theta = (w - ws.offsets) * np.pi / ws.lengths
    return float(np.prod(np.cos(theta * np.asarray(k.k))) / k.h_k)


def basis_gradient(k: BasisIndex, w, ws: Workspace) -> np.ndarray:
    """Analytic gradient of :func:`fourier_basis` with respect to ``w``."""
    w = np.asarray(w, dtype=float)
    ws.require_inside(w, label="basis evaluation point")
    kv = np.asarray(k.k, dtype=float)
    theta = (w - ws.offsets) * np.pi / ws.lengths
    cos_terms = np.cos(theta * kv)
    sin_terms = np.sin(theta * kv)
    grad = np.empty(ws.dims)
    for axis in range(ws.dims):
        others = np.prod(np.delete(cos_terms, axis))
        grad[axis] = -(kv[axis] * np.pi / ws.lengths[axis]) * sin_terms[axis] * others
    return grad / k.h_k


def _as_projection(g):
    """Accept either a callable state->workspace map or a selector index list."""
    if callable(g):
        return g
    sel = tuple(int(i) for i in g)

    def project(x):
        return np.asarray(x, dtype=float)[..., sel]

    return project


def _checked_points(x_knots, g, ws: Workspace, count: int) -> np.ndarray:
    project = _as_projection(g)
    x_knots = np.asarray(x_knots, dtype=float)
    if x_knots.ndim != 2 or x_knots.shape[0] < count:
        raise ContractError(
            f"need at least {count} knots, got array of shape {x_knots.shape}"
        )
    points = np.asarray(project(x_knots[:count]), dtype=float)
    low = points < ws.offsets - CONTAINMENT_TOL
    high = points > ws.upper + CONTAINMENT_TOL
    bad = low | high
    if bad.any():
        knot, axis = np.argwhere(bad)[0]
        raise DomainError(
            f"knot {knot} maps outside workspace on coordinate {axis} "
            f"(value {points[knot, axis]}, bounds "
            f"[{ws.offsets[axis]}, {ws.upper[axis]}])"
        )
    return points


def trajectory_coefficients(x_knots, g, ws: Workspace, basis: BasisSet, N: int) -> np.ndarray:
    """Spectral coefficients of the discrete time-average over knots ``0..N-1``.

    ``c_k = (1/N) * sum_t F_k(g(x_t))`` -- the left-Riemann discretisation,
    under which the final time cancels out of the coefficients entirely.
    """
    if N < 1:
        raise ContractError(f"N must be >= 1, got {N}")
    points = _checked_points(x_knots, g, ws, N)
    return basis_matrix(ws, basis, points).mean(axis=0)


def ergodic_metric(c: np.ndarray, phi_k: np.ndarray, basis: BasisSet) -> float:
    """Weighted squared distance between trajectory and density coefficients.

    Nonnegative; exactly zero iff the coefficient vectors coincide.
    """
    c = np.asarray(c, dtype=float)
    phi_k = np.asarray(phi_k, dtype=float)
    if c.shape != (basis.size,) or phi_k.shape != (basis.size,):
        raise ContractError(
            f"coefficient lengths {c.shape}/{phi_k.shape} do not match basis size {basis.size}"
        )
    diff = c - phi_k
    return float(np.dot(basis.lam, diff * diff))


@dataclass(frozen=True)
class ExtendedErgodicState:
    """Accumulated coefficient defect ``z`` at the final time.

    ``z`` integrates ``F_k(g(x(t))) - phi_k`` from a zero initial condition;
    its weighted squared norm divided by ``t_f^2`` recovers the ergodic
    metric when both use the same quadrature.
    """

    z: np.ndarray


def extended_state_terminal(
    x_knots, phi_k, g, ws: Workspace, basis: BasisSet, N: int, t_f: float
) -> ExtendedErgodicState:
    """Terminal value of the accumulated coefficient defect.

    ``z_k = sum_{t=0}^{N-1} (F_k(g(x_t)) - phi_k) * dt`` with ``dt = t_f/N``.
    """
    if t_f <= 0:
        raise ContractError(f"t_f must be positive, got {t_f}")
    if N < 1:
        raise ContractError(f"N must be >= 1, got {N}")
    phi_k = np.asarray(phi_k, dtype=float)
    if phi_k.shape != (basis.size,):
        raise ContractError(
            f"phi_k length {phi_k.shape} does not match basis size {basis.size}"
        )
    points = _checked_points(x_knots, g, ws, N)
    F = basis_matrix(ws, basis, points)
    dt = t_f / N
    z = (F - phi_k).sum(axis=0) * dt
    return ExtendedErgodicState(z=z)


def metric_from_extended_state(state: ExtendedErgodicState, basis: BasisSet, t_f: float) -> float:
    """``(1/t_f^2) ||z||^2_lam`` -- the terminal-cost form of the metric."""
    z = state.z
    return float(np.dot(basis.lam, z * z)) / (t_f * t_f)
