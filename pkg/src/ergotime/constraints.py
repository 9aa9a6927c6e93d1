"""Constraint data and residual functions for the transcribed program.

Covers the rounded-box obstacle barrier, the discrete control-barrier
condition, and the full residual bundle: dynamics defects and boundary
conditions as equalities, and (in ``<= 0`` convention) control bounds,
workspace containment, barrier decrease, the ergodic bound, and the
final-time floor as inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .dynamics import DynamicsModel, IntegratorKind, step
from .errors import ContractError

if TYPE_CHECKING:
    from .problem import DecisionVector, ProblemSpec


# ---------------------------------------------------------------------------
# Obstacles and barrier geometry
# ---------------------------------------------------------------------------

def _rotation_matrix(rotation, dims: int) -> np.ndarray:
    if rotation is None:
        return np.eye(dims)
    if np.isscalar(rotation):
        if dims != 2:
            raise ContractError("scalar rotation angle is only meaningful in 2-D")
        c, s = np.cos(rotation), np.sin(rotation)
        return np.array([[c, -s], [s, c]])
    R = np.asarray(rotation, dtype=float)
    if R.shape != (dims, dims):
        raise ContractError(f"rotation matrix shape {R.shape} != ({dims}, {dims})")
    if not np.allclose(R @ R.T, np.eye(dims), atol=1e-9):
        raise ContractError("rotation matrix is not orthonormal")
    return R


@dataclass(frozen=True)
class Obstacle:
    """Rotated rounded box: center, per-axis half extents, orientation.

    ``rotation`` is an angle in radians (2-D), a full rotation matrix, or
    None for axis-aligned.  The matrix maps body axes into the world frame.
    """

    center: np.ndarray
    half_extents: np.ndarray
    rotation: object = None

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        half = np.atleast_1d(np.asarray(self.half_extents, dtype=float))
        if center.shape != half.shape:
            raise ContractError("center and half_extents must have equal length")
        if np.any(half <= 0):
            raise ContractError(f"half_extents must be positive, got {half}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_extents", half)
        object.__setattr__(
            self, "rotation_matrix", _rotation_matrix(self.rotation, center.size)
        )

    rotation_matrix: np.ndarray = field(init=False, repr=False)


def l4_barrier(obs: Obstacle, p) -> float:
    """Signed clearance ``||D R^T (p - center)||_4 - 1``.

    Positive outside the rounded box, zero on its surface, -1 at the
    center.  ``D = diag(1 / half_extents)``; ``R`` maps body to world, so
    points are pulled into the body frame before scaling.
    """
    return float(barrier_values(obs, np.atleast_2d(np.asarray(p, dtype=float)))[0])


def barrier_values(obs: Obstacle, points: np.ndarray) -> np.ndarray:
    """Vectorised :func:`l4_barrier` over ``(T, v)`` points."""
    q = (points - obs.center) @ obs.rotation_matrix / obs.half_extents
    q2 = q * q
    return np.sqrt(np.sqrt((q2 * q2).sum(axis=-1))) - 1.0


def barrier_gradients(obs: Obstacle, points: np.ndarray) -> np.ndarray:
    """Gradients of the barrier at each point, shape ``(T, v)``.

    The barrier is non-smooth only at the center; there the gradient is
    reported as zero rather than raising.
    """
    q = (points - obs.center) @ obs.rotation_matrix / obs.half_extents
    q2 = q * q
    norm4 = np.sqrt(np.sqrt((q2 * q2).sum(axis=-1)))
    cubed = q2 * q
    denom = np.where(norm4 > 0, norm4**3, 1.0)
    dq = cubed / denom[..., np.newaxis]
    dq[norm4 == 0] = 0.0
    return dq / obs.half_extents @ obs.rotation_matrix.T


@dataclass(frozen=True)
class CbfParams:
    """Discrete barrier-decrease parameters.

    ``alpha`` in (0, 1] is the allowed per-step shrinkage of the barrier
    value.  ``margin`` demands that much slack on every barrier-decrease
    residual; a few millimeters here keeps converged trajectories strictly
    clear of obstacle surfaces despite the solver's feasibility tolerance.
    """

    alpha: float = 0.1
    margin: float = 0.0

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise ContractError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.margin < 0:
            raise ContractError(f"margin must be nonnegative, got {self.margin}")


@dataclass(frozen=True)
class ConstraintSet:
    """Constraint data of one problem instance.

    ``gamma`` is the ergodic upper bound (None in the fixed-time baseline,
    which never reads it).  ``xf`` of None disables the terminal equality.
    Control bounds are per-component boxes.
    """

    gamma: float
    u_lower: np.ndarray
    u_upper: np.ndarray
    x0: np.ndarray
    xf: np.ndarray = None
    obstacles: tuple = ()
    cbf: CbfParams = CbfParams()
    tf_floor: float = 0.01

    def __post_init__(self):
        if self.gamma is not None and not (self.gamma > 0):
            raise ContractError(f"gamma must be positive, got {self.gamma}")
        if not (self.tf_floor > 0):
            raise ContractError(f"tf_floor must be positive, got {self.tf_floor}")
        lo = np.atleast_1d(np.asarray(self.u_lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.u_upper, dtype=float))
        if lo.shape != hi.shape:
            raise ContractError("u_lower and u_upper must have equal length")
        if np.any(lo >= hi):
            raise ContractError(f"need u_lower < u_upper, got {lo} vs {hi}")
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        xf = None if self.xf is None else np.atleast_1d(np.asarray(self.xf, dtype=float))
        if xf is not None and xf.shape != x0.shape:
            raise ContractError("x0 and xf must have equal length")
        object.__setattr__(self, "u_lower", lo)
        object.__setattr__(self, "u_upper", hi)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xf", xf)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))


def cbf_residual(
    obs: Obstacle,
    x_t,
    u_t,
    model: DynamicsModel,
    dt: float,
    cbf: CbfParams,
    g=None,
    scheme: IntegratorKind = IntegratorKind.EULER,
) -> float:
    """Discrete barrier-decrease residual for one knot transition.

    ``h(g(step(x_t, u_t, dt))) - (1 - alpha) h(g(x_t))``; nonnegative
    means the step respects the barrier condition.  ``g`` defaults to the
    model's workspace selector; the step uses the transcription's scheme.
    """
    if g is None:
        g = model.g
    elif not callable(g):
        from .ergodic import _as_projection

        g = _as_projection(g)
    x_t = np.asarray(x_t, dtype=float)
    x_next = step(model, x_t, np.asarray(u_t, dtype=float), dt, scheme)
    h_now = l4_barrier(obs, g(x_t))
    h_next = l4_barrier(obs, g(x_next))
    return h_next - (1.0 - cbf.alpha) * h_now


# ---------------------------------------------------------------------------
# Residual bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BundleLayout:
    """Named slices into the equality and inequality residual vectors.

    Ordering is fixed and documented:

    equalities
        ``init``      x_0 - x0                               (n rows)
        ``defects``   x_{t+1} - step(x_t, u_t, dt), t=0..N-1 (N*n rows)
        ``terminal``  x_N - xf, when terminal equality is on (n rows)

    inequalities (feasible iff <= 0)
        ``u_upper``   u_t - u_max         row-major over (t, component)
        ``u_lower``   u_min - u_t
        ``ws_upper``  g(x_t) - upper      over knots t=0..N
        ``ws_lower``  lower - g(x_t)
        ``cbf``       margin - residual   obstacle-major over (obstacle, t)
        ``ergodic``   E_hat - gamma       (1 row, time-optimal with a bound)
        ``tf_floor``  tf_floor - t_f      (1 row, time-optimal mode)
    """

    eq: dict
    ineq: dict
    n_eq: int
    n_ineq: int


@dataclass(frozen=True)
class ResidualBundle:
    eq: np.ndarray
    ineq: np.ndarray
    layout: BundleLayout

    @property
    def max_eq(self) -> float:
        return float(np.abs(self.eq).max()) if self.eq.size else 0.0

    @property
    def max_ineq(self) -> float:
        return float(self.ineq.max(initial=0.0))


def bundle_layout(spec: "ProblemSpec") -> BundleLayout:
    n, m, N = spec.model.state_dim, spec.model.control_dim, spec.N
    v = spec.ws.dims
    eq = {}
    pos = 0
    eq["init"] = slice(pos, pos + n)
    pos += n
    eq["defects"] = slice(pos, pos + N * n)
    pos += N * n
    if spec.constraints.xf is not None:
        eq["terminal"] = slice(pos, pos + n)
        pos += n
    n_eq = pos
    ineq = {}
    pos = 0
    for name, size in (
        ("u_upper", N * m),
        ("u_lower", N * m),
        ("ws_upper", (N + 1) * v),
        ("ws_lower", (N + 1) * v),
        ("cbf", len(spec.constraints.obstacles) * N),
    ):
        ineq[name] = slice(pos, pos + size)
        pos += size
    if spec.time_optimal:
        if spec.constraints.gamma is not None:
            ineq["ergodic"] = slice(pos, pos + 1)
            pos += 1
        ineq["tf_floor"] = slice(pos, pos + 1)
        pos += 1
    return BundleLayout(eq=eq, ineq=ineq, n_eq=n_eq, n_ineq=pos)


def residual_bundle(decision: "DecisionVector", spec: "ProblemSpec") -> ResidualBundle:
    """All constraint residuals of the transcribed program at one decision.

    See :class:`BundleLayout` for the row order.  Dimension mismatches
    raise a contract error; residuals are evaluated without workspace
    domain checks so infeasible iterates stay representable (containment
    violations show up in the ``ws_*`` rows instead).
    """
    from ._eval import Assembly

    return Assembly(decision, spec).bundle
