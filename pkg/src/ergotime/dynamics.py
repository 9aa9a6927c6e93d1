"""Continuous-time vehicle models and discrete integration schemes.

Each model bundles the flow ``xdot = f(x, u)``, its analytic Jacobians, and
the index list realizing the state-to-workspace map ``g(x) = x[selector]``.
Flows broadcast over a leading batch axis so a whole trajectory evaluates
in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ContractError


class IntegratorKind(str, Enum):
    EULER = "explicit-euler"
    RK4 = "rk4"


@dataclass(frozen=True)
class DynamicsModel:
    """Immutable control-affine-or-not model descriptor.

    ``flow(x, u)`` maps ``(..., n), (..., m) -> (..., n)``;
    ``flow_jacobians(x, u)`` returns ``(A, B)`` with shapes ``(..., n, n)``
    and ``(..., n, m)``.  ``g_selector`` lists the state indices that form
    the workspace position.
    """

    name: str
    state_dim: int
    control_dim: int
    flow: callable = field(repr=False)
    flow_jacobians: callable = field(repr=False)
    g_selector: tuple
    state_labels: tuple = ()
    control_labels: tuple = ()

    def __post_init__(self):
        sel = tuple(int(i) for i in self.g_selector)
        if len(set(sel)) != len(sel):
            raise ContractError(f"g_selector has duplicate indices: {sel}")
        if any(i < 0 or i >= self.state_dim for i in sel):
            raise ContractError(
                f"g_selector {sel} out of range for state dimension {self.state_dim}"
            )
        object.__setattr__(self, "g_selector", sel)

    def g(self, x):
        """Workspace position(s) of state(s) ``x``."""
        return np.asarray(x, dtype=float)[..., self.g_selector]


# ---------------------------------------------------------------------------
# Model factories
# ---------------------------------------------------------------------------

def double_integrator_2d() -> DynamicsModel:
    """Planar point mass: positions (px, py), velocities (vx, vy), accel input."""

    def flow(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return np.concatenate([x[..., 2:4], u], axis=-1)

    def flow_jacobians(x, u):
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        A = np.zeros(batch + (4, 4))
        A[..., 0, 2] = 1.0
        A[..., 1, 3] = 1.0
        B = np.zeros(batch + (4, 2))
        B[..., 2, 0] = 1.0
        B[..., 3, 1] = 1.0
        return A, B

    return DynamicsModel(
        name="double-integrator-2d",
        state_dim=4,
        control_dim=2,
        flow=flow,
        flow_jacobians=flow_jacobians,
        g_selector=(0, 1),
        state_labels=("px", "py", "vx", "vy"),
        control_labels=("ax", "ay"),
    )


def double_integrator_1d() -> DynamicsModel:
    """Scalar double integrator (position, velocity, accel input).

    Mainly a verification vehicle: its minimum-time solutions are known in
    closed form (bang-bang), which the optimality checker is tested against.
    """

    def flow(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return np.concatenate([x[..., 1:2], u], axis=-1)

    def flow_jacobians(x, u):
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        A = np.zeros(batch + (2, 2))
        A[..., 0, 1] = 1.0
        B = np.zeros(batch + (2, 1))
        B[..., 1, 0] = 1.0
        return A, B

    return DynamicsModel(
        name="double-integrator-1d",
        state_dim=2,
        control_dim=1,
        flow=flow,
        flow_jacobians=flow_jacobians,
        g_selector=(0,),
        state_labels=("p", "v"),
        control_labels=("a",),
    )


def single_integrator_2d() -> DynamicsModel:
    """Planar kinematic point: velocity is the control."""

    def flow(x, u):
        u = np.asarray(u, dtype=float)
        return u.copy()

    def flow_jacobians(x, u):
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        A = np.zeros(batch + (2, 2))
        B = np.broadcast_to(np.eye(2), batch + (2, 2)).copy()
        return A, B

    return DynamicsModel(
        name="single-integrator-2d",
        state_dim=2,
        control_dim=2,
        flow=flow,
        flow_jacobians=flow_jacobians,
        g_selector=(0, 1),
        state_labels=("px", "py"),
        control_labels=("vx", "vy"),
    )


def aircraft_3d() -> DynamicsModel:
    """Fixed-wing point model: position (x, y, z), heading psi, pitch phi,
    speed v; controls drive the (psi, phi, v) rates."""

    def flow(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        psi, phi, v = x[..., 3], x[..., 4], x[..., 5]
        pos_dot = np.stack(
            [
                v * np.cos(phi) * np.cos(psi),
                v * np.cos(phi) * np.sin(psi),
                v * np.sin(phi),
            ],
            axis=-1,
        )
        return np.concatenate([pos_dot, u], axis=-1)

    def flow_jacobians(x, u):
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        psi, phi, v = x[..., 3], x[..., 4], x[..., 5]
        cpsi, spsi = np.cos(psi), np.sin(psi)
        cphi, sphi = np.cos(phi), np.sin(phi)
        A = np.zeros(batch + (6, 6))
        A[..., 0, 3] = -v * cphi * spsi
        A[..., 0, 4] = -v * sphi * cpsi
        A[..., 0, 5] = cphi * cpsi
        A[..., 1, 3] = v * cphi * cpsi
        A[..., 1, 4] = -v * sphi * spsi
        A[..., 1, 5] = cphi * spsi
        A[..., 2, 4] = v * cphi
        A[..., 2, 5] = sphi
        B = np.zeros(batch + (6, 3))
        B[..., 3, 0] = 1.0
        B[..., 4, 1] = 1.0
        B[..., 5, 2] = 1.0
        return A, B

    return DynamicsModel(
        name="aircraft-3d",
        state_dim=6,
        control_dim=3,
        flow=flow,
        flow_jacobians=flow_jacobians,
        g_selector=(0, 1, 2),
        state_labels=("x", "y", "z", "psi", "phi", "v"),
        control_labels=("psi_rate", "phi_rate", "v_rate"),
    )


MODELS = {
    m().name: m
    for m in (double_integrator_2d, double_integrator_1d, single_integrator_2d, aircraft_3d)
}


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def step(model: DynamicsModel, x, u, dt: float, scheme: IntegratorKind = IntegratorKind.EULER):
    """One discrete step of ``dt`` seconds.

    Explicit Euler is ``x + dt * f(x, u)`` exactly; rk4 is the classical
    four-stage scheme.  Broadcasts over a leading batch axis.
    """
    if dt <= 0:
        raise ContractError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    scheme = IntegratorKind(scheme)
    if scheme == IntegratorKind.EULER:
        return x + dt * model.flow(x, u)
    k1 = model.flow(x, u)
    k2 = model.flow(x + 0.5 * dt * k1, u)
    k3 = model.flow(x + 0.5 * dt * k2, u)
    k4 = model.flow(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_with_jacobians(
    model: DynamicsModel, x, u, dt: float, scheme: IntegratorKind = IntegratorKind.EULER
):
    """Step plus analytic derivatives of the landing state.

    Returns ``(x_next, S_x, S_u, S_dt)`` where ``S_x = d step / d x`` has
    shape ``(..., n, n)``, ``S_u = d step / d u`` has ``(..., n, m)``, and
    ``S_dt = d step / d dt`` has ``(..., n)``.
    """
    if dt <= 0:
        raise ContractError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    scheme = IntegratorKind(scheme)
    n = model.state_dim
    eye = np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n))
    if scheme == IntegratorKind.EULER:
        f = model.flow(x, u)
        A, B = model.flow_jacobians(x, u)
        return x + dt * f, eye + dt * A, dt * B, f

    # rk4: chain rule through the four stages
    k1 = model.flow(x, u)
    A1, B1 = model.flow_jacobians(x, u)
    x2 = x + 0.5 * dt * k1
    k2 = model.flow(x2, u)
    A2, B2 = model.flow_jacobians(x2, u)
    x3 = x + 0.5 * dt * k2
    k3 = model.flow(x3, u)
    A3, B3 = model.flow_jacobians(x3, u)
    x4 = x + dt * k3
    k4 = model.flow(x4, u)
    A4, B4 = model.flow_jacobians(x4, u)

    dk1_dx = A1
    dk2_dx = A2 @ (eye + 0.5 * dt * dk1_dx)
    dk3_dx = A3 @ (eye + 0.5 * dt * dk2_dx)
    dk4_dx = A4 @ (eye + dt * dk3_dx)
    S_x = eye + (dt / 6.0) * (dk1_dx + 2.0 * dk2_dx + 2.0 * dk3_dx + dk4_dx)

    dk1_du = B1
    dk2_du = B2 + 0.5 * dt * (A2 @ dk1_du)
    dk3_du = B3 + 0.5 * dt * (A3 @ dk2_du)
    dk4_du = B4 + dt * (A4 @ dk3_du)
    S_u = (dt / 6.0) * (dk1_du + 2.0 * dk2_du + 2.0 * dk3_du + dk4_du)

    def mv(M, vec):
        return np.einsum("...ij,...j->...i", M, vec)

    dk1_dt = np.zeros_like(k1)
    dk2_dt = mv(A2, 0.5 * k1 + 0.5 * dt * dk1_dt)
    dk3_dt = mv(A3, 0.5 * k2 + 0.5 * dt * dk2_dt)
    dk4_dt = mv(A4, k3 + dt * dk3_dt)
    S_dt = (1.0 / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) + (dt / 6.0) * (
        dk1_dt + 2.0 * dk2_dt + 2.0 * dk3_dt + dk4_dt
    )
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), S_x, S_u, S_dt
