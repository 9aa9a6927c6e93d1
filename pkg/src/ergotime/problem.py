"""Decision variables and the assembled problem description.

A :class:`DecisionVector` is the full unknown of the transcribed program:
knot states, knot controls, and the free final time.  A
:class:`ProblemSpec` carries everything fixed: model, workspace, basis,
density coefficients, constraint data, knot count, integrator, and mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from .dynamics import DynamicsModel, IntegratorKind
from .distributions import PhiCoefficients
from .ergodic import BasisSet, Workspace
from .errors import ContractError

if TYPE_CHECKING:
    from .constraints import ConstraintSet


class Mode(str, Enum):
    TIME_OPTIMAL = "time-optimal"
    FIXED_TIME = "fixed-time-baseline"


@dataclass(frozen=True)
class DecisionVector:
    """Knot states ``(N+1, n)``, knot controls ``(N, m)``, final time."""

    x_knots: np.ndarray
    u_knots: np.ndarray
    t_f: float

    def __post_init__(self):
        x = np.asarray(self.x_knots, dtype=float)
        u = np.asarray(self.u_knots, dtype=float)
        if x.ndim != 2 or u.ndim != 2:
            raise ContractError("x_knots and u_knots must be 2-D arrays")
        if x.shape[0] != u.shape[0] + 1:
            raise ContractError(
                f"knot counts disagree: {x.shape[0]} states vs {u.shape[0]} controls"
            )
        if not (self.t_f > 0):
            raise ContractError(f"t_f must be positive, got {self.t_f}")
        object.__setattr__(self, "x_knots", x)
        object.__setattr__(self, "u_knots", u)
        object.__setattr__(self, "t_f", float(self.t_f))

    @property
    def N(self) -> int:
        return self.u_knots.shape[0]

    def pack(self) -> np.ndarray:
        """Flatten to ``[x_knots row-major, u_knots row-major, t_f]``."""
        return np.concatenate(
            [self.x_knots.ravel(), self.u_knots.ravel(), [self.t_f]]
        )

    @staticmethod
    def unpack(vec, N: int, n: int, m: int) -> "DecisionVector":
        vec = np.asarray(vec, dtype=float)
        expected = (N + 1) * n + N * m + 1
        if vec.shape != (expected,):
            raise ContractError(
                f"flat decision length {vec.shape} != expected ({expected},)"
            )
        x = vec[: (N + 1) * n].reshape(N + 1, n)
        u = vec[(N + 1) * n : -1].reshape(N, m)
        return DecisionVector(x_knots=x, u_knots=u, t_f=float(vec[-1]))


@dataclass(frozen=True)
class ProblemSpec:
    """Everything fixed about one trajectory-optimization instance.

    ``mode`` selects the objective: minimum time subject to the ergodic
    bound, or the fixed-horizon baseline (metric plus control effort) with
    ``t_f`` frozen at ``fixed_tf``.  ``R`` is the control-penalty diagonal
    and is read only in baseline mode; ``constraints.gamma`` is read only
    in time-optimal mode.
    """

    model: DynamicsModel
    ws: Workspace
    basis: BasisSet
    phi: PhiCoefficients
    constraints: "ConstraintSet"
    N: int
    integrator: IntegratorKind = IntegratorKind.EULER
    mode: Mode = Mode.TIME_OPTIMAL
    R: np.ndarray = None
    fixed_tf: float = None
    seed: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise ContractError(f"N must be >= 2, got {self.N}")
        if self.phi.values.shape != (self.basis.size,):
            raise ContractError(
                f"phi has {self.phi.values.shape} coefficients, basis has {self.basis.size}"
            )
        if len(self.model.g_selector) != self.ws.dims:
            raise ContractError(
                f"g maps to {len(self.model.g_selector)} coordinates, "
                f"workspace has {self.ws.dims}"
            )
        object.__setattr__(self, "integrator", IntegratorKind(self.integrator))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode == Mode.FIXED_TIME:
            if self.fixed_tf is None or not (self.fixed_tf > 0):
                raise ContractError("fixed-time mode requires fixed_tf > 0")
            R = np.zeros(self.model.control_dim) if self.R is None else np.atleast_1d(
                np.asarray(self.R, dtype=float)
            )
            if R.shape == (1,) and self.model.control_dim != 1:
                R = np.full(self.model.control_dim, R[0])
            if R.shape != (self.model.control_dim,):
                raise ContractError(
                    f"R diagonal has shape {R.shape}, control dimension is "
                    f"{self.model.control_dim}"
                )
            if np.any(R < 0):
                raise ContractError("R diagonal must be nonnegative")
            object.__setattr__(self, "R", R)
        # time-optimal mode with gamma=None is the pure minimum-time problem
        # (ergodic bound absent); used by the optimality-checker toy cases.

    @property
    def time_optimal(self) -> bool:
        return self.mode == Mode.TIME_OPTIMAL

    def blank_like(self) -> DecisionVector:
        n, m = self.model.state_dim, self.model.control_dim
        return DecisionVector(
            x_knots=np.zeros((self.N + 1, n)),
            u_knots=np.zeros((self.N, m)),
            t_f=1.0,
        )

    def check_decision(self, decision: DecisionVector):
        n, m = self.model.state_dim, self.model.control_dim
        if decision.x_knots.shape != (self.N + 1, n):
            raise ContractError(
                f"x_knots shape {decision.x_knots.shape} != ({self.N + 1}, {n})"
            )
        if decision.u_knots.shape != (self.N, m):
            raise ContractError(
                f"u_knots shape {decision.u_knots.shape} != ({self.N}, {m})"
            )
