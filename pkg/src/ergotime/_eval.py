"""Shared evaluation core for the transcribed program.

One :class:`Assembly` per iterate computes every residual, the objective,
and (on demand) all derivative ingredients exactly once, so the solver's
inner loop pays for the basis and dynamics sweeps a single time per
value-and-gradient query.  The public operations in ``constraints`` and
``transcription`` are thin wrappers over this module, which keeps every
quantity on one code path.
"""

from __future__ import annotations

import numpy as np

from .constraints import (
    BundleLayout,
    ResidualBundle,
    barrier_gradients,
    barrier_values,
    bundle_layout,
)
from .dynamics import step, step_with_jacobians
from .ergodic import basis_matrix, basis_matrix_and_gradient
from .problem import DecisionVector, Mode, ProblemSpec


class Assembly:
    """All residuals/objective pieces of one decision, derivatives optional.

    ``with_grad=True`` additionally prepares step Jacobians, basis
    gradients, and barrier gradients so :meth:`jtvp` and
    :attr:`d_objective` are available.
    """

    def __init__(self, decision: DecisionVector, spec: ProblemSpec, with_grad: bool = False):
        spec.check_decision(decision)
        self.decision = decision
        self.spec = spec
        self.layout: BundleLayout = bundle_layout(spec)
        self.with_grad = with_grad

        model = spec.model
        con = spec.constraints
        N = spec.N
        self.sel = list(model.g_selector)
        x = decision.x_knots
        u = decision.u_knots
        # baseline mode reads the horizon from the spec; t_f is frozen there
        self.t_f = decision.t_f if spec.time_optimal else float(spec.fixed_tf)
        self.dt = self.t_f / N

        self.points = x[:, self.sel]                      # (N+1, v)
        if with_grad:
            self.F, gradF = basis_matrix_and_gradient(
                spec.ws, spec.basis, self.points[:N]
            )
        else:
            self.F = basis_matrix(spec.ws, spec.basis, self.points[:N])
        self.c = self.F.mean(axis=0)
        diff = self.c - spec.phi.values
        lam_w = spec.basis.lam
        self.e_hat = float(np.dot(lam_w, diff * diff))

        if with_grad:
            self.x_pred, self.S_x, self.S_u, self.S_dt = step_with_jacobians(
                model, x[:N], u, self.dt, spec.integrator
            )
            # dE/dpoints under the left-Riemann average, shape (N, v)
            w = lam_w * diff * (2.0 / N)
            self.dE_dpoints = np.einsum("k,tkv->tv", w, gradF)
        else:
            self.x_pred = step(model, x[:N], u, self.dt, spec.integrator)

        eq = np.empty(self.layout.n_eq)
        eq[self.layout.eq["init"]] = x[0] - con.x0
        eq[self.layout.eq["defects"]] = (x[1:] - self.x_pred).ravel()
        if "terminal" in self.layout.eq:
            eq[self.layout.eq["terminal"]] = x[N] - con.xf

        ineq = np.empty(self.layout.n_ineq)
        ineq[self.layout.ineq["u_upper"]] = (u - con.u_upper).ravel()
        ineq[self.layout.ineq["u_lower"]] = (con.u_lower - u).ravel()
        ineq[self.layout.ineq["ws_upper"]] = (self.points - spec.ws.upper).ravel()
        ineq[self.layout.ineq["ws_lower"]] = (spec.ws.offsets - self.points).ravel()
        if con.obstacles:
            self.points_pred = self.x_pred[:, self.sel]
            self.h_now = np.stack(
                [barrier_values(o, self.points[:N]) for o in con.obstacles]
            )
            self.h_pred = np.stack(
                [barrier_values(o, self.points_pred) for o in con.obstacles]
            )
            residuals = self.h_pred - (1.0 - con.cbf.alpha) * self.h_now
            ineq[self.layout.ineq["cbf"]] = (con.cbf.margin - residuals).ravel()
        if "ergodic" in self.layout.ineq:
            ineq[self.layout.ineq["ergodic"]] = self.e_hat - con.gamma
        if "tf_floor" in self.layout.ineq:
            ineq[self.layout.ineq["tf_floor"]] = con.tf_floor - self.t_f

        self.bundle = ResidualBundle(eq=eq, ineq=ineq, layout=self.layout)

        if spec.time_optimal:
            self.objective = self.t_f
        else:
            effort = float(np.einsum("tj,j,tj->", u, spec.R, u)) * self.dt
            self.objective = self.e_hat + effort

    # -- derivatives --------------------------------------------------------

    @property
    def d_objective(self) -> np.ndarray:
        """Gradient of the objective in packed order (x, u, t_f)."""
        spec = self.spec
        N = spec.N
        gx = np.zeros_like(self.decision.x_knots)
        gu = np.zeros_like(self.decision.u_knots)
        gtf = 0.0
        if spec.time_optimal:
            gtf = 1.0
        else:
            gx[:N, self.sel] = self.dE_dpoints
            gu[:] = 2.0 * self.dt * spec.R * self.decision.u_knots
            # t_f frozen in baseline mode: excluded from stationarity
        return np.concatenate([gx.ravel(), gu.ravel(), [gtf]])

    def jtvp(self, w_eq: np.ndarray, w_ineq: np.ndarray) -> np.ndarray:
        """Packed gradient of ``w_eq . eq + w_ineq . ineq``."""
        spec = self.spec
        con = spec.constraints
        lay = self.layout
        N = spec.N
        gx = np.zeros_like(self.decision.x_knots)
        gu = np.zeros_like(self.decision.u_knots)
        gtf = 0.0

        gx[0] += w_eq[lay.eq["init"]]
        W = w_eq[lay.eq["defects"]].reshape(N, spec.model.state_dim)
        gx[1:] += W
        gx[:N] -= np.einsum("tij,ti->tj", self.S_x, W)
        gu -= np.einsum("tij,ti->tj", self.S_u, W)
        if spec.time_optimal:
            gtf -= np.einsum("ti,ti->", self.S_dt, W) / N
        if "terminal" in lay.eq:
            gx[N] += w_eq[lay.eq["terminal"]]

        m = spec.model.control_dim
        v = spec.ws.dims
        gu += w_ineq[lay.ineq["u_upper"]].reshape(N, m)
        gu -= w_ineq[lay.ineq["u_lower"]].reshape(N, m)
        w_ws = w_ineq[lay.ineq["ws_upper"]].reshape(N + 1, v) - w_ineq[
            lay.ineq["ws_lower"]
        ].reshape(N + 1, v)
        gx[:, self.sel] += w_ws

        if con.obstacles:
            W_cbf = w_ineq[lay.ineq["cbf"]].reshape(len(con.obstacles), N)
            S_x_sel = self.S_x[:, self.sel, :]    # (N, v, n)
            S_u_sel = self.S_u[:, self.sel, :]
            S_dt_sel = self.S_dt[:, self.sel]
            alpha = con.cbf.alpha
            for o, obs in enumerate(con.obstacles):
                wc = W_cbf[o]
                gh_now = barrier_gradients(obs, self.points[:N])
                gh_pred = barrier_gradients(obs, self.points_pred)
                # row = margin - h(pred) + (1 - alpha) h(now)
                gx[:N, self.sel] += (1.0 - alpha) * wc[:, np.newaxis] * gh_now
                gx[:N] -= wc[:, np.newaxis] * np.einsum("tvn,tv->tn", S_x_sel, gh_pred)
                gu -= wc[:, np.newaxis] * np.einsum("tvn,tv->tn", S_u_sel, gh_pred)
                if spec.time_optimal:
                    gtf -= np.dot(wc, np.einsum("tv,tv->t", gh_pred, S_dt_sel)) / N

        if "ergodic" in lay.ineq:
            w_e = w_ineq[lay.ineq["ergodic"]][0]
            gx[:N, self.sel] += w_e * self.dE_dpoints
        if "tf_floor" in lay.ineq:
            gtf -= w_ineq[lay.ineq["tf_floor"]][0]

        return np.concatenate([gx.ravel(), gu.ravel(), [gtf]])

    def al_value_and_grad(self, lam, mu, rho):
        """Augmented Lagrangian (shifted-penalty inequalities) and gradient.

        ``L = J + lam.c_E + (rho/2)||c_E||^2
             + (1/(2 rho)) sum(max(0, mu + rho c_I)^2 - mu^2)``
        """
        c_eq = self.bundle.eq
        c_ineq = self.bundle.ineq
        active = np.maximum(0.0, mu + rho * c_ineq)
        value = (
            self.objective
            + float(np.dot(lam, c_eq))
            + 0.5 * rho * float(np.dot(c_eq, c_eq))
            + (float(np.dot(active, active)) - float(np.dot(mu, mu))) / (2.0 * rho)
        )
        grad = self.d_objective + self.jtvp(lam + rho * c_eq, active)
        return value, grad
