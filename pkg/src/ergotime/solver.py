"""Augmented-Lagrangian solver with adaptive sub-gradient inner iterations.

Outer iterations update multipliers (classic first-order rule, shifted
penalties for inequalities) and grow the penalty when infeasibility stops
shrinking; inner iterations descend the augmented Lagrangian with
per-coordinate adaptive steps ``eta0 / sqrt(G + eps)``, projecting the
final time onto its floor after every step.  The result always carries a
truthful KKT report whether or not tolerances were met.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._eval import Assembly
from .errors import ContractError, DivergedError
from .problem import DecisionVector, ProblemSpec

HISTORY_COLUMNS = ("iteration", "objective", "max_eq", "max_ineq", "stationarity")


@dataclass(frozen=True)
class SolverOptions:
    """Hyperparameters; defaults are house choices, all exposed in configs.

    ``accumulator_decay`` of None keeps the pure accumulated-squares rule;
    a value in (0, 1) switches to an RMSProp-style running average.
    ``accumulator_reset`` restarts the gradient accumulator at every outer
    iteration (fresh, larger steps after each multiplier update); carrying
    it instead keeps the step sizes annealed, which settles better once
    the iterate is near a solution.  With the carry behaviour,
    ``restart_every = k`` still zeroes the accumulator every k outer
    iterations so one early transient cannot freeze the step sizes for
    the rest of the run.  ``eta_tf`` gives the final-time coordinate its
    own base step (default: same as ``eta0``); the horizon couples into
    every defect row, so a gentler step there keeps the rest of the
    iterate tracking quasi-statically.  ``clip_controls`` optionally
    projects controls onto their box after each step; off by default so
    the bound multipliers converge and stationarity stays meaningful.
    ``refine_duals`` re-estimates the multipliers once, after the outer
    loop, by least squares on the stationarity system over the
    near-active inequality rows, adopting the estimate only when the
    iterate is near-feasible and the estimate shrinks the stationarity
    residual.  The first-order rule recovers multipliers slowly on
    problems whose solutions sit at vertices of the feasible set (many
    active bounds), where the least-squares estimate is exact once the
    primal is close; refining only at exit keeps the estimate out of the
    penalty loop, where adopting it destabilizes the step-size state.
    """

    max_outer: int = 100
    max_inner: int = 1000
    eta0: float = 0.1
    eta_tf: float = None
    adagrad_eps: float = 1e-8
    rho0: float = 1.0
    rho_growth: float = 10.0
    rho_max: float = 1e8
    tol_stationarity: float = 1e-3
    tol_eq: float = 1e-4
    tol_ineq: float = 1e-4
    tol_comp: float = 1e-3
    inner_tol0: float = 1.0
    inner_tol_shrink: float = 0.5
    accumulator_decay: float = None
    accumulator_reset: bool = True
    restart_every: int = None
    clip_controls: bool = False
    refine_duals: bool = False
    inner_tol_floor: float = None
    seed: int = 0

    def __post_init__(self):
        for name in ("tol_stationarity", "tol_eq", "tol_ineq", "tol_comp"):
            if getattr(self, name) <= 0:
                raise ContractError(f"{name} must be positive")
        if self.rho_growth <= 1:
            raise ContractError(f"rho_growth must exceed 1, got {self.rho_growth}")
        if self.eta0 <= 0 or self.adagrad_eps <= 0 or self.rho0 <= 0:
            raise ContractError("eta0, adagrad_eps, and rho0 must be positive")
        if self.accumulator_decay is not None and not (0 < self.accumulator_decay < 1):
            raise ContractError("accumulator_decay must lie in (0, 1) when set")
        if self.eta_tf is not None and self.eta_tf <= 0:
            raise ContractError("eta_tf must be positive when set")
        if self.inner_tol_floor is not None and self.inner_tol_floor <= 0:
            raise ContractError("inner_tol_floor must be positive when set")
        if self.restart_every is not None and self.restart_every < 1:
            raise ContractError("restart_every must be a positive integer when set")


@dataclass(frozen=True)
class Multipliers:
    """Estimates aligned with the residual bundle; ``ineq`` entries >= 0."""

    eq: np.ndarray
    ineq: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eq", np.asarray(self.eq, dtype=float))
        object.__setattr__(self, "ineq", np.asarray(self.ineq, dtype=float))
        if self.ineq.size and self.ineq.min() < 0:
            raise ContractError("inequality multipliers must be nonnegative")


@dataclass(frozen=True)
class KktReport:
    stationarity_norm: float
    max_eq_violation: float
    max_ineq_violation: float
    complementarity_max: float
    converged: bool
    reason: str

    def as_dict(self) -> dict:
        return {
            "stationarity_norm": self.stationarity_norm,
            "max_eq_violation": self.max_eq_violation,
            "max_ineq_violation": self.max_ineq_violation,
            "complementarity_max": self.complementarity_max,
            "converged": self.converged,
            "reason": self.reason,
        }


@dataclass
class SolverState:
    multipliers: Multipliers
    rho: float
    accumulator: np.ndarray
    decision: DecisionVector
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class SolveResult:
    decision: DecisionVector
    report: KktReport
    history: np.ndarray          # one row per outer iteration, HISTORY_COLUMNS
    state: SolverState

    @property
    def converged(self) -> bool:
        return self.report.converged


def _violations(bundle):
    max_eq = float(np.abs(bundle.eq).max()) if bundle.eq.size else 0.0
    max_ineq = float(np.maximum(bundle.ineq, 0.0).max()) if bundle.ineq.size else 0.0
    return max_eq, max_ineq


def _least_squares_duals(asm: Assembly, frozen_tf: bool, act_window: float):
    """Multipliers minimizing the stationarity residual at the iterate.

    Solves ``min || d_objective + J_eq' lam + J_act' mu ||`` over the
    equality rows and the inequality rows within ``act_window`` of
    activity, clamping negative inequality multipliers by re-solving with
    the offending columns dropped (a few passes settle in practice).  The
    Jacobian transpose is materialized column by column through unit-
    vector ``jtvp`` calls, so the cost is one full product per retained
    row; callers should invoke this sparingly.  Returns ``(lam, mu,
    residual)`` with ``residual`` the attained infinity norm, directly
    comparable to the solver's stationarity measure.
    """
    n_eq, n_ineq = asm.layout.n_eq, asm.layout.n_ineq
    act = np.where(asm.bundle.ineq >= -act_window)[0]
    cols = np.empty((asm.d_objective.size, n_eq + act.size))
    e_eq, e_in = np.zeros(n_eq), np.zeros(n_ineq)
    for j in range(n_eq):
        e_eq[j] = 1.0
        cols[:, j] = asm.jtvp(e_eq, e_in)
        e_eq[j] = 0.0
    for j, i in enumerate(act):
        e_in[i] = 1.0
        cols[:, n_eq + j] = asm.jtvp(e_eq, e_in)
        e_in[i] = 0.0
    rhs = -asm.d_objective
    if frozen_tf:
        cols[-1] = 0.0
        rhs = rhs.copy()
        rhs[-1] = 0.0
    sol, *_ = np.linalg.lstsq(cols, rhs, rcond=None)
    for _ in range(8):
        neg = sol[n_eq:] < 0.0
        if not neg.any():
            break
        keep = np.concatenate([np.ones(n_eq, dtype=bool), ~neg])
        reduced, *_ = np.linalg.lstsq(cols[:, keep], rhs, rcond=None)
        sol = np.zeros(cols.shape[1])
        sol[keep] = reduced
    lam = sol[:n_eq]
    mu = np.zeros(n_ineq)
    mu[act] = np.maximum(sol[n_eq:], 0.0)
    final = np.concatenate([lam, mu[act]])
    residual = float(np.abs(cols @ final - rhs).max())
    return lam, mu, residual


def solve(spec: ProblemSpec, opts: SolverOptions, init: DecisionVector) -> SolveResult:
    """Minimize the spec's objective subject to its residual bundle.

    Raises :class:`DivergedError` (carrying the last finite iterate) if the
    objective or gradient goes non-finite; otherwise always returns, with
    ``report.converged`` telling the truth about tolerance attainment.
    """
    spec.check_decision(init)
    n, m, N = spec.model.state_dim, spec.model.control_dim, spec.N
    z = init.pack()
    if not spec.time_optimal:
        z[-1] = spec.fixed_tf
    tf_index = z.size - 1
    frozen_tf = not spec.time_optimal
    layout = Assembly(init, spec).layout
    lam = np.zeros(layout.n_eq)
    mu = np.zeros(layout.n_ineq)
    rho = opts.rho0
    prev_viol = np.inf
    history = []
    last_finite = init
    accumulator = np.zeros_like(z)
    converged = False
    reason = "outer iteration cap reached"
    u_slice = slice((N + 1) * n, (N + 1) * n + N * m)
    tf_floor = spec.constraints.tf_floor
    eta = np.full_like(z, opts.eta0)
    if opts.eta_tf is not None and not frozen_tf:
        eta[tf_index] = opts.eta_tf

    for outer in range(opts.max_outer):
        if opts.accumulator_reset or (
            opts.restart_every is not None and outer % opts.restart_every == 0
        ):
            accumulator = np.zeros_like(z)
        # the annealing floor defaults to the convergence tolerance, but a
        # deliberately loose tol_stationarity must not starve the inner loop
        floor = (
            opts.inner_tol_floor
            if opts.inner_tol_floor is not None
            else opts.tol_stationarity
        )
        inner_tol = max(floor, opts.inner_tol0 * opts.inner_tol_shrink**outer)
        asm = Assembly(DecisionVector.unpack(z, N, n, m), spec, with_grad=True)
        for _ in range(opts.max_inner):
            value, grad = asm.al_value_and_grad(lam, mu, rho)
            if not np.isfinite(value) or not np.all(np.isfinite(grad)):
                raise DivergedError(
                    f"augmented Lagrangian went non-finite at outer iteration {outer}",
                    last_iterate=last_finite,
                )
            last_finite = asm.decision
            if frozen_tf:
                grad[tf_index] = 0.0
            if float(np.abs(grad).max()) <= inner_tol:
                break
            if opts.accumulator_decay is None:
                accumulator += grad * grad
            else:
                accumulator = opts.accumulator_decay * accumulator + (
                    1.0 - opts.accumulator_decay
                ) * grad * grad
            z = z - eta / np.sqrt(accumulator + opts.adagrad_eps) * grad
            if frozen_tf:
                z[tf_index] = spec.fixed_tf
            else:
                z[tf_index] = max(z[tf_index], tf_floor)
            if opts.clip_controls:
                u = z[u_slice].reshape(N, m)
                np.clip(u, spec.constraints.u_lower, spec.constraints.u_upper, out=u)
            asm = Assembly(DecisionVector.unpack(z, N, n, m), spec, with_grad=True)

        # stationarity with first-order updated multipliers equals the AL
        # gradient at the exit point (shifted-penalty identity), so reuse it
        value, grad = asm.al_value_and_grad(lam, mu, rho)
        if frozen_tf:
            grad[tf_index] = 0.0
        stationarity = float(np.abs(grad).max())
        c_eq, c_ineq = asm.bundle.eq, asm.bundle.ineq
        max_eq, max_ineq = _violations(asm.bundle)
        lam_new = lam + rho * c_eq
        mu_new = np.maximum(0.0, mu + rho * c_ineq)
        comp = float(np.abs(mu_new * c_ineq).max()) if c_ineq.size else 0.0
        history.append([outer, asm.objective, max_eq, max_ineq, stationarity])
        if (
            stationarity <= opts.tol_stationarity
            and max_eq <= opts.tol_eq
            and max_ineq <= opts.tol_ineq
            and comp <= opts.tol_comp
        ):
            converged = True
            reason = f"tolerances met at outer iteration {outer}"
            lam, mu = lam_new, mu_new
            break
        lam, mu = lam_new, mu_new
        viol = max(max_eq, max_ineq)
        if viol > prev_viol / 4.0 and viol > min(opts.tol_eq, opts.tol_ineq):
            rho = min(rho * opts.rho_growth, opts.rho_max)
        prev_viol = viol

    # the least-squares system is only meaningful near feasibility (fitting
    # duals at an infeasible iterate rewards violation), and adopting it
    # inside the loop corrupts the shifted-penalty state, so refine at exit
    if opts.refine_duals and max(max_eq, max_ineq) <= 100.0 * max(
        opts.tol_eq, opts.tol_ineq
    ):
        lam_ls, mu_ls, resid = _least_squares_duals(
            asm, frozen_tf, act_window=10.0 * opts.tol_ineq
        )
        if resid < stationarity:
            lam, mu = lam_ls, mu_ls
            stationarity = resid
            comp = (
                float(np.abs(mu * asm.bundle.ineq).max())
                if asm.bundle.ineq.size
                else 0.0
            )
            if not converged and (
                stationarity <= opts.tol_stationarity
                and max_eq <= opts.tol_eq
                and max_ineq <= opts.tol_ineq
                and comp <= opts.tol_comp
            ):
                converged = True
                reason = "tolerances met after final multiplier refinement"

    if not converged:
        reason = (
            f"{reason}: stationarity {stationarity:.3e}, "
            f"max_eq {max_eq:.3e}, max_ineq {max_ineq:.3e}"
        )
    decision = DecisionVector.unpack(z, N, n, m)
    report = KktReport(
        stationarity_norm=stationarity,
        max_eq_violation=max_eq,
        max_ineq_violation=max_ineq,
        complementarity_max=comp,
        converged=converged,
        reason=reason,
    )
    state = SolverState(
        multipliers=Multipliers(eq=lam, ineq=mu),
        rho=rho,
        accumulator=accumulator,
        decision=decision,
        history=history,
    )
    return SolveResult(
        decision=decision,
        report=report,
        history=np.array(history, dtype=float).reshape(len(history), len(HISTORY_COLUMNS)),
        state=state,
    )


def kkt_residuals(
    decision: DecisionVector,
    spec: ProblemSpec,
    multipliers: Multipliers,
    opts: SolverOptions = None,
) -> KktReport:
    """First-order optimality report at a given primal-dual pair.

    Stationarity is ``||grad objective + J' lam + J' mu||_inf`` with the
    multipliers exactly as passed; complementarity is ``max |mu_i c_i|``.
    ``converged`` is judged against the options' tolerances (defaults if
    omitted).
    """
    opts = opts or SolverOptions()
    asm = Assembly(decision, spec, with_grad=True)
    if multipliers.eq.shape != (asm.layout.n_eq,) or multipliers.ineq.shape != (
        asm.layout.n_ineq,
    ):
        raise ContractError(
            f"multiplier lengths ({multipliers.eq.shape}, {multipliers.ineq.shape}) "
            f"do not match bundle ({asm.layout.n_eq}, {asm.layout.n_ineq})"
        )
    grad = asm.d_objective + asm.jtvp(multipliers.eq, multipliers.ineq)
    if not spec.time_optimal:
        grad[-1] = 0.0
    stationarity = float(np.abs(grad).max())
    max_eq, max_ineq = _violations(asm.bundle)
    comp = (
        float(np.abs(multipliers.ineq * asm.bundle.ineq).max())
        if asm.bundle.ineq.size
        else 0.0
    )
    failures = []
    if stationarity > opts.tol_stationarity:
        failures.append(f"stationarity {stationarity:.3e}")
    if max_eq > opts.tol_eq:
        failures.append(f"max_eq {max_eq:.3e}")
    if max_ineq > opts.tol_ineq:
        failures.append(f"max_ineq {max_ineq:.3e}")
    if comp > opts.tol_comp:
        failures.append(f"complementarity {comp:.3e}")
    return KktReport(
        stationarity_norm=stationarity,
        max_eq_violation=max_eq,
        max_ineq_violation=max_ineq,
        complementarity_max=comp,
        converged=not failures,
        reason="all KKT tolerances met" if not failures else "; ".join(failures),
    )
