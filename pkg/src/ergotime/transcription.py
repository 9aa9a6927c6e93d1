"""Objective, initial guesses, and derivative assembly for the direct NLP.

The program over (knot states, knot controls, free final time) minimizes
``t_f`` subject to the residual bundle in time-optimal mode, or the
ergodic metric plus quadratic control effort over a frozen horizon in the
fixed-time baseline.  Gradients are fully analytic; the time derivative of
the dynamics defects flows through ``dt = t_f / N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._eval import Assembly
from .errors import ContractError
from .problem import DecisionVector, Mode, ProblemSpec

__all__ = [
    "DecisionVector",
    "Gradients",
    "Mode",
    "ProblemSpec",
    "gradients",
    "initial_guess",
    "objective",
]

INIT_SHAPES = ("lerp", "lerp+noise", "sinusoid", "uniform-random")


def objective(decision: DecisionVector, spec: ProblemSpec) -> float:
    """``t_f`` in time-optimal mode; ``E_hat + sum_t u_t' R u_t dt`` in the
    fixed-time baseline (horizon and ``dt`` taken from the spec there)."""
    return Assembly(decision, spec).objective


@dataclass(frozen=True)
class Gradients:
    """Packed-order derivative bundle: see :meth:`DecisionVector.pack`.

    ``jtvp(w_eq, w_ineq)`` returns the gradient of the weighted residual
    sum; combined with ``d_objective`` it is everything a first-order
    constrained method needs without ever forming the dense Jacobian.
    """

    d_objective: np.ndarray
    jtvp: object


def gradients(decision: DecisionVector, spec: ProblemSpec) -> Gradients:
    """Analytic derivatives of the objective and residual bundle."""
    asm = Assembly(decision, spec, with_grad=True)
    return Gradients(d_objective=asm.d_objective, jtvp=asm.jtvp)


def initial_guess(
    spec: ProblemSpec,
    tf_init: float,
    shape: str = "lerp",
    noise_sigma: float = 0.02,
) -> DecisionVector:
    """Seedable starting decision.

    ``lerp`` interpolates the boundary states with zero controls (the
    default everywhere).  ``lerp+noise`` perturbs the interior knots with
    zero-mean Gaussian noise of standard deviation ``noise_sigma``;
    ``sinusoid`` bends the straight-line positions into one sine period
    across the box (clipped to stay inside); ``uniform-random`` draws the
    interior positions uniformly over the box.  Stochastic shapes use
    ``spec.seed``.  In baseline mode the final time is the spec's frozen
    horizon regardless of ``tf_init``.
    """
    if tf_init <= 0:
        raise ContractError(f"tf_init must be positive, got {tf_init}")
    if shape not in INIT_SHAPES:
        raise ContractError(f"unknown init shape {shape!r}; pick from {INIT_SHAPES}")
    con = spec.constraints
    N = spec.N
    n = spec.model.state_dim
    x0 = con.x0
    xf = con.xf if con.xf is not None else con.x0
    s = np.linspace(0.0, 1.0, N + 1)[:, np.newaxis]
    x = (1.0 - s) * x0 + s * xf
    sel = list(spec.model.g_selector)

    rng = np.random.default_rng(spec.seed)
    if shape == "lerp+noise":
        x[1:N] += rng.normal(0.0, noise_sigma, size=(N - 1, n))
    elif shape == "sinusoid":
        # bend the path along the second workspace axis (or the only one)
        axis = sel[1] if len(sel) > 1 else sel[0]
        length = spec.ws.lengths[min(1, spec.ws.dims - 1)]
        x[:, axis] += 0.25 * length * np.sin(2.0 * np.pi * s[:, 0])
        x[0], x[N] = x0, xf
    elif shape == "uniform-random":
        x[1:N, sel] = rng.uniform(
            spec.ws.offsets, spec.ws.upper, size=(N - 1, len(sel))
        )
    if shape != "lerp":
        # keep workspace coordinates representable: clip into the box
        x[:, sel] = np.clip(x[:, sel], spec.ws.offsets, spec.ws.upper)
        x[0], x[N] = x0, xf

    t_f = float(tf_init) if spec.time_optimal else float(spec.fixed_tf)
    return DecisionVector(
        x_knots=x,
        u_knots=np.zeros((N, spec.model.control_dim)),
        t_f=t_f,
    )
