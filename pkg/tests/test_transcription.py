"""Objective, initial guesses, and analytic derivative assembly."""

import numpy as np
import pytest

from ergotime import (
    BasisSet,
    ConstraintSet,
    ContractError,
    Obstacle,
    Workspace,
    double_integrator_2d,
    gaussian_mixture,
    residual_bundle,
    uniform,
)
from ergotime.constraints import CbfParams
from ergotime.distributions import phi_coefficients
from ergotime.problem import DecisionVector, Mode, ProblemSpec
from ergotime.transcription import INIT_SHAPES, Gradients, gradients, initial_guess, objective

UNIT = Workspace([1.0, 1.0])


def make_spec(N=8, mode=Mode.TIME_OPTIMAL, obstacles=(), phi_kind="uniform", **kw):
    basis = BasisSet.build(UNIT, 3)
    if phi_kind == "uniform":
        dist = uniform(UNIT)
    else:
        dist = gaussian_mixture(UNIT, [[0.3, 0.6], [0.7, 0.2]], bandwidth=0.15)
    phi = phi_coefficients(dist, basis, UNIT)
    con = ConstraintSet(
        gamma=0.05,
        u_lower=np.array([-1.0, -1.0]),
        u_upper=np.array([1.0, 1.0]),
        x0=np.array([0.1, 0.1, 0.0, 0.0]),
        xf=np.array([0.9, 0.9, 0.0, 0.0]),
        obstacles=obstacles,
        cbf=CbfParams(alpha=0.2, margin=1e-3),
    )
    defaults = dict(
        model=double_integrator_2d(),
        ws=UNIT,
        basis=basis,
        phi=phi,
        constraints=con,
        N=N,
        mode=mode,
    )
    defaults.update(kw)
    return ProblemSpec(**defaults)


def random_decision(spec, seed, tf=3.0):
    rng = np.random.default_rng(seed)
    n, m = spec.model.state_dim, spec.model.control_dim
    x = rng.uniform(0.25, 0.75, size=(spec.N + 1, n))
    u = rng.uniform(-0.6, 0.6, size=(spec.N, m))
    return DecisionVector(x_knots=x, u_knots=u, t_f=tf)


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

def test_time_optimal_objective_is_final_time():
    spec = make_spec()
    dec = random_decision(spec, 0, tf=4.25)
    assert objective(dec, spec) == pytest.approx(4.25)


def test_baseline_objective_is_metric_plus_effort():
    from ergotime import metric_from_extended_state, trajectory_coefficients

    spec = make_spec(mode=Mode.FIXED_TIME, fixed_tf=5.0, R=np.array([0.2, 0.1]))
    dec = random_decision(spec, 1)
    c = trajectory_coefficients(
        dec.x_knots, spec.model.g_selector, UNIT, spec.basis, spec.N
    )
    e = float(np.dot(spec.basis.lam, (c - spec.phi.values) ** 2))
    dt = 5.0 / spec.N
    effort = float((dec.u_knots**2 @ np.array([0.2, 0.1])).sum() * dt)
    assert objective(dec, spec) == pytest.approx(e + effort, rel=1e-12)


def test_baseline_objective_ignores_decision_tf():
    spec = make_spec(mode=Mode.FIXED_TIME, fixed_tf=5.0, R=np.zeros(2))
    dec = random_decision(spec, 2, tf=3.0)
    other = DecisionVector(x_knots=dec.x_knots, u_knots=dec.u_knots, t_f=9.0)
    assert objective(dec, spec) == pytest.approx(objective(other, spec), rel=1e-15)


# ---------------------------------------------------------------------------
# Initial guesses
# ---------------------------------------------------------------------------

def test_lerp_guess_interpolates_boundaries():
    spec = make_spec()
    dec = initial_guess(spec, 5.0)
    assert np.allclose(dec.x_knots[0], spec.constraints.x0)
    assert np.allclose(dec.x_knots[-1], spec.constraints.xf)
    mid = 0.5 * (spec.constraints.x0 + spec.constraints.xf)
    assert np.allclose(dec.x_knots[spec.N // 2], mid)
    assert np.array_equal(dec.u_knots, np.zeros((spec.N, 2)))
    assert dec.t_f == 5.0


def test_every_shape_stays_in_the_box_and_pins_endpoints():
    spec = make_spec(N=40)
    for shape in INIT_SHAPES:
        dec = initial_guess(spec, 6.0, shape)
        assert np.allclose(dec.x_knots[0], spec.constraints.x0), shape
        assert np.allclose(dec.x_knots[-1], spec.constraints.xf), shape
        pos = dec.x_knots[:, :2]
        assert np.all(pos >= -1e-12) and np.all(pos <= 1.0 + 1e-12), shape


def test_stochastic_shapes_are_seed_reproducible():
    spec = make_spec(N=20, seed=42)
    for shape in ("lerp+noise", "uniform-random"):
        a = initial_guess(spec, 5.0, shape)
        b = initial_guess(spec, 5.0, shape)
        assert np.array_equal(a.x_knots, b.x_knots), shape
    other = make_spec(N=20, seed=43)
    a = initial_guess(spec, 5.0, "uniform-random")
    c = initial_guess(other, 5.0, "uniform-random")
    assert not np.array_equal(a.x_knots, c.x_knots)


def test_guess_validation():
    spec = make_spec()
    with pytest.raises(ContractError):
        initial_guess(spec, 0.0)
    with pytest.raises(ContractError):
        initial_guess(spec, 5.0, "zigzag")


def test_baseline_guess_pins_tf_to_spec_horizon():
    spec = make_spec(mode=Mode.FIXED_TIME, fixed_tf=7.5, R=np.zeros(2))
    dec = initial_guess(spec, 3.0)
    assert dec.t_f == 7.5


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------

def pack_eval(spec, vec, w_eq, w_ineq):
    N, n, m = spec.N, spec.model.state_dim, spec.model.control_dim
    dec = DecisionVector.unpack(vec, N, n, m)
    bundle = residual_bundle(dec, spec)
    return (
        objective(dec, spec),
        float(bundle.eq @ w_eq + bundle.ineq @ w_ineq),
    )


@pytest.mark.parametrize(
    "mode,phi_kind,with_obs",
    [
        (Mode.TIME_OPTIMAL, "uniform", False),
        (Mode.TIME_OPTIMAL, "mixture", True),
        (Mode.FIXED_TIME, "mixture", False),
    ],
)
def test_gradients_match_finite_differences(mode, phi_kind, with_obs):
    obstacles = (
        (Obstacle(center=[0.5, 0.45], half_extents=[0.12, 0.2], rotation=0.3),)
        if with_obs
        else ()
    )
    kw = dict(fixed_tf=4.0, R=np.array([0.3, 0.3])) if mode == Mode.FIXED_TIME else {}
    spec = make_spec(N=6, mode=mode, obstacles=obstacles, phi_kind=phi_kind, **kw)
    dec = random_decision(spec, 7, tf=3.7)
    bundle = residual_bundle(dec, spec)
    rng = np.random.default_rng(8)
    w_eq = rng.normal(size=bundle.eq.shape)
    w_ineq = rng.normal(size=bundle.ineq.shape)

    grads = gradients(dec, spec)
    assert isinstance(grads, Gradients)
    got_obj = grads.d_objective
    got_res = grads.jtvp(w_eq, w_ineq)

    vec = dec.pack()
    eps = 1e-6
    for j in range(0, vec.size, max(1, vec.size // 23)):
        bump = np.zeros_like(vec)
        bump[j] = eps
        op, rp = pack_eval(spec, vec + bump, w_eq, w_ineq)
        om, rm = pack_eval(spec, vec - bump, w_eq, w_ineq)
        assert got_obj[j] == pytest.approx((op - om) / (2 * eps), rel=2e-5, abs=2e-6)
        assert got_res[j] == pytest.approx((rp - rm) / (2 * eps), rel=2e-5, abs=2e-6)
    # the final-time coordinate is the one everything couples through
    j = vec.size - 1
    bump = np.zeros_like(vec)
    bump[j] = eps
    op, rp = pack_eval(spec, vec + bump, w_eq, w_ineq)
    om, rm = pack_eval(spec, vec - bump, w_eq, w_ineq)
    assert got_obj[j] == pytest.approx((op - om) / (2 * eps), rel=2e-5, abs=2e-6)
    assert got_res[j] == pytest.approx((rp - rm) / (2 * eps), rel=2e-5, abs=2e-6)


def test_gradient_layout_matches_pack_order():
    spec = make_spec(N=5)
    dec = random_decision(spec, 9)
    grads = gradients(dec, spec)
    n_vars = (spec.N + 1) * 4 + spec.N * 2 + 1
    assert grads.d_objective.shape == (n_vars,)
    # minimum-time objective: gradient is the t_f unit vector
    want = np.zeros(n_vars)
    want[-1] = 1.0
    assert np.array_equal(grads.d_objective, want)
