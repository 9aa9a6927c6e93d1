"""Barrier geometry, discrete safety residuals, and the residual bundle."""

import math

import numpy as np
import pytest

from ergotime import (
    BasisSet,
    CbfParams,
    ConstraintSet,
    ContractError,
    IntegratorKind,
    Obstacle,
    Workspace,
    cbf_residual,
    double_integrator_2d,
    l4_barrier,
    residual_bundle,
    single_integrator_2d,
    uniform,
)
from ergotime.constraints import barrier_gradients, barrier_values, bundle_layout
from ergotime.distributions import phi_coefficients
from ergotime.problem import DecisionVector, Mode, ProblemSpec
from ergotime.transcription import initial_guess

UNIT = Workspace([1.0, 1.0])


def make_spec(mode=Mode.TIME_OPTIMAL, obstacles=(), gamma=0.05, xf_on=True, **kw):
    basis = BasisSet.build(UNIT, 4)
    phi = phi_coefficients(uniform(UNIT), basis, UNIT)
    con = ConstraintSet(
        gamma=gamma,
        u_lower=np.array([-1.0, -1.0]),
        u_upper=np.array([1.0, 1.0]),
        x0=np.array([0.1, 0.1, 0.0, 0.0]),
        xf=np.array([0.9, 0.9, 0.0, 0.0]) if xf_on else None,
        obstacles=obstacles,
        **kw.pop("con_kw", {}),
    )
    defaults = dict(
        model=double_integrator_2d(),
        ws=UNIT,
        basis=basis,
        phi=phi,
        constraints=con,
        N=10,
        mode=mode,
    )
    defaults.update(kw)
    return ProblemSpec(**defaults)


# ---------------------------------------------------------------------------
# Barrier geometry
# ---------------------------------------------------------------------------

def test_barrier_sign_convention():
    obs = Obstacle(center=[0.5, 0.5], half_extents=[0.2, 0.1])
    assert l4_barrier(obs, [0.5, 0.5]) == pytest.approx(-1.0)
    assert l4_barrier(obs, [0.9, 0.9]) > 0.0
    # on-face point: q = (1, 0) has unit 4-norm
    assert l4_barrier(obs, [0.7, 0.5]) == pytest.approx(0.0, abs=1e-12)


def test_barrier_rounds_the_corners():
    # the true box corner lies strictly outside the level set
    obs = Obstacle(center=[0.0, 0.0], half_extents=[1.0, 1.0])
    assert l4_barrier(obs, [1.0, 1.0]) == pytest.approx(2**0.25 - 1.0)
    assert l4_barrier(obs, [1.0, 0.0]) == pytest.approx(0.0, abs=1e-12)


def test_barrier_rotation_invariance():
    # rotating both the obstacle and the query point leaves h unchanged
    rng = np.random.default_rng(3)
    base = Obstacle(center=[0.4, 0.6], half_extents=[0.3, 0.15])
    for _ in range(20):
        p = rng.uniform(-1.0, 2.0, size=2)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        c, s = np.cos(angle), np.sin(angle)
        R = np.array([[c, -s], [s, c]])
        rotated = Obstacle(
            center=R @ base.center, half_extents=base.half_extents, rotation=angle
        )
        assert abs(l4_barrier(rotated, R @ p) - l4_barrier(base, p)) <= 1e-9


def test_barrier_rotation_matrix_and_angle_agree():
    angle = 0.7
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    by_angle = Obstacle(center=[0.1, 0.2], half_extents=[0.2, 0.3], rotation=angle)
    by_matrix = Obstacle(center=[0.1, 0.2], half_extents=[0.2, 0.3], rotation=R)
    p = np.array([0.6, 0.9])
    assert l4_barrier(by_angle, p) == pytest.approx(l4_barrier(by_matrix, p), abs=1e-15)


def test_barrier_validation():
    with pytest.raises(ContractError):
        Obstacle(center=[0.0, 0.0], half_extents=[0.1])
    with pytest.raises(ContractError):
        Obstacle(center=[0.0, 0.0], half_extents=[0.1, -0.1])
    with pytest.raises(ContractError):
        Obstacle(center=[0, 0], half_extents=[1, 1], rotation=np.eye(2) * 2.0)
    with pytest.raises(ContractError):
        Obstacle(center=[0, 0, 0], half_extents=[1, 1, 1], rotation=0.3)


def test_barrier_gradient_matches_finite_differences():
    obs = Obstacle(center=[0.3, 0.7], half_extents=[0.25, 0.1], rotation=0.4)
    rng = np.random.default_rng(11)
    pts = rng.uniform(-0.5, 1.5, size=(30, 2))
    grad = barrier_gradients(obs, pts)
    eps = 1e-6
    for j in range(2):
        d = np.zeros(2)
        d[j] = eps
        fd = (barrier_values(obs, pts + d) - barrier_values(obs, pts - d)) / (2 * eps)
        assert np.allclose(grad[:, j], fd, rtol=1e-5, atol=1e-8)


def test_barrier_gradient_zero_at_center():
    obs = Obstacle(center=[0.5, 0.5], half_extents=[0.2, 0.2])
    g = barrier_gradients(obs, np.array([[0.5, 0.5]]))
    assert np.array_equal(g, np.zeros((1, 2)))


# ---------------------------------------------------------------------------
# Discrete barrier-decrease residual
# ---------------------------------------------------------------------------

def test_cbf_residual_zero_when_static_outside():
    # single integrator, zero control: h is constant, residual = alpha * h
    obs = Obstacle(center=[0.5, 0.5], half_extents=[0.1, 0.1])
    model = single_integrator_2d()
    x = np.array([0.9, 0.9])
    r = cbf_residual(obs, x, np.zeros(2), model, dt=0.1, cbf=CbfParams(alpha=0.25))
    assert r == pytest.approx(0.25 * l4_barrier(obs, x))


def test_cbf_residual_flags_inward_motion():
    obs = Obstacle(center=[0.5, 0.5], half_extents=[0.1, 0.1])
    model = single_integrator_2d()
    x = np.array([0.62, 0.5])  # just outside the right face
    inward = cbf_residual(
        obs, x, np.array([-1.0, 0.0]), model, dt=0.1, cbf=CbfParams(alpha=0.1)
    )
    outward = cbf_residual(
        obs, x, np.array([1.0, 0.0]), model, dt=0.1, cbf=CbfParams(alpha=0.1)
    )
    assert inward < 0 < outward


def test_cbf_residual_accepts_explicit_projection():
    obs = Obstacle(center=[0.5, 0.5], half_extents=[0.1, 0.1])
    model = double_integrator_2d()
    x = np.array([0.8, 0.5, 0.1, 0.0])
    by_default = cbf_residual(obs, x, np.zeros(2), model, dt=0.05, cbf=CbfParams())
    by_selector = cbf_residual(
        obs, x, np.zeros(2), model, dt=0.05, cbf=CbfParams(), g=[0, 1]
    )
    assert by_default == pytest.approx(by_selector, abs=1e-15)


def test_cbf_params_validation():
    with pytest.raises(ContractError):
        CbfParams(alpha=0.0)
    with pytest.raises(ContractError):
        CbfParams(alpha=1.5)
    with pytest.raises(ContractError):
        CbfParams(margin=-0.01)


# ---------------------------------------------------------------------------
# Constraint-set validation
# ---------------------------------------------------------------------------

def test_constraint_set_validation():
    with pytest.raises(ContractError):
        ConstraintSet(gamma=-0.1, u_lower=[-1], u_upper=[1], x0=[0.0, 0.0])
    with pytest.raises(ContractError):
        ConstraintSet(gamma=0.1, u_lower=[1], u_upper=[-1], x0=[0.0, 0.0])
    with pytest.raises(ContractError):
        ConstraintSet(gamma=0.1, u_lower=[-1], u_upper=[1], x0=[0.0], xf=[0.0, 0.0])
    with pytest.raises(ContractError):
        ConstraintSet(gamma=0.1, u_lower=[-1], u_upper=[1], x0=[0.0], tf_floor=0.0)


# ---------------------------------------------------------------------------
# Residual bundle
# ---------------------------------------------------------------------------

def test_bundle_layout_row_counts():
    obs = (Obstacle(center=[0.5, 0.5], half_extents=[0.1, 0.1]),)
    spec = make_spec(obstacles=obs)
    lay = bundle_layout(spec)
    N, n, m, v = spec.N, 4, 2, 2
    assert lay.n_eq == n + N * n + n
    # u bounds + ws bounds + cbf + ergodic + tf floor
    assert lay.n_ineq == 2 * N * m + 2 * (N + 1) * v + N + 1 + 1
    assert lay.ineq["ergodic"] == slice(lay.n_ineq - 2, lay.n_ineq - 1)
    assert lay.ineq["tf_floor"] == slice(lay.n_ineq - 1, lay.n_ineq)


def test_bundle_layout_drops_optional_rows():
    spec = make_spec(mode=Mode.FIXED_TIME, fixed_tf=5.0, xf_on=False, gamma=None)
    lay = bundle_layout(spec)
    assert "terminal" not in lay.eq
    assert "ergodic" not in lay.ineq
    assert "tf_floor" not in lay.ineq
    assert lay.ineq["cbf"].start == lay.ineq["cbf"].stop


def test_feasible_point_has_nonpositive_inequalities():
    spec = make_spec()
    # rest at x0 forever is dynamically feasible (zero controls, no motion)
    x = np.tile(spec.constraints.x0, (spec.N + 1, 1))
    dec = DecisionVector(
        x_knots=x, u_knots=np.zeros((spec.N, 2)), t_f=5.0
    )
    bundle = residual_bundle(dec, spec)
    lay = bundle.layout
    # dynamics rows: staying put satisfies the defects exactly
    assert bundle.eq[lay.eq["init"]] == pytest.approx(np.zeros(4), abs=1e-15)
    assert bundle.eq[lay.eq["defects"]] == pytest.approx(np.zeros(40), abs=1e-15)
    # terminal equality is violated (we never moved)
    assert np.abs(bundle.eq[lay.eq["terminal"]]).max() == pytest.approx(0.8)
    for name in ("u_upper", "u_lower", "ws_upper", "ws_lower", "tf_floor"):
        assert bundle.ineq[lay.ineq[name]].max(initial=-np.inf) <= 0.0
    # parked trajectory covers nothing: ergodic bound is violated
    assert bundle.ineq[lay.ineq["ergodic"]][0] > 0.0


def test_control_bound_rows_signal_violation():
    spec = make_spec()
    dec = initial_guess(spec, 5.0)
    u = dec.u_knots.copy()
    u[3, 1] = 1.75
    dec = DecisionVector(x_knots=dec.x_knots, u_knots=u, t_f=dec.t_f)
    bundle = residual_bundle(dec, spec)
    rows = bundle.ineq[bundle.layout.ineq["u_upper"]].reshape(spec.N, 2)
    assert rows[3, 1] == pytest.approx(0.75)
    assert rows[0, 0] == pytest.approx(-1.0)


def test_workspace_rows_signal_exit():
    spec = make_spec()
    dec = initial_guess(spec, 5.0)
    x = dec.x_knots.copy()
    x[4, 0] = 1.3
    dec = DecisionVector(x_knots=x, u_knots=dec.u_knots, t_f=dec.t_f)
    bundle = residual_bundle(dec, spec)
    rows = bundle.ineq[bundle.layout.ineq["ws_upper"]].reshape(spec.N + 1, 2)
    assert rows[4, 0] == pytest.approx(0.3)


def test_cbf_rows_match_scalar_residuals():
    obs = (
        Obstacle(center=[0.4, 0.4], half_extents=[0.1, 0.1]),
        Obstacle(center=[0.7, 0.7], half_extents=[0.05, 0.1], rotation=0.3),
    )
    margin = 5e-3
    spec = make_spec(obstacles=obs, con_kw=dict(cbf=CbfParams(alpha=0.2, margin=margin)))
    dec = initial_guess(spec, 5.0, "lerp+noise")
    bundle = residual_bundle(dec, spec)
    rows = bundle.ineq[bundle.layout.ineq["cbf"]].reshape(len(obs), spec.N)
    dt = dec.t_f / spec.N
    for i, ob in enumerate(obs):
        for t in (0, 3, spec.N - 1):
            want = margin - cbf_residual(
                ob,
                dec.x_knots[t],
                dec.u_knots[t],
                spec.model,
                dt,
                spec.constraints.cbf,
                scheme=spec.integrator,
            )
            assert rows[i, t] == pytest.approx(want, abs=1e-12)


def test_defect_rows_match_one_step_error():
    from ergotime.dynamics import step

    spec = make_spec()
    rng = np.random.default_rng(5)
    x = rng.uniform(0.2, 0.8, size=(spec.N + 1, 4))
    u = rng.uniform(-0.5, 0.5, size=(spec.N, 2))
    dec = DecisionVector(x_knots=x, u_knots=u, t_f=4.0)
    bundle = residual_bundle(dec, spec)
    rows = bundle.eq[bundle.layout.eq["defects"]].reshape(spec.N, 4)
    dt = 4.0 / spec.N
    for t in (0, 5, 9):
        want = x[t + 1] - step(spec.model, x[t], u[t], dt, spec.integrator)
        assert rows[t] == pytest.approx(want, abs=1e-12)


def test_bundle_shape_mismatch_raises():
    spec = make_spec()
    bad = DecisionVector(x_knots=np.zeros((5, 4)), u_knots=np.zeros((4, 2)), t_f=1.0)
    with pytest.raises(ContractError):
        residual_bundle(bad, spec)
