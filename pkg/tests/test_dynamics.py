"""Vehicle models, integration schemes, and step Jacobians."""

import math

import numpy as np
import pytest

from ergotime import (
    ContractError,
    IntegratorKind,
    aircraft_3d,
    double_integrator_1d,
    double_integrator_2d,
    single_integrator_2d,
    step,
)
from ergotime.dynamics import MODELS, step_with_jacobians


def test_double_integrator_flow_is_velocity_then_control():
    model = double_integrator_2d()
    assert np.allclose(model.flow(np.array([0, 0, 1, 2.0]), np.zeros(2)), [1, 2, 0, 0])
    assert np.allclose(model.flow(np.zeros(4), np.array([1.0, -1.0])), [0, 0, 1, -1])


def test_double_integrator_euler_step():
    model = double_integrator_2d()
    x1 = step(model, np.array([0, 0, 1, 0.0]), np.zeros(2), 0.1, IntegratorKind.EULER)
    assert np.allclose(x1, [0.1, 0, 1, 0])


def test_single_integrator_flow_is_control():
    model = single_integrator_2d()
    assert np.allclose(model.flow(np.array([1.0, 1.0]), np.array([0.5, -0.5])), [0.5, -0.5])
    assert np.allclose(model.flow(np.array([3.0, -2.0]), np.zeros(2)), 0.0)


def test_single_integrator_euler_is_exact_and_matches_rk4():
    rng = np.random.default_rng(8)
    model = single_integrator_2d()
    for _ in range(10):
        x = rng.normal(size=2)
        u = rng.normal(size=2)
        dt = float(rng.uniform(0.01, 1.0))
        via_euler = step(model, x, u, dt, IntegratorKind.EULER)
        via_rk4 = step(model, x, u, dt, IntegratorKind.RK4)
        assert np.allclose(via_euler - x, dt * u, rtol=0, atol=1e-15)
        assert np.allclose(via_euler, via_rk4, atol=1e-15)


def test_single_integrator_two_half_steps_compose_exactly():
    model = single_integrator_2d()
    x = np.array([0.2, 0.4])
    u = np.array([-0.3, 0.9])
    one = step(model, x, u, 0.5, IntegratorKind.EULER)
    two = step(model, step(model, x, u, 0.25, IntegratorKind.EULER), u, 0.25, IntegratorKind.EULER)
    assert np.allclose(one, two, atol=1e-15)


def test_aircraft_level_flight_heads_along_x():
    model = aircraft_3d()
    x = np.array([0, 0, 0, 0, 0, 2.0])       # psi=0, phi=0, v=2
    assert np.allclose(model.flow(x, np.zeros(3))[:3], [2, 0, 0])


def test_aircraft_vertical_pitch_climbs():
    model = aircraft_3d()
    x = np.array([0, 0, 0, 0, math.pi / 2, 3.0])
    d = model.flow(x, np.zeros(3))
    assert np.allclose(d[:3], [0, 0, 3], atol=1e-12)


def test_aircraft_flow_matches_trig_expansion():
    rng = np.random.default_rng(19)
    model = aircraft_3d()
    for _ in range(10):
        x = rng.normal(size=6)
        u = rng.normal(size=3)
        psi, phi, v = x[3], x[4], x[5]
        want = np.array(
            [
                v * math.cos(phi) * math.cos(psi),
                v * math.cos(phi) * math.sin(psi),
                v * math.sin(phi),
                u[0],
                u[1],
                u[2],
            ]
        )
        assert np.allclose(model.flow(x, u), want, atol=1e-12)


def test_rk4_reproduces_quadratic_kinematics():
    # constant acceleration has an exact quadratic solution
    model = double_integrator_2d()
    x = np.array([1.0, -2.0, 0.5, 0.25])
    u = np.array([0.3, -0.6])
    dt = 0.7
    got = step(model, x, u, dt, IntegratorKind.RK4)
    want = np.concatenate([x[:2] + x[2:] * dt + 0.5 * u * dt**2, x[2:] + u * dt])
    assert np.allclose(got, want, atol=1e-12)


def test_step_rejects_nonpositive_dt():
    model = double_integrator_2d()
    with pytest.raises(ContractError):
        step(model, np.zeros(4), np.zeros(2), 0.0, IntegratorKind.EULER)


def test_registry_round_trips_models():
    for name in ("double-integrator-2d", "single-integrator-2d", "aircraft-3d", "double-integrator-1d"):
        model = MODELS[name]()
        assert model.name == name
        assert len(model.g_selector) <= model.state_dim


def test_one_dimensional_double_integrator_shapes():
    model = double_integrator_1d()
    assert model.state_dim == 2 and model.control_dim == 1
    assert np.allclose(model.flow(np.array([0.0, 2.0]), np.array([0.5])), [2.0, 0.5])


def test_projection_selects_workspace_coordinates():
    model = double_integrator_2d()
    x = np.array([0.1, 0.2, 9.9, 8.8])
    assert np.allclose(model.g(x), [0.1, 0.2])
    batch = np.tile(x, (3, 1))
    assert model.g(batch).shape == (3, 2)


def test_step_jacobians_match_finite_differences():
    rng = np.random.default_rng(77)
    cases = [
        (double_integrator_2d(), IntegratorKind.EULER),
        (double_integrator_2d(), IntegratorKind.RK4),
        (single_integrator_2d(), IntegratorKind.RK4),
        (aircraft_3d(), IntegratorKind.EULER),
        (aircraft_3d(), IntegratorKind.RK4),
        (double_integrator_1d(), IntegratorKind.RK4),
    ]
    eps = 1e-6
    for model, scheme in cases:
        n, m = model.state_dim, model.control_dim
        x = rng.normal(size=(1, n))
        u = rng.normal(size=(1, m))
        dt = 0.21
        _, S_x, S_u, S_dt = step_with_jacobians(model, x, u, dt, scheme)

        def f(xx, uu, h):
            return step(model, xx, uu, h, scheme)[0]

        for j in range(n):
            dx = np.zeros((1, n))
            dx[0, j] = eps
            fd = (f(x + dx, u, dt) - f(x - dx, u, dt)) / (2 * eps)
            assert np.allclose(S_x[0, :, j], fd, rtol=1e-5, atol=1e-7), (model.name, scheme)
        for j in range(m):
            du = np.zeros((1, m))
            du[0, j] = eps
            fd = (f(x, u + du, dt) - f(x, u - du, dt)) / (2 * eps)
            assert np.allclose(S_u[0, :, j], fd, rtol=1e-5, atol=1e-7)
        fd = (f(x, u, dt + eps) - f(x, u, dt - eps)) / (2 * eps)
        assert np.allclose(S_dt[0], fd, rtol=1e-5, atol=1e-7)
