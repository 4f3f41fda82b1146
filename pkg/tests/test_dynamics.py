import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import central_difference, double_pendulum_lagrangian
from conftest import double_pendulum_xml
from fastbench.dynamics import (
    JointState,
    bias_forces,
    compute_quantities,
    forward_dynamics,
    forward_kinematics,
    frame_jacobian,
    integrate_step,
    inverse_dynamics,
    jacobian_dot_v,
    kinetic_energy,
    mass_matrix,
    potential_energy,
)
from fastbench.model import parse_model


def _random_state(model, rng, scale=1.0):
    lo, hi = model.position_bounds
    q = rng.uniform(np.maximum(lo, -2.0), np.minimum(hi, 2.0))
    return JointState(q, scale * rng.normal(size=model.independent_dof))


def test_pendulum_hanging_tip(pendulum):
    tip = forward_kinematics(pendulum, JointState(np.zeros(1), np.zeros(1)), "tip")
    np.testing.assert_allclose(tip.position, [0.0, 0.0, -1.0], atol=1e-15)


def test_pendulum_horizontal_tip(pendulum):
    # rotating (0, 0, -1) about +y by pi/2 gives (-1, 0, 0)
    tip = forward_kinematics(pendulum, JointState(np.array([math.pi / 2]), np.zeros(1)), "tip")
    np.testing.assert_allclose(tip.position, [-1.0, 0.0, 0.0], atol=1e-15)
    R = tip.rotation
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(R) - 1.0) < 1e-12


def test_pendulum_static_torque_is_mgl(pendulum):
    tau = inverse_dynamics(pendulum, JointState(np.array([math.pi / 2]), np.zeros(1)), np.zeros(1))
    assert abs(tau[0] - 9.81) <= 1e-9


def test_pendulum_mass_matrix_is_ml2(pendulum):
    M = mass_matrix(pendulum, JointState(np.array([0.3]), np.zeros(1)))
    np.testing.assert_allclose(M, [[1.0]], atol=1e-15)


def test_pendulum_jacobian_at_rest(pendulum):
    J = frame_jacobian(pendulum, JointState(np.zeros(1), np.zeros(1)), "tip")
    # tip moves along -x at one metre per radian, perpendicular to the link
    np.testing.assert_allclose(J[:3, 0], [-1.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(J[3:, 0], [0.0, 1.0, 0.0], atol=1e-15)


def test_zero_gravity_rest_gives_zero_torque(branched, rng):
    s = JointState(_random_state(branched, rng).q, np.zeros(4))
    tau = inverse_dynamics(branched, s, np.zeros(4), gravity=np.zeros(3))
    np.testing.assert_array_equal(tau, np.zeros(4))


def test_double_pendulum_matches_lagrangian(double_pendulum, rng):
    mass, torque = double_pendulum_lagrangian()
    for _ in range(20):
        s = _random_state(double_pendulum, rng, 3.0)
        a = rng.normal(size=2) * 3
        tau = inverse_dynamics(double_pendulum, s, a)
        assert np.max(np.abs(tau - torque(s.q, s.v, a))) <= 1e-8
        assert np.max(np.abs(mass_matrix(double_pendulum, s) - mass(s.q))) <= 1e-8


@pytest.mark.parametrize("name", ["branched", "double_pendulum", "decart_model", "serial_model"])
def test_rnea_crba_consistency(name, request, rng):
    model = request.getfixturevalue(name)
    n = model.independent_dof
    for _ in range(10):
        s = _random_state(model, rng)
        M = mass_matrix(model, s)
        b = bias_forces(model, s)
        assert np.max(np.abs(M - M.T)) <= 1e-10
        for _ in range(10):
            a = rng.normal(size=n)
            assert np.max(np.abs(inverse_dynamics(model, s, a) - (M @ a + b))) <= 1e-8


@pytest.mark.parametrize("name, frame", [("branched", "e"), ("branched", "d"), ("decart_model", "foot"),
                                         ("serial_model", "foot")])
def test_jacobian_matches_finite_differences(name, frame, request, rng):
    model = request.getfixturevalue(name)
    for _ in range(10):
        s = _random_state(model, rng)
        J = frame_jacobian(model, s, frame)
        fd = central_difference(lambda q: forward_kinematics(model, JointState(q, s.v), frame).position, s.q)
        assert np.max(np.abs(J[:3] - fd)) <= 1e-5

        # angular rows: R(q + e h) R(q - e h)' ~ skew(2 h w)
        def rot(q):
            return forward_kinematics(model, JointState(q, s.v), frame).rotation

        h = 1e-6
        for k in range(model.independent_dof):
            e = np.zeros(model.independent_dof)
            e[k] = h
            W = (rot(s.q + e) - rot(s.q - e)) / (2 * h) @ rot(s.q).T
            w = np.array([W[2, 1], W[0, 2], W[1, 0]])
            assert np.max(np.abs(J[3:, k] - w)) <= 1e-5


def test_off_path_columns_are_zero(branched, rng):
    s = _random_state(branched, rng)
    J = frame_jacobian(branched, s, "d")
    for name in ("j_c", "j_e"):
        assert np.all(J[:, branched.independent_joints.index(name)] == 0.0)


@pytest.mark.parametrize("name", ["branched", "decart_model"])
def test_jacobian_dot_v_matches_finite_differences(name, request, rng):
    model = request.getfixturevalue(name)
    for _ in range(5):
        s = _random_state(model, rng)
        h = 1e-6
        Jp = frame_jacobian(model, JointState(s.q + h * s.v, s.v), model.foot_frame)
        Jm = frame_jacobian(model, JointState(s.q - h * s.v, s.v), model.foot_frame)
        fd = (Jp - Jm) / (2 * h) @ s.v
        assert np.max(np.abs(jacobian_dot_v(model, s, model.foot_frame) - fd)) <= 1e-5


@pytest.mark.parametrize("name", ["branched", "decart_model", "double_pendulum"])
def test_gravity_bias_is_potential_gradient(name, request, rng):
    model = request.getfixturevalue(name)
    for _ in range(5):
        s = _random_state(model, rng)
        rest = JointState(s.q, np.zeros_like(s.q))
        grad = central_difference(lambda q: potential_energy(model, JointState(q, s.v)), s.q)
        assert np.max(np.abs(bias_forces(model, rest) - grad)) <= 1e-6


def test_compute_quantities_agrees_with_separate_calls(decart_model, rng):
    s = _random_state(decart_model, rng)
    dq = compute_quantities(decart_model, s)
    np.testing.assert_allclose(dq.mass_matrix, mass_matrix(decart_model, s), atol=1e-12)
    np.testing.assert_allclose(dq.bias, bias_forces(decart_model, s), atol=1e-12)
    np.testing.assert_allclose(dq.foot_jacobian, frame_jacobian(decart_model, s, "foot"), atol=1e-12)
    np.testing.assert_allclose(dq.jacobian_dot_v, jacobian_dot_v(decart_model, s, "foot"), atol=1e-12)
    np.testing.assert_allclose(dq.foot.position, forward_kinematics(decart_model, s, "foot").position, atol=1e-12)


def test_decart_mass_matrix_positive_definite(decart_model, serial_model, rng):
    for model in (decart_model, serial_model):
        for _ in range(100):
            M = mass_matrix(model, _random_state(model, rng))
            assert np.linalg.eigvalsh(M).min() > 0


def test_decart_stretched_foot_below_hip(decart_model, decart_params):
    foot = forward_kinematics(decart_model, JointState.zeros(decart_model), "foot")
    np.testing.assert_allclose(foot.position, [0.0, 0.0, -decart_params.extension], atol=1e-15)
    assert decart_params.extension == pytest.approx(0.65, abs=1e-15)


def test_damping_adds_viscous_torque(rng):
    plain = parse_model(double_pendulum_xml(), foot_frame="tip")
    damped = parse_model(double_pendulum_xml(damping=0.3), foot_frame="tip")
    s = _random_state(plain, rng)
    a = rng.normal(size=2)
    diff = inverse_dynamics(damped, s, a) - inverse_dynamics(plain, s, a)
    np.testing.assert_allclose(diff, 0.3 * s.v, atol=1e-12)


def test_forward_dynamics_inverts_inverse_dynamics(branched, rng):
    s = _random_state(branched, rng)
    tau = rng.normal(size=4)
    a = forward_dynamics(branched, s, tau)
    np.testing.assert_allclose(inverse_dynamics(branched, s, a), tau, atol=1e-10)


def test_integrate_step_constant_velocity(pendulum):
    s = integrate_step(pendulum, JointState(np.zeros(1), np.ones(1)), np.zeros(1), 0.001)
    assert s.q[0] == 0.001 and s.v[0] == 1.0


def test_integrate_constant_acceleration():
    # closed form of semi-implicit Euler: v_N = a N dt, q_N = a dt^2 N (N + 1) / 2
    from conftest import PENDULUM

    model = parse_model(PENDULUM)
    s = JointState(np.zeros(1), np.zeros(1))
    for _ in range(1000):
        s = integrate_step(model, s, np.array([2.0]), 1e-3)
    assert s.v[0] == pytest.approx(2.0, abs=1e-12)
    assert s.q[0] == pytest.approx(1.001, abs=1e-12)


@pytest.mark.parametrize("dt", [0.0, -1e-3, float("nan")])
def test_integrate_rejects_bad_dt(pendulum, dt):
    with pytest.raises(ValueError):
        integrate_step(pendulum, JointState(np.zeros(1), np.zeros(1)), np.zeros(1), dt)


def test_integrate_rejects_non_finite(pendulum):
    with pytest.raises(ValueError):
        integrate_step(pendulum, JointState(np.array([np.inf]), np.zeros(1)), np.zeros(1), 1e-3)


def test_state_length_is_checked(pendulum):
    with pytest.raises(ValueError):
        mass_matrix(pendulum, JointState(np.zeros(2), np.zeros(2)))


def free_swing_energy_drift(model, q0, dt=1e-4, horizon=10.0):
    """Largest |E - E0| / E_swing over an unactuated, undamped swing.

    ``E_swing`` is the initial energy measured from the hanging rest pose.
    """
    n = model.independent_dof
    s = JointState(np.asarray(q0, dtype=float), np.zeros(n))
    rest = potential_energy(model, JointState(np.zeros(n), np.zeros(n)))
    e0 = potential_energy(model, s)
    swing = e0 - rest
    worst = 0.0
    for k in range(int(round(horizon / dt))):
        a = forward_dynamics(model, s, np.zeros(n))
        s = integrate_step(model, s, a, dt)
        if k % 50 == 0:
            e = kinetic_energy(model, s) + potential_energy(model, s)
            worst = max(worst, abs(e - e0))
    return worst / swing


def test_double_pendulum_energy_drift_small(double_pendulum):
    assert free_swing_energy_drift(double_pendulum, [0.8, -0.4], horizon=2.0) <= 0.01


@settings(max_examples=25, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(-5.0, 5.0), st.floats(-10.0, 10.0))
def test_pendulum_torque_closed_form(q, v, a):
    from conftest import PENDULUM

    model = parse_model(PENDULUM)
    tau = inverse_dynamics(model, JointState(np.array([q]), np.array([v])), np.array([a]))
    # point mass at l = 1: tau = m l^2 a + m g l sin q
    assert tau[0] == pytest.approx(a + 9.81 * math.sin(q), abs=1e-9)


def test_decart_full_extension_height(decart_params, decart_model):
    # at j1 = j2 = 0 the ankle height is affine in cos(j3)
    k = decart_model.independent_joints.index("j3_leg_length")
    for j3 in np.linspace(-3.0, 0.0, 7):
        q = np.zeros(6)
        q[k] = j3
        z = forward_kinematics(decart_model, JointState(q, np.zeros(6)), "foot").position[2]
        expected = -(decart_params.fixed_length + 2 * decart_params.l2 * math.cos(j3))
        assert z == pytest.approx(expected, abs=1e-14)

