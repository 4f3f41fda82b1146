import numpy as np
import pytest

from fastbench.dynamics import JointState, compute_quantities, forward_kinematics, inverse_dynamics
from fastbench.metric import solve_initial_pose
from fastbench.trajectory import compute_geometry
from fastbench.tsid import (
    OPTIMAL,
    FootReference,
    Gains,
    SingularMassMatrixError,
    formulate,
    kkt_residual,
    solve,
    task_acceleration,
)


@pytest.fixture(scope="module")
def start_state(decart_model):
    g = compute_geometry(decart_model)
    return solve_initial_pose(decart_model, g.to_world(g.start), g)


def _moving(state, rng, scale=1.0):
    return JointState(state.q + 0.05 * rng.normal(size=len(state.q)), scale * rng.normal(size=len(state.q)))


def _ref(position, velocity=None, acceleration=None):
    z = np.zeros(3)
    return FootReference(np.asarray(position), z if velocity is None else velocity,
                         z if acceleration is None else acceleration)


def test_on_reference_at_rest_gives_zero_acceleration(decart_model, start_state):
    foot = forward_kinematics(decart_model, start_state, "foot").position
    sol = solve(formulate(decart_model, start_state, _ref(foot)))
    assert sol.status == OPTIMAL
    np.testing.assert_allclose(sol.accelerations, 0.0, atol=1e-12)


def test_position_error_gives_pd_acceleration(decart_model, start_state):
    gains = Gains()
    foot = forward_kinematics(decart_model, start_state, "foot").position
    e = 0.002
    target = task_acceleration(_ref(foot + [e, 0, 0]), foot, np.zeros(3), gains)
    np.testing.assert_allclose(target, [gains.kp * e, 0.0, 0.0], atol=1e-12)
    problem = formulate(decart_model, start_state, _ref(foot + [e, 0, 0]), gains)
    sol = solve(problem)
    achieved = problem.task_jacobian @ sol.accelerations + problem.task_drift
    np.testing.assert_allclose(achieved, target, atol=1e-4)


def test_velocity_error_uses_kd():
    gains = Gains(kp=100.0, kd=7.0)
    out = task_acceleration(_ref(np.zeros(3), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 3.0])),
                            np.zeros(3), np.zeros(3), gains)
    np.testing.assert_array_equal(out, [0.0, 7.0, 3.0])


def test_torques_are_inverse_dynamics_of_solution(decart_model, start_state, rng):
    for _ in range(20):
        s = _moving(start_state, rng)
        foot = forward_kinematics(decart_model, s, "foot").position
        problem = formulate(decart_model, s, _ref(foot + rng.normal(scale=0.01, size=3), rng.normal(size=3)))
        sol = solve(problem)
        assert sol.status == OPTIMAL
        tau_id = inverse_dynamics(decart_model, s, sol.accelerations)
        assert np.max(np.abs(sol.torques - tau_id)) <= 1e-8
        # eliminated torques re-derived from the solution
        M, b = problem.quantities.mass_matrix, problem.quantities.bias
        assert np.max(np.abs(np.abs(M @ sol.accelerations + b) - np.abs(sol.torques))) <= 1e-10
        assert kkt_residual(problem, sol) <= 1e-6


def test_bounds_honoured_when_active(decart_model, start_state, rng):
    weak = decart_model.with_scaled_limits(0.05, 0.2)
    hit = 0
    for _ in range(20):
        s = _moving(start_state, rng, 0.5)
        s = JointState(s.q, np.clip(s.v, -weak.velocity_max, weak.velocity_max))
        foot = forward_kinematics(weak, s, "foot").position
        problem = formulate(weak, s, _ref(foot + rng.normal(scale=0.05, size=3), rng.normal(size=3)))
        sol = solve(problem)
        if sol.status != OPTIMAL:
            continue
        hit += 1
        assert np.all(np.abs(sol.torques) <= weak.effort_max + 1e-9)
        assert np.all(np.abs(s.v + sol.accelerations * problem.dt) <= weak.velocity_max + 1e-9)
        assert kkt_residual(problem, sol) <= 1e-6
    assert hit > 0


def test_relaxing_torque_bounds_never_raises_cost(decart_model, start_state, rng):
    for _ in range(20):
        s = _moving(start_state, rng)
        foot = forward_kinematics(decart_model, s, "foot").position
        ref = _ref(foot + rng.normal(scale=0.05, size=3), rng.normal(size=3))
        costs = []
        for scale in (0.25, 0.5, 1.0, 2.0):
            m = decart_model.with_scaled_limits(scale)
            problem = formulate(m, s, ref)
            sol = solve(problem)
            costs.append(problem.cost(sol.accelerations) if sol.status == OPTIMAL else np.inf)
        assert all(b <= a + 1e-9 * max(1.0, abs(a)) for a, b in zip(costs, costs[1:]))


def test_inactive_bounds_give_regularized_least_squares(decart_model, start_state, rng):
    strong = decart_model.with_scaled_limits(1e4, 1e4)
    for _ in range(10):
        s = _moving(start_state, rng)
        foot = forward_kinematics(strong, s, "foot").position
        problem = formulate(strong, s, _ref(foot + rng.normal(scale=0.01, size=3)))
        sol = solve(problem)
        J, w = problem.task_jacobian, problem.regularization_weight
        closed = np.linalg.solve(J.T @ J + w * np.eye(J.shape[1]), J.T @ (problem.task_reference - problem.task_drift))
        assert np.max(np.abs(sol.accelerations - closed)) <= 1e-8


def test_orientation_task_is_optional(decart_model, start_state):
    foot = forward_kinematics(decart_model, start_state, "foot")
    p = formulate(decart_model, start_state, _ref(foot.position), track_orientation=True)
    assert p.task_jacobian.shape == (6, 6)
    sol = solve(p)
    assert sol.status == OPTIMAL
    np.testing.assert_allclose(sol.accelerations, 0.0, atol=1e-12)


def test_invalid_inputs_rejected(decart_model, start_state):
    with pytest.raises(ValueError):
        Gains(kp=0.0)
    foot = forward_kinematics(decart_model, start_state, "foot").position
    with pytest.raises(ValueError):
        formulate(decart_model, start_state, _ref(foot), regularization_weight=0.0)
    with pytest.raises(ValueError):
        formulate(decart_model, JointState(start_state.q * np.nan, start_state.v), _ref(foot))


def test_singular_mass_matrix_detected(decart_model, start_state):
    q = compute_quantities(decart_model, start_state)
    bad = type(q)(np.zeros_like(q.mass_matrix), q.bias, q.foot_jacobian, q.jacobian_dot_v, q.foot)
    with pytest.raises(SingularMassMatrixError):
        formulate(decart_model, start_state, _ref(q.foot.position), quantities=bad)
