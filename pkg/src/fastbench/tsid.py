"""Per-step task-space inverse dynamics as a small dense QP.

Torques are eliminated through ``tau = M a + b`` (fixed base, every
independent joint actuated), so the decision vector is the joint
acceleration alone::

    minimize   |J a + Jdot v - a_task|^2 + w |a|^2
    subject to -tau_max <= M a + b <= tau_max
               -v_max  <= v + a dt <= v_max
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import DynamicsQuantities, JointState, compute_quantities
from .model import ReducedRobotModel

OPTIMAL, INFEASIBLE, MAX_ITERATIONS = "optimal", "infeasible", "max_iterations"
_STATUS = {kernels.QP_OPTIMAL: OPTIMAL, kernels.QP_INFEASIBLE: INFEASIBLE, kernels.QP_MAX_ITER: MAX_ITERATIONS}


class SingularMassMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class Gains:
    kp: float = 400.0
    kd: float = 40.0
    kp_angular: float = 100.0
    kd_angular: float = 20.0

    def __post_init__(self):
        if not (self.kp > 0 and self.kd > 0):
            raise ValueError("gains must be positive")


@dataclass(frozen=True)
class FootReference:
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    rotation: np.ndarray = None  # only used by the angular task


@dataclass(frozen=True)
class TsidProblem:
    quantities: DynamicsQuantities
    velocity: np.ndarray
    task_reference: np.ndarray
    task_jacobian: np.ndarray
    task_drift: np.ndarray
    gains: Gains
    torque_bounds: np.ndarray
    velocity_bounds: np.ndarray
    dt: float
    regularization_weight: float = 1e-6
    # QP data in "C x <= d" form, filled by __post_init__
    hessian: np.ndarray = field(init=False, repr=False)
    gradient: np.ndarray = field(init=False, repr=False)
    constraint_matrix: np.ndarray = field(init=False, repr=False)
    constraint_bound: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.regularization_weight > 0:
            raise ValueError("regularization weight must be positive")
        J, drift, target = self.task_jacobian, self.task_drift, self.task_reference
        n = J.shape[1]
        M, b = self.quantities.mass_matrix, self.quantities.bias
        H = 2.0 * (J.T @ J + self.regularization_weight * np.eye(n))
        g = 2.0 * J.T @ (drift - target)
        eye = np.eye(n)
        C = np.vstack([M, -M, eye, -eye])
        tmax, vmax, v, dt = self.torque_bounds, self.velocity_bounds, self.velocity, self.dt
        d = np.concatenate([tmax - b, tmax + b, (vmax - v) / dt, (vmax + v) / dt])
        object.__setattr__(self, "hessian", H)
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "constraint_matrix", C)
        object.__setattr__(self, "constraint_bound", d)

    def torques(self, a):
        return self.quantities.mass_matrix @ a + self.quantities.bias

    def cost(self, a):
        r = self.task_jacobian @ a + self.task_drift - self.task_reference
        return float(r @ r + self.regularization_weight * a @ a)


@dataclass(frozen=True)
class TsidSolution:
    accelerations: np.ndarray
    torques: np.ndarray
    task_residual: float
    status: str
    multipliers: np.ndarray = None
    iterations: int = 0


def _rotation_error(R_ref, R):
    E = R_ref @ R.T
    return 0.5 * np.array([E[2, 1] - E[1, 2], E[0, 2] - E[2, 0], E[1, 0] - E[0, 1]])


def task_acceleration(ref: FootReference, position, velocity, gains: Gains):
    """PD-corrected desired foot acceleration."""
    return (np.asarray(ref.acceleration) + gains.kp * (np.asarray(ref.position) - position)
            + gains.kd * (np.asarray(ref.velocity) - velocity))


def formulate(model: ReducedRobotModel, state: JointState, foot_ref: FootReference, gains: Gains = Gains(),
              dt: float = 1e-3, regularization_weight: float = 1e-6, quantities: DynamicsQuantities = None,
              track_orientation: bool = False) -> TsidProblem:
    """Build the QP for one control step.

    ``foot_ref`` is in world coordinates. ``quantities`` may be passed when the
    caller already evaluated the dynamics at ``state``.
    """
    q, v = np.asarray(state.q, dtype=float), np.asarray(state.v, dtype=float)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
        raise ValueError("non-finite state")
    if quantities is None:
        quantities = compute_quantities(model, state)
    try:
        np.linalg.cholesky(quantities.mass_matrix)
    except np.linalg.LinAlgError:
        raise SingularMassMatrixError("mass matrix is singular or indefinite") from None
    J = quantities.foot_jacobian
    foot_p = quantities.foot.position
    foot_v = J[:3] @ v
    target = task_acceleration(foot_ref, foot_p, foot_v, gains)
    task_J, drift = J[:3], quantities.jacobian_dot_v[:3]
    if track_orientation:
        R_ref = foot_ref.rotation if foot_ref.rotation is not None else quantities.foot.rotation
        omega = J[3:] @ v
        ang = gains.kp_angular * _rotation_error(R_ref, quantities.foot.rotation) - gains.kd_angular * omega
        target = np.concatenate([target, ang])
        task_J, drift = J, quantities.jacobian_dot_v
    return TsidProblem(
        quantities=quantities,
        velocity=v,
        task_reference=target,
        task_jacobian=task_J,
        task_drift=drift,
        gains=gains,
        torque_bounds=model.effort_max,
        velocity_bounds=model.velocity_max,
        dt=dt,
        regularization_weight=regularization_weight,
    )


def solve(problem: TsidProblem, max_iter: int = 200, backend=None) -> TsidSolution:
    kb = backend or kernels.backend
    x, lam, status, iters, _ = kb.solve_qp(
        problem.hessian, problem.gradient, problem.constraint_matrix, problem.constraint_bound, max_iter
    )
    x = np.asarray(x)
    r = problem.task_jacobian @ x + problem.task_drift - problem.task_reference
    return TsidSolution(
        accelerations=x,
        torques=problem.torques(x),
        task_residual=float(np.linalg.norm(r)),
        status=_STATUS[int(status)],
        multipliers=np.asarray(lam),
        iterations=int(iters),
    )


def qp_kkt_residual(H, g, C, d, x, lam) -> float:
    """Max-norm of stationarity, primal/dual feasibility and complementarity."""
    H, g, C, d = (np.asarray(a, dtype=float) for a in (H, g, C, d))
    x, lam = np.asarray(x, dtype=float), np.asarray(lam, dtype=float)
    parts = [np.abs(H @ x + g + (C.T @ lam if len(d) else 0.0))]
    if len(d):
        slack = d - C @ x
        parts += [np.maximum(-slack, 0.0), np.maximum(-lam, 0.0), np.abs(lam * slack)]
    return float(max(np.max(p, initial=0.0) for p in parts))


def kkt_residual(problem: TsidProblem, solution: TsidSolution) -> float:
    return qp_kkt_residual(problem.hessian, problem.gradient, problem.constraint_matrix,
                           problem.constraint_bound, solution.accelerations, solution.multipliers)
