"""Rigid-body kinematics and dynamics on a reduced (mimic-free) model.

Kernels run in full joint coordinates and are projected with the constant
reduction map ``G``: ``M = G' M_full G``, ``tau = G' tau_full``,
``J = J_full G``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ReducedRobotModel, reduce_coordinates

GRAVITY = np.array([0.0, 0.0, -9.81])


@dataclass(frozen=True)
class JointState:
    q: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, model: ReducedRobotModel) -> "JointState":
        n = model.independent_dof
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class FramePlacement:
    position: np.ndarray
    rotation: np.ndarray


@dataclass(frozen=True)
class DynamicsQuantities:
    mass_matrix: np.ndarray
    bias: np.ndarray
    foot_jacobian: np.ndarray  # 6 x n, (linear; angular), world aligned
    jacobian_dot_v: np.ndarray
    foot: FramePlacement


def _check_state(model, state):
    n = model.independent_dof
    q = np.asarray(state.q, dtype=float)
    v = np.asarray(state.v, dtype=float)
    if q.shape != (n,) or v.shape != (n,):
        raise ValueError(f"state vectors must have length {n}")
    return q, v


def _full(model, state):
    q, v = _check_state(model, state)
    qf, vf, _ = reduce_coordinates(model, q, v)
    return qf, vf


def forward_kinematics(model: ReducedRobotModel, state: JointState, frame: str, backend=None) -> FramePlacement:
    kb = backend or kernels.backend
    body = model.frame_index(frame)
    q, _ = _full(model, state)
    if body < 0:
        return FramePlacement(np.zeros(3), np.eye(3))
    R, p = kb.placements(model.tree, q)
    return FramePlacement(p[body].copy(), R[body].copy())


def frame_jacobian(model: ReducedRobotModel, state: JointState, frame: str, backend=None) -> np.ndarray:
    """World-aligned 6 x n Jacobian of a frame origin, linear rows on top."""
    kb = backend or kernels.backend
    body = model.frame_index(frame)
    q, _ = _full(model, state)
    return kb.jacobian(model.tree, q, body) @ model.reduction_map


def jacobian_dot_v(model: ReducedRobotModel, state: JointState, frame: str, backend=None) -> np.ndarray:
    kb = backend or kernels.backend
    body = model.frame_index(frame)
    q, v = _full(model, state)
    return kb.bias_acceleration(model.tree, q, v, body)


def inverse_dynamics(model: ReducedRobotModel, state: JointState, a, gravity=GRAVITY, backend=None) -> np.ndarray:
    """Independent-coordinate torques for accelerations ``a`` (damping included)."""
    kb = backend or kernels.backend
    q, v = _check_state(model, state)
    a = np.asarray(a, dtype=float)
    if a.shape != q.shape:
        raise ValueError(f"acceleration vector must have length {len(q)}")
    qf, vf, af = reduce_coordinates(model, q, v, a)
    tau = kb.rnea(model.tree, qf, vf, af, np.asarray(gravity, dtype=float))
    tau = tau + model.damping * vf
    return model.reduction_map.T @ tau


def mass_matrix(model: ReducedRobotModel, state: JointState, backend=None) -> np.ndarray:
    kb = backend or kernels.backend
    q, _ = _full(model, state)
    G = model.reduction_map
    return G.T @ kb.crba(model.tree, q) @ G


def bias_forces(model: ReducedRobotModel, state: JointState, gravity=GRAVITY, backend=None) -> np.ndarray:
    """Coriolis, centrifugal, gravity and damping terms: ``inverse_dynamics(a=0)``."""
    return inverse_dynamics(model, state, np.zeros(model.independent_dof), gravity, backend)


def compute_quantities(model: ReducedRobotModel, state: JointState, frame: str = None,
                       gravity=GRAVITY, backend=None) -> DynamicsQuantities:
    """All terms of one control step in a single kernel call."""
    kb = backend or kernels.backend
    body = model.frame_index(frame or model.foot_frame)
    qf, vf = _full(model, state)
    M, b, J, jdv, R, p = kb.dynamics_terms(model.tree, qf, vf, body, np.asarray(gravity, dtype=float))
    G = model.reduction_map
    b = b + model.damping * vf
    return DynamicsQuantities(G.T @ M @ G, G.T @ b, J @ G, jdv, FramePlacement(p, R))


def forward_dynamics(model: ReducedRobotModel, state: JointState, tau, gravity=GRAVITY, backend=None) -> np.ndarray:
    M = mass_matrix(model, state, backend)
    b = bias_forces(model, state, gravity, backend)
    return np.linalg.solve(M, np.asarray(tau, dtype=float) - b)


def integrate_step(model: ReducedRobotModel, state: JointState, a, dt: float) -> JointState:
    """Semi-implicit Euler: velocity first, then position with the new velocity."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    q, v = _check_state(model, state)
    a = np.asarray(a, dtype=float)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v)) and np.all(np.isfinite(a)) and np.isfinite(dt)):
        raise ValueError("non-finite state or acceleration")
    v_next = v + a * dt
    return JointState(q + v_next * dt, v_next)


def kinetic_energy(model: ReducedRobotModel, state: JointState, backend=None) -> float:
    M = mass_matrix(model, state, backend)
    v = np.asarray(state.v, dtype=float)
    return 0.5 * float(v @ M @ v)


def potential_energy(model: ReducedRobotModel, state: JointState, gravity=GRAVITY, backend=None) -> float:
    kb = backend or kernels.backend
    q, _ = _full(model, state)
    R, p = kb.placements(model.tree, q)
    tree = model.tree
    g = np.asarray(gravity, dtype=float)
    total = 0.0
    for i in range(tree.nb):
        c = p[i] + R[i] @ tree.com[i]
        total -= tree.mass[i] * float(g @ c)
    return total
