"""Fastest achievable swing time: closed-loop simulation and duration scan."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .dynamics import JointState, compute_quantities, integrate_step
from .model import ReducedRobotModel
from .trajectory import SwingGeometry, SwingTrajectory, build_spline, compute_geometry, duration_grid
from .tsid import OPTIMAL, FootReference, Gains, SingularMassMatrixError, formulate, kkt_residual, solve

CRITERIA_MODES = ("terminal", "pointwise")
POSITION, VELOCITY, SOLVER = "position", "velocity", "solver"


class UnreachableTargetError(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationCriteria:
    """Pass thresholds. The position test is strict (``error < tol``), the
    velocity test is not (``error <= tol``)."""

    position_tolerance_fraction: float = 0.03
    velocity_tolerance: float = 0.1
    mode: str = "terminal"
    velocity_per_axis: bool = False

    def __post_init__(self):
        if not (self.position_tolerance_fraction > 0 and self.velocity_tolerance > 0):
            raise ValueError("tolerances must be strictly positive")
        if self.mode not in CRITERIA_MODES:
            raise ValueError(f"criteria mode must be one of {CRITERIA_MODES}")

    def position_error(self, achieved, reference) -> float:
        err = np.linalg.norm(np.asarray(achieved) - np.asarray(reference), axis=-1)
        return float(err[-1] if self.mode == "terminal" else err.max())

    def velocity_error(self, achieved, reference) -> float:
        diff = np.asarray(achieved) - np.asarray(reference)
        err = np.abs(diff).max(axis=-1) if self.velocity_per_axis else np.linalg.norm(diff, axis=-1)
        return float(err.max())

    def judge(self, position_error: float, velocity_error: float, swing_length: float) -> Optional[str]:
        """Failure reason, or None when both criteria hold."""
        if not position_error < self.position_tolerance_fraction * swing_length:
            return POSITION
        if not velocity_error <= self.velocity_tolerance:
            return VELOCITY
        return None


@dataclass(frozen=True)
class SimulationOptions:
    gains: Gains = Gains()
    dt: float = 1e-3
    regularization_weight: float = 1e-6
    profile: str = "cubic"
    max_qp_iterations: int = 200


@dataclass(frozen=True)
class SwingSimulationTrace:
    """Per-sample record of one closed-loop swing (world coordinates).

    Sample ``k`` is the state at ``times[k]``; torques are those applied over
    the following step, so the last torque row repeats its predecessor.
    """

    duration: float
    times: np.ndarray
    foot_positions: np.ndarray
    foot_velocities: np.ndarray
    reference_positions: np.ndarray
    reference_velocities: np.ndarray
    torques: np.ndarray
    joint_positions: np.ndarray
    joint_velocities: np.ndarray
    passed: bool
    failure_reason: Optional[str]
    position_error: float
    velocity_error: float
    max_kkt_residual: float
    solver_steps: int


@dataclass(frozen=True)
class FastResult:
    model_name: str
    swing_length: float
    fastest_time: Optional[float]
    theoretical_velocity: Optional[float]
    traces: tuple = field(repr=False)
    geometry: SwingGeometry = field(repr=False, default=None)

    @property
    def achievable(self) -> bool:
        return self.fastest_time is not None

    @property
    def passing_trace(self) -> Optional[SwingSimulationTrace]:
        for tr in self.traces:
            if tr.passed:
                return tr
        return None


def theoretical_velocity(swing_length: float, fastest_time: float) -> float:
    return swing_length / fastest_time


# ---------------------------------------------------------------------------
# initial pose


def _foot_position(model, q, kb):
    from .model import reduce_coordinates

    body = model.frame_index(model.foot_frame)
    qf = reduce_coordinates(model, q)
    R, p = kb.placements(model.tree, qf)
    J = kb.jacobian(model.tree, qf, body)[:3] @ model.reduction_map
    return p[body], J


def default_start(model: ReducedRobotModel, geometry: SwingGeometry) -> np.ndarray:
    """Full extension nudged 5% toward mid-range, off the stretch singularity."""
    lo, hi = model.position_bounds
    q_ext = geometry.extension_q if geometry.extension_q is not None else np.clip(np.zeros(len(lo)), lo, hi)
    return q_ext + 0.05 * (0.5 * (lo + hi) - q_ext)


def solve_initial_pose(model: ReducedRobotModel, target, geometry: SwingGeometry = None, start=None,
                       tol: float = 1e-6, max_iter: int = 500, damping: float = 1e-3,
                       max_step: float = 0.1, return_iterations: bool = False):
    """Damped least-squares placement of the foot at world point ``target``.

    Starts from ``start`` (default: :func:`default_start`), respects joint
    bounds, and returns a zero-velocity :class:`JointState`. Steps are capped
    at ``max_step`` rad so one long step cannot jump to a folded singularity.
    """
    kb = kernels.backend
    if start is None:
        if geometry is None:
            geometry = compute_geometry(model)
        start = default_start(model, geometry)
    target = np.asarray(target, dtype=float)
    lo, hi = model.position_bounds
    q = np.clip(np.asarray(start, dtype=float), lo, hi)
    lam2 = damping**2
    for it in range(max_iter + 1):
        p, J = _foot_position(model, q, kb)
        err = target - p
        if np.linalg.norm(err) <= tol:
            state = JointState(q, np.zeros_like(q))
            return (state, it) if return_iterations else state
        if it == max_iter:
            break
        dq = J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(3), err)
        size = np.abs(dq).max()
        if size > max_step:
            dq *= max_step / size
        q = np.clip(q + dq, lo, hi)
    raise UnreachableTargetError(f"foot target {target} not reached (residual {np.linalg.norm(err):.3g} m)")


# ---------------------------------------------------------------------------
# closed loop


def simulate_swing(model: ReducedRobotModel, trajectory: SwingTrajectory,
                   criteria: EvaluationCriteria = EvaluationCriteria(), gains: Gains = None,
                   dt: float = None, options: SimulationOptions = SimulationOptions(),
                   initial_state: JointState = None) -> SwingSimulationTrace:
    """Track ``trajectory`` with the per-step QP and judge the result.

    The control period is the trajectory's own sample spacing; ``dt``, when
    given, must agree with it.
    """
    if gains is not None:
        options = replace(options, gains=gains)
    if dt is not None and abs(dt - trajectory.dt) > 0.5 * trajectory.dt:
        raise ValueError("dt does not match the trajectory sampling")
    geo = trajectory.geometry
    step = trajectory.dt
    ref_p = geo.to_world(trajectory.positions)
    ref_v = geo.vector_to_world(trajectory.velocities)
    ref_a = geo.vector_to_world(trajectory.accelerations)
    state = initial_state or solve_initial_pose(model, ref_p[0], geo)
    n = len(trajectory.times)
    nq = model.independent_dof
    foot_p = np.full((n, 3), np.nan)
    foot_v = np.full((n, 3), np.nan)
    tau = np.full((n, nq), np.nan)
    qs = np.full((n, nq), np.nan)
    vs = np.full((n, nq), np.nan)
    worst_kkt = 0.0
    reason = None
    k_last = n - 1
    for k in range(n):
        try:
            quantities = compute_quantities(model, state)
        except ValueError:
            reason, k_last = SOLVER, k - 1
            break
        foot_p[k] = quantities.foot.position
        foot_v[k] = quantities.foot_jacobian[:3] @ state.v
        qs[k], vs[k] = state.q, state.v
        if k == n - 1:
            tau[k] = tau[k - 1]
            break
        ref = FootReference(ref_p[k], ref_v[k], ref_a[k])
        try:
            problem = formulate(model, state, ref, options.gains, step, options.regularization_weight, quantities)
        except SingularMassMatrixError:
            reason, k_last = SOLVER, k
            break
        sol = solve(problem, options.max_qp_iterations)
        if sol.status != OPTIMAL:
            reason, k_last = SOLVER, k
            break
        worst_kkt = max(worst_kkt, kkt_residual(problem, sol))
        tau[k] = sol.torques
        state = integrate_step(model, state, sol.accelerations, step)

    if reason == SOLVER:
        upto = max(k_last + 1, 1)
        pos_err = criteria.position_error(foot_p[:upto], ref_p[:upto])
        vel_err = criteria.velocity_error(foot_v[:upto], ref_v[:upto])
    else:
        pos_err = criteria.position_error(foot_p, ref_p)
        vel_err = criteria.velocity_error(foot_v, ref_v)
        reason = criteria.judge(pos_err, vel_err, geo.swing_length)
    return SwingSimulationTrace(
        duration=trajectory.duration,
        times=trajectory.times,
        foot_positions=foot_p,
        foot_velocities=foot_v,
        reference_positions=ref_p,
        reference_velocities=ref_v,
        torques=tau,
        joint_positions=qs,
        joint_velocities=vs,
        passed=reason is None,
        failure_reason=reason,
        position_error=pos_err,
        velocity_error=vel_err,
        max_kkt_residual=worst_kkt,
        solver_steps=k_last if reason == SOLVER else n - 1,
    )


# ---------------------------------------------------------------------------
# scan


@dataclass(frozen=True)
class FastOptions:
    t_min: float = 0.05
    t_max: float = 1.0
    t_step: float = 0.01
    simulation: SimulationOptions = SimulationOptions()
    workers: Optional[int] = None  # None: FASTBENCH_THREADS or 1

    def durations(self) -> list:
        return duration_grid(self.t_min, self.t_max, self.t_step)


def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    raw = os.environ.get("FASTBENCH_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"FASTBENCH_THREADS must be an integer, got {raw!r}") from None


def _evaluate(model, geometry, duration, criteria, sim, start):
    traj = build_spline(geometry, duration, sim.dt, sim.profile)
    return simulate_swing(model, traj, criteria, options=sim, initial_state=start)


def _evaluate_args(args):
    return _evaluate(*args)


def compute_fast(model: ReducedRobotModel, geometry: SwingGeometry = None,
                 criteria: EvaluationCriteria = EvaluationCriteria(),
                 options: FastOptions = FastOptions()) -> FastResult:
    """Scan durations in ascending order and stop at the first that passes.

    With several workers candidates are evaluated in ascending chunks; traces
    beyond the first pass are dropped so the result matches a serial scan.
    """
    if geometry is None:
        geometry = compute_geometry(model)
    durations = options.durations()
    if not durations:
        raise ValueError("empty duration family")
    sim = options.simulation
    start = solve_initial_pose(model, geometry.to_world(geometry.start), geometry)
    workers = worker_count(options.workers)
    traces = []
    if workers == 1:
        for T in durations:
            tr = _evaluate(model, geometry, T, criteria, sim, start)
            traces.append(tr)
            if tr.passed:
                break
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i in range(0, len(durations), workers):
                chunk = durations[i:i + workers]
                done = list(pool.map(_evaluate_args, [(model, geometry, T, criteria, sim, start) for T in chunk]))
                for tr in done:
                    traces.append(tr)
                    if tr.passed:
                        break
                if traces[-1].passed:
                    break
    fastest = traces[-1].duration if traces[-1].passed else None
    L = geometry.swing_length
    return FastResult(
        model_name=model.name,
        swing_length=L,
        fastest_time=fastest,
        theoretical_velocity=None if fastest is None else theoretical_velocity(L, fastest),
        traces=tuple(traces),
        geometry=geometry,
    )


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    kind: str
    result: Optional[FastResult]
    error: Optional[str] = None
    rank: Optional[int] = None  # 1 is fastest; None when not achievable

    @property
    def fastest_time(self):
        return None if self.result is None else self.result.fastest_time


def compare_models(entries, criteria: EvaluationCriteria = EvaluationCriteria(),
                   options: FastOptions = FastOptions()) -> list:
    """Evaluate ``(label, model, kind)`` entries, each on its own geometry.

    Entries whose model is an exception become error rows. Rows keep the
    input order; ``rank`` orders achievable rows by fastest time, input order
    breaking ties.
    """
    entries = list(entries)
    if len(entries) < 2:
        raise ValueError("comparison needs at least two models")
    rows = []
    for label, model, kind in entries:
        if isinstance(model, Exception):
            rows.append(ComparisonRow(label, kind, None, str(model)))
            continue
        try:
            rows.append(ComparisonRow(label, kind, compute_fast(model, None, criteria, options)))
        except (ValueError, np.linalg.LinAlgError) as exc:
            rows.append(ComparisonRow(label, kind, None, str(exc)))
    ranked = sorted((i for i, r in enumerate(rows) if r.fastest_time is not None),
                    key=lambda i: (rows[i].fastest_time, i))
    for rank, i in enumerate(ranked, 1):
        rows[i] = replace(rows[i], rank=rank)
    return rows
