"""Scale-normalized swing geometry and cubic swing-foot trajectories.

The swing starts with the leg tilted 30 degrees backward and ends tilted 30
degrees forward, with the extended leg length shrunk by 0.98. The apex
height equals the drop of the foot caused by the tilt.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import ReducedRobotModel

TILT = math.radians(30.0)
SHRINK = 0.98
PROFILES = ("cubic", "quintic")


@dataclass(frozen=True)
class SwingGeometry:
    """Swing endpoints in the hip frame plus the hip frame's world placement."""

    leg_length: float
    effective_length: float
    start: np.ndarray
    end: np.ndarray
    swing_length: float
    apex_height: float
    anchor_position: np.ndarray = None
    anchor_rotation: np.ndarray = None
    extension_q: Optional[np.ndarray] = None

    def to_world(self, p):
        R = np.eye(3) if self.anchor_rotation is None else self.anchor_rotation
        o = np.zeros(3) if self.anchor_position is None else self.anchor_position
        return o + np.asarray(p) @ R.T

    def vector_to_world(self, v):
        R = np.eye(3) if self.anchor_rotation is None else self.anchor_rotation
        return np.asarray(v) @ R.T


def geometry_from_leg_length(leg_length: float, anchor_position=None, anchor_rotation=None,
                             extension_q=None) -> SwingGeometry:
    if not leg_length > 0 or not math.isfinite(leg_length):
        raise ValueError(f"leg length must be positive, got {leg_length}")
    eff = SHRINK * leg_length
    s, c = math.sin(TILT), math.cos(TILT)
    # rotating (0, 0, -eff) about the hip pitch (y) axis by +/-30 degrees
    start = np.array([-eff * s, 0.0, -eff * c])
    end = np.array([eff * s, 0.0, -eff * c])
    return SwingGeometry(
        leg_length=leg_length,
        effective_length=eff,
        start=start,
        end=end,
        swing_length=2.0 * eff * s,
        apex_height=eff * (1.0 - c),
        anchor_position=None if anchor_position is None else np.asarray(anchor_position, dtype=float),
        anchor_rotation=None if anchor_rotation is None else np.asarray(anchor_rotation, dtype=float),
        extension_q=extension_q,
    )


def _hip_foot_distance(model, q, hip_body, foot_body, kb):
    from .model import reduce_coordinates

    R, p = kb.placements(model.tree, reduce_coordinates(model, q))
    ph = np.zeros(3) if hip_body < 0 else p[hip_body]
    pf = np.zeros(3) if foot_body < 0 else p[foot_body]
    return float(np.linalg.norm(pf - ph)), R, p


def find_full_extension(model: ReducedRobotModel, hip_frame: str, foot_frame: str,
                        max_grid: int = 4096) -> tuple:
    """Configuration maximizing the hip-to-foot distance within joint limits.

    Coarse grid over {lower, upper, 0, mid} per joint, then bounded L-BFGS-B
    from the best grid point. Ties go to the configuration of smallest norm,
    so joints that do not change the length stay at zero. Returns
    ``(q, distance)``.
    """
    from scipy.optimize import minimize

    from . import kernels

    kb = kernels.backend
    hip_body, foot_body = model.frame_index(hip_frame), model.frame_index(foot_frame)
    lo, hi = model.position_bounds
    choices = []
    for a, b in zip(lo, hi):
        vals = {a, b, 0.5 * (a + b)}
        if a <= 0.0 <= b:
            vals.add(0.0)
        choices.append(sorted(vals))
    n_grid = math.prod(len(c) for c in choices)
    if n_grid <= max_grid:
        grid = itertools.product(*choices)
    else:
        rng = np.random.default_rng(0)
        grid = (tuple(rng.choice(c) for c in choices) for _ in range(max_grid))
    best_q, best_d = None, -1.0
    for cand in grid:
        q = np.array(cand, dtype=float)
        d, _, _ = _hip_foot_distance(model, q, hip_body, foot_body, kb)
        if d > best_d + 1e-12 or (d > best_d - 1e-12 and q @ q < best_q @ best_q):
            best_q, best_d = q, max(d, best_d)

    G = model.reduction_map

    def objective(q):
        from .model import reduce_coordinates

        qf = reduce_coordinates(model, q)
        R, p = kb.placements(model.tree, qf)
        ph = np.zeros(3) if hip_body < 0 else p[hip_body]
        pf = np.zeros(3) if foot_body < 0 else p[foot_body]
        r = pf - ph
        dist = float(np.linalg.norm(r))
        Jf = kb.jacobian(model.tree, qf, foot_body)[:3] @ G
        Jh = kb.jacobian(model.tree, qf, hip_body)[:3] @ G
        grad = (r @ (Jf - Jh)) / dist if dist > 0 else np.zeros_like(q)
        return -dist, -grad

    res = minimize(objective, best_q, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)))
    if -res.fun > best_d:
        best_q, best_d = np.clip(res.x, lo, hi), float(-res.fun)
    return best_q, best_d


def compute_geometry(model: ReducedRobotModel, hip_frame: str = None, foot_frame: str = None,
                     leg_length: float = None, configuration=None) -> SwingGeometry:
    """Swing geometry scaled to the model's own leg.

    ``leg_length`` overrides the measured length; ``configuration`` replaces
    the full-extension search.
    """
    from . import kernels

    hip_frame = hip_frame or model.hip_frame
    foot_frame = foot_frame or model.foot_frame
    hip_body, foot_body = model.frame_index(hip_frame), model.frame_index(foot_frame)
    if hip_body == foot_body:
        raise ValueError("hip and foot frames coincide")
    if configuration is not None:
        q_ext = np.asarray(configuration, dtype=float)
        dist, _, _ = _hip_foot_distance(model, q_ext, hip_body, foot_body, kernels.backend)
    else:
        q_ext, dist = find_full_extension(model, hip_frame, foot_frame)
    if dist <= 1e-9:
        raise ValueError("zero leg length: hip and foot frames coincide at full extension")
    _, R, p = _hip_foot_distance(model, q_ext, hip_body, foot_body, kernels.backend)
    anchor_p = np.zeros(3) if hip_body < 0 else p[hip_body].copy()
    anchor_R = np.eye(3) if hip_body < 0 else R[hip_body].copy()
    length = dist if leg_length is None else float(leg_length)
    return geometry_from_leg_length(length, anchor_p, anchor_R, q_ext)


# ---------------------------------------------------------------------------
# splines


def _blend(s, profile):
    """Normalized rise from 0 to 1 on s in [0, 1] with zero end velocities,
    returned with its first and second derivatives in s."""
    if profile == "cubic":
        return 3 * s**2 - 2 * s**3, 6 * s - 6 * s**2, 6 - 12 * s
    if profile == "quintic":
        return (10 * s**3 - 15 * s**4 + 6 * s**5,
                30 * s**2 - 60 * s**3 + 30 * s**4,
                60 * s - 180 * s**2 + 120 * s**3)
    raise ValueError(f"unknown spline profile {profile!r}")


def swing_reference(geometry: SwingGeometry, duration: float, t, profile: str = "cubic"):
    """Foot position, velocity and acceleration (hip frame) at times ``t``.

    Horizontal motion is one blend over the whole swing; the vertical motion
    is two blends meeting at the apex at ``duration / 2``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    T = float(duration)
    start, end, h = geometry.start, geometry.end, geometry.apex_height
    s = np.clip(t / T, 0.0, 1.0)
    b, db, ddb = _blend(s, profile)
    delta = end - start
    pos = start + b[:, None] * delta
    vel = (db / T)[:, None] * delta
    acc = (ddb / T**2)[:, None] * delta

    first = t <= 0.5 * T
    s2 = np.where(first, 2.0 * s, 2.0 * s - 1.0)
    bz, dbz, ddbz = _blend(s2, profile)
    z_from = np.where(first, start[2], start[2] + h)
    z_to = np.where(first, start[2] + h, end[2])
    rise = z_to - z_from
    pos[:, 2] = z_from + bz * rise
    vel[:, 2] = dbz * rise * (2.0 / T)
    acc[:, 2] = ddbz * rise * (2.0 / T) ** 2
    return pos, vel, acc


@dataclass(frozen=True)
class SwingTrajectory:
    duration: float
    dt: float  # actual sample spacing, duration / steps
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    geometry: SwingGeometry
    profile: str = "cubic"

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    def at(self, t):
        p, v, a = swing_reference(self.geometry, self.duration, t, self.profile)
        return p[0], v[0], a[0]


def build_spline(geometry: SwingGeometry, duration: float, dt: float, profile: str = "cubic") -> SwingTrajectory:
    """Sample the swing every ``dt`` (rounded so the last sample is at ``duration``)."""
    if profile not in PROFILES:
        raise ValueError(f"unknown spline profile {profile!r}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if duration < 2 * dt - 1e-12:
        raise ValueError(f"duration {duration} is shorter than two control periods")
    steps = max(2, int(round(duration / dt)))
    times = np.linspace(0.0, duration, steps + 1)
    pos, vel, acc = swing_reference(geometry, duration, times, profile)
    # pin the endpoints exactly
    pos[0], pos[-1] = geometry.start, geometry.end
    return SwingTrajectory(duration, duration / steps, times, pos, vel, acc, geometry, profile)


def duration_grid(t_min: float, t_max: float, step: float) -> list:
    if not step > 0:
        raise ValueError("step must be positive")
    if t_max < t_min:
        raise ValueError("empty duration range")
    count = int(math.floor((t_max - t_min) / step + 1e-9)) + 1
    return [round(t_min + k * step, 9) for k in range(count)]


def duration_family(geometry: SwingGeometry, t_min: float = 0.05, t_max: float = 1.0, step: float = 0.01,
                    dt: float = 0.001, profile: str = "cubic") -> list:
    """Trajectories of equal geometry for ``t_min, t_min + step, ... <= t_max``."""
    if t_min < 2 * dt - 1e-12:
        raise ValueError("t_min must cover at least two control periods")
    return [build_spline(geometry, T, dt, profile) for T in duration_grid(t_min, t_max, step)]
