"""Parametric DecARt leg: model generator, serialized variant, closed-form IK.

Joint naming follows the leg's motor labels: ``j0`` hip yaw, ``j1`` hip
roll, ``j2`` leg pitch, ``j3`` leg length, ``j4`` ankle roll, ``j5`` ankle
pitch. In the decoupled leg two passive knee gears (``j3p_*``) mimic ``j3``
with multiplier 1, which keeps the foot on the leg axis::

    hip --j2--> housing (l1) --j3--> thigh (l2, pitch -j3)
        --j3p_upper--> knee coupler (l3, parallel to housing)
        --fixed--> knee block (l4)
        --j3p_lower--> shank (l2, pitch +j3) --j5--> ankle --j4--> foot

so the hip-pitch-to-ankle distance is ``l1 + 2 l2 cos(j3) + l3 + l4``.
All motors (j3, j4, j5) sit in the housing above the knee.
"""
from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (
    ActuatorLimits,
    BodySpec,
    JointSpec,
    MimicSpec,
    ReducedRobotModel,
    parse_model,
    serialize_model,
)

HIP_FRAME = "hip"
FOOT_FRAME = "foot"
JOINT_NAMES = ("j0_hip_yaw", "j1_hip_roll", "j2_leg_pitch", "j3_leg_length", "j4_ankle_roll", "j5_ankle_pitch")
SERIAL_KNEE = "j3_knee"
VARIANTS = ("decoupled", "serial")


class UnreachableTargetError(ValueError):
    pass


@dataclass(frozen=True)
class DecartLegParams:
    """Dimensions (m), masses (kg) and motor limits (N m, rad/s).

    Toolkit defaults sized for a 0.65 m leg of a ~35 kg robot; they are not
    measurements of the real hardware.
    """

    l1: float = 0.10
    l2: float = 0.20
    l3: float = 0.10
    l4: float = 0.05
    motor_mass: float = 0.6
    motor_radius: float = 0.045
    yaw_link_mass: float = 0.4
    roll_link_mass: float = 0.4
    housing_mass: float = 0.5
    thigh_mass: float = 0.3
    coupler_mass: float = 0.2
    knee_block_mass: float = 0.1
    shank_mass: float = 0.3
    ankle_mass: float = 0.1
    foot_mass: float = 0.4
    foot_length: float = 0.2
    foot_drop: float = 0.04
    effort_j0: float = 40.0
    effort_j1: float = 90.0
    effort_j2: float = 90.0
    effort_j3: float = 90.0
    effort_j4: float = 25.0
    effort_j5: float = 25.0
    velocity_j0: float = 20.0
    velocity_j1: float = 20.0
    velocity_j2: float = 20.0
    velocity_j3: float = 20.0
    velocity_j4: float = 20.0
    velocity_j5: float = 20.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ValueError(f"{f.name} must be a finite number")
            if f.name.startswith(("l", "effort", "velocity", "motor_radius", "foot_length")) and value <= 0:
                raise ValueError(f"{f.name} must be positive")
            if value < 0:
                raise ValueError(f"{f.name} must be non-negative")

    @property
    def extension(self) -> float:
        """Hip-pitch-to-ankle distance with the leg fully stretched."""
        return self.l1 + 2.0 * self.l2 + self.l3 + self.l4

    @property
    def fixed_length(self) -> float:
        return self.l1 + self.l3 + self.l4

    def effort(self, k: int) -> float:
        return getattr(self, f"effort_j{k}")

    def velocity(self, k: int) -> float:
        return getattr(self, f"velocity_j{k}")


def read_params(text: str) -> DecartLegParams:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in dataclasses.fields(DecartLegParams)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown parameter {key!r}")
        try:
            values[key] = float(value)
        except ValueError:
            raise ValueError(f"line {lineno}: {key} is not a number: {value!r}") from None
    return DecartLegParams(**values)


def load_params(path) -> DecartLegParams:
    return read_params(Path(path).read_text(encoding="utf-8"))


def format_params(params: DecartLegParams) -> str:
    return "".join(f"{f.name} = {getattr(params, f.name)!r}\n" for f in dataclasses.fields(params))


# ---------------------------------------------------------------------------
# mass properties


def _rod(mass, length, radius=0.02):
    """Uniform rod hanging from the link origin along -z."""
    ixx = mass * (3 * radius**2 + length**2) / 12.0
    izz = 0.5 * mass * radius**2
    return mass, np.array([0.0, 0.0, -0.5 * length]), np.diag([ixx, ixx, izz])


def _point(mass, at, radius):
    # solid sphere standing in for a motor
    i = 0.4 * mass * radius**2
    return mass, np.asarray(at, dtype=float), np.diag([i, i, i])


def _lump(name, *parts) -> BodySpec:
    m = sum(p[0] for p in parts)
    if m == 0:
        return BodySpec(name)
    c = sum(p[0] * p[1] for p in parts) / m
    I = np.zeros((3, 3))
    for mi, ci, Ii in parts:
        r = ci - c
        I += Ii + mi * (r @ r * np.eye(3) - np.outer(r, r))
    return BodySpec(name, float(m), tuple(float(x) for x in c), tuple(tuple(float(x) for x in row) for row in I))


def _bodies(p: DecartLegParams) -> dict:
    r = p.motor_radius
    return {
        "hip": BodySpec("hip"),
        "yaw_link": _lump("yaw_link", _point(p.yaw_link_mass + p.motor_mass, (0.0, 0.0, 0.04), r)),
        "roll_link": _lump("roll_link", _point(p.roll_link_mass + p.motor_mass, (-0.04, 0.0, 0.0), r)),
        # housing carries the leg-length and both ankle motors
        "housing": _lump(
            "housing",
            _rod(p.housing_mass, p.l1),
            _point(p.motor_mass, (0.0, 0.0, -p.l1), r),
            _point(p.motor_mass, (0.0, 0.05, -0.5 * p.l1), r),
            _point(p.motor_mass, (0.0, -0.05, -0.5 * p.l1), r),
        ),
        "thigh": _lump("thigh", _rod(p.thigh_mass, p.l2)),
        "knee_coupler": _lump("knee_coupler", _rod(p.coupler_mass, p.l3)),
        "knee_block": _lump("knee_block", _rod(p.knee_block_mass, p.l4)),
        "shank": _lump("shank", _rod(p.shank_mass, p.l2)),
        "ankle": _lump("ankle", _point(p.ankle_mass, (0.0, 0.0, 0.0), 0.02)),
        "foot": _lump(
            "foot",
            (p.foot_mass, np.array([0.25 * p.foot_length, 0.0, -p.foot_drop]),
             np.diag([p.foot_mass * 0.08**2 / 12, p.foot_mass * p.foot_length**2 / 12,
                      p.foot_mass * (p.foot_length**2 + 0.08**2) / 12])),
        ),
    }


def _limits(p, k, lower, upper):
    return ActuatorLimits(p.effort(k), p.velocity(k), lower, upper)


# joint position ranges; see sample_reachable_target for the target box they admit
J0_RANGE = (-1.0, 1.0)
J1_RANGE = (-0.6, 0.6)
J2_RANGE = (-1.6, 1.6)
J3_RANGE = (-math.pi, 0.0)
J4_RANGE = (-1.2, 1.2)
J5_RANGE = (-1.6, 4.8)
SERIAL_KNEE_RANGE = (-2.6, 0.0)


def _hip_chain(p) -> list:
    Y = (0.0, 1.0, 0.0)
    return [
        JointSpec(JOINT_NAMES[0], "revolute", "hip", "yaw_link", axis=(0.0, 0.0, -1.0),
                  limits=_limits(p, 0, *J0_RANGE)),
        JointSpec(JOINT_NAMES[1], "revolute", "yaw_link", "roll_link", axis=(1.0, 0.0, 0.0),
                  limits=_limits(p, 1, *J1_RANGE)),
        JointSpec(JOINT_NAMES[2], "revolute", "roll_link", "housing", axis=Y,
                  limits=_limits(p, 2, *J2_RANGE)),
    ]


def _ankle_chain(p) -> list:
    return [
        JointSpec(JOINT_NAMES[5], "revolute", "shank", "ankle", origin_xyz=(0.0, 0.0, -p.l2), axis=(0.0, 1.0, 0.0),
                  limits=_limits(p, 5, *J5_RANGE)),
        JointSpec(JOINT_NAMES[4], "revolute", "ankle", "foot", axis=(1.0, 0.0, 0.0),
                  limits=_limits(p, 4, *J4_RANGE)),
    ]


def _assemble(name, p, joints) -> ReducedRobotModel:
    bodies = _bodies(p)
    order = ["hip"] + [j.child_link for j in joints]
    return ReducedRobotModel(name, "hip", tuple(bodies[n] for n in order), tuple(joints), HIP_FRAME, FOOT_FRAME)


def build_decoupled(params: DecartLegParams) -> ReducedRobotModel:
    p = params
    Y, NEG_Y = (0.0, 1.0, 0.0), (0.0, -1.0, 0.0)
    gear = MimicSpec(JOINT_NAMES[3], 1.0, 0.0)
    joints = _hip_chain(p) + [
        JointSpec(JOINT_NAMES[3], "revolute", "housing", "thigh", origin_xyz=(0.0, 0.0, -p.l1), axis=NEG_Y,
                  limits=_limits(p, 3, *J3_RANGE)),
        JointSpec("j3p_knee_upper", "revolute", "thigh", "knee_coupler", origin_xyz=(0.0, 0.0, -p.l2), axis=Y,
                  mimic=gear),
        JointSpec("knee_block_weld", "fixed", "knee_coupler", "knee_block", origin_xyz=(0.0, 0.0, -p.l3)),
        JointSpec("j3p_knee_lower", "revolute", "knee_block", "shank", origin_xyz=(0.0, 0.0, -p.l4), axis=Y,
                  mimic=gear),
    ] + _ankle_chain(p)
    return _assemble("decart_leg", p, joints)


def build_serial(params: DecartLegParams) -> ReducedRobotModel:
    """Coupled variant: leg-length joint welded straight, housing and thigh
    become one rigid hip structure, and the former leg-length motor drives
    the knee directly. Masses and motor frames are unchanged."""
    p = params
    joints = _hip_chain(p) + [
        JointSpec("j3_locked", "fixed", "housing", "thigh", origin_xyz=(0.0, 0.0, -p.l1)),
        JointSpec(SERIAL_KNEE, "revolute", "thigh", "knee_coupler", origin_xyz=(0.0, 0.0, -p.l2),
                  axis=(0.0, 1.0, 0.0), limits=_limits(p, 3, *SERIAL_KNEE_RANGE)),
        JointSpec("knee_block_weld", "fixed", "knee_coupler", "knee_block", origin_xyz=(0.0, 0.0, -p.l3)),
        JointSpec("knee_lower_weld", "fixed", "knee_block", "shank", origin_xyz=(0.0, 0.0, -p.l4)),
    ] + _ankle_chain(p)
    return _assemble("decart_leg_serial", p, joints)


def generate_model(params: DecartLegParams = DecartLegParams()) -> str:
    """Robot-description document of the decoupled leg."""
    return serialize_model(build_decoupled(params))


def serialize_variant(params: DecartLegParams = DecartLegParams()) -> str:
    """Robot-description document of the serialized (coupled) leg."""
    return serialize_model(build_serial(params))


def generate(params: DecartLegParams, variant: str) -> str:
    if variant == "decoupled":
        return generate_model(params)
    if variant == "serial":
        return serialize_variant(params)
    raise ValueError(f"unknown variant {variant!r}")


@functools.lru_cache(maxsize=16)
def load_variant(params: DecartLegParams = DecartLegParams(), variant: str = "decoupled") -> ReducedRobotModel:
    """Parsed model of a generated variant (round-tripped through the XML)."""
    return parse_model(generate(params, variant), hip_frame=HIP_FRAME, foot_frame=FOOT_FRAME)


def bundled_path(variant: str = "decoupled") -> Path:
    name = {"decoupled": "decart_leg.urdf", "serial": "decart_leg_serial.urdf"}[variant]
    return Path(__file__).parent / "data" / name


# ---------------------------------------------------------------------------
# closed-form kinematics


@dataclass(frozen=True)
class FootTarget:
    """Ankle target relative to the leg-pitch joint.

    ``h`` is the height from j2 down to j5. As in the closed-form solution,
    ``theta`` accumulates about the roll axis (j1 + j4) and ``phi`` about the
    pitch axis (j2 + j3 + j5); ``psi`` is the heading.
    """

    x: float
    y: float
    h: float
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.h, self.phi, self.theta, self.psi])


@dataclass(frozen=True)
class LegJointAngles:
    j0: float
    j1: float
    j2: float
    j3: float
    j4: float
    j5: float

    def as_array(self) -> np.ndarray:
        return np.array([self.j0, self.j1, self.j2, self.j3, self.j4, self.j5])

    @classmethod
    def from_array(cls, a) -> "LegJointAngles":
        return cls(*(float(x) for x in a))


def inverse_kinematics(params: DecartLegParams, target: FootTarget) -> LegJointAngles:
    if not target.h > 0:
        raise ValueError(f"target height must be positive, got {target.h}")
    psi = target.psi
    x_r = target.x * math.cos(psi) - target.y * math.sin(psi)
    y_r = target.y * math.cos(psi) + target.x * math.sin(psi)
    j0 = psi
    j1 = math.atan(y_r / target.h)
    j2 = math.atan(-x_r / target.h)
    arg = (target.h / (math.cos(j1) * math.cos(j2)) - params.l1 - params.l3 - params.l4) / (2.0 * params.l2)
    if not -1.0 - 1e-12 <= arg <= 1.0 + 1e-12:
        raise UnreachableTargetError(f"leg length out of range (acos argument {arg:.6g})")
    arg = min(1.0, max(-1.0, arg))  # absorb rounding at the stretched and folded ends
    j3 = -math.acos(arg)
    j4 = target.theta - j1
    j5 = target.phi - j2 - j3
    return LegJointAngles(j0, j1, j2, j3, j4, j5)


def angles_to_q(model: ReducedRobotModel, angles: LegJointAngles) -> np.ndarray:
    values = dict(zip(JOINT_NAMES, angles.as_array()))
    return np.array([values[n] for n in model.independent_joints])


def q_to_angles(model: ReducedRobotModel, q) -> LegJointAngles:
    values = dict(zip(model.independent_joints, np.asarray(q, dtype=float)))
    return LegJointAngles(*(values[n] for n in JOINT_NAMES))


def foot_pose(model: ReducedRobotModel, q) -> tuple:
    """World position and rotation of the foot frame (hip frame is the base)."""
    from .dynamics import JointState, forward_kinematics

    q = np.asarray(q, dtype=float)
    pl = forward_kinematics(model, JointState(q, np.zeros_like(q)), FOOT_FRAME)
    return pl.position, pl.rotation


def forward_leg_kinematics(params: DecartLegParams, angles: LegJointAngles) -> FootTarget:
    """Foot target read off the generated decoupled model."""
    model = load_variant(params, "decoupled")
    p, R = foot_pose(model, angles_to_q(model, angles))
    # R = Rz(-psi) Ry(phi) Rx(theta)
    heading = math.atan2(R[1, 0], R[0, 0])
    pitch = math.atan2(-R[2, 0], math.hypot(R[0, 0], R[1, 0]))
    roll = math.atan2(R[2, 1], R[2, 2])
    return FootTarget(float(p[0]), float(p[1]), float(-p[2]), pitch, roll, -heading)


def sample_reachable_target(params: DecartLegParams, rng, planar: bool = False,
                            max_roll: float = 0.4, max_pitch: float = 0.8, max_heading: float = 0.8,
                            max_foot_angle: float = 0.5) -> FootTarget:
    """Random target inside the documented reachable set.

    Leg roll ``|j1| <= max_roll``, leg pitch ``|j2| <= max_pitch``, heading
    ``|psi| <= max_heading``, foot angles ``|phi|, |theta| <= max_foot_angle``
    and leg extension between the fully folded and 99% of the stretched
    length. With ``planar`` the target lies in the leg's sagittal plane
    (``y_r = 0``, no roll).
    """
    j1 = 0.0 if planar else rng.uniform(-max_roll, max_roll)
    j2 = rng.uniform(-max_pitch, max_pitch)
    ext = rng.uniform(params.fixed_length + 0.05 * params.l2, params.fixed_length + 1.98 * params.l2)
    h = ext * math.cos(j1) * math.cos(j2)
    x_r, y_r = -h * math.tan(j2), h * math.tan(j1)
    psi = rng.uniform(-max_heading, max_heading)
    x = x_r * math.cos(psi) + y_r * math.sin(psi)
    y = -x_r * math.sin(psi) + y_r * math.cos(psi)
    theta = 0.0 if planar else rng.uniform(-max_foot_angle, max_foot_angle)
    phi = rng.uniform(-max_foot_angle, max_foot_angle)
    return FootTarget(x, y, h, phi, theta, psi)
