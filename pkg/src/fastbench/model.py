"""Robot description parsing and mimic-joint reduction.

The supported description format is a strict subset of URDF: ``robot``,
``link`` (``inertial``) and ``joint`` (revolute, prismatic, fixed) with
``origin``, ``axis``, ``limit``, ``mimic`` and ``dynamics``. ``visual`` and
``collision`` are skipped with a log notice; any other element is an error.

Mimic joints are removed from the coordinate vector: full joint coordinates
are ``q_full = G @ q_ind + c`` with a constant reduction map ``G``.
"""
from __future__ import annotations

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

JOINT_KINDS = ("revolute", "prismatic", "fixed")
_IGNORED_LINK_CHILDREN = ("visual", "collision")


class ModelError(ValueError):
    """Raised when a robot description cannot be turned into a model."""


@dataclass(frozen=True)
class ActuatorLimits:
    effort_max: float
    velocity_max: float
    position_lower: float
    position_upper: float


@dataclass(frozen=True)
class MimicSpec:
    joint: str
    multiplier: float = 1.0
    offset: float = 0.0


@dataclass(frozen=True)
class JointSpec:
    name: str
    kind: str
    parent_link: str
    child_link: str
    origin_xyz: tuple = (0.0, 0.0, 0.0)
    origin_rpy: tuple = (0.0, 0.0, 0.0)
    axis: tuple = (1.0, 0.0, 0.0)
    limits: Optional[ActuatorLimits] = None
    mimic: Optional[MimicSpec] = None
    damping: float = 0.0

    @property
    def moves(self) -> bool:
        return self.kind != "fixed"


@dataclass(frozen=True)
class BodySpec:
    """Rigid link: mass, centre of mass and inertia about the COM, all in the link frame."""

    name: str
    mass: float = 0.0
    com: tuple = (0.0, 0.0, 0.0)
    inertia: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def rpy_to_matrix(rpy: Sequence[float]) -> np.ndarray:
    """URDF fixed-axis roll/pitch/yaw, ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


@dataclass(frozen=True)
class KinematicTree:
    """Flat array view of a model consumed by the compiled and Python kernels.

    Body ``i`` is the child link of joint ``i``; bodies are in topological
    order so ``parent[i] < i`` (``-1`` is the welded root).
    """

    parent: np.ndarray  # int32 (nb,)
    jtype: np.ndarray  # int32 (nb,) 0 fixed, 1 revolute, 2 prismatic
    qidx: np.ndarray  # int32 (nb,) full coordinate index or -1
    xrot: np.ndarray  # (nb, 3, 3) parent link frame -> joint frame
    xpos: np.ndarray  # (nb, 3)
    axis: np.ndarray  # (nb, 3) in the joint frame
    mass: np.ndarray  # (nb,)
    com: np.ndarray  # (nb, 3) in the link frame
    inertia: np.ndarray  # (nb, 3, 3) about the COM, link frame
    nq: int

    @property
    def nb(self) -> int:
        return len(self.parent)


@dataclass(frozen=True)
class ReducedRobotModel:
    """Fixed-base kinematic tree with mimic joints folded into a reduction map.

    ``joints`` is in topological order. Full coordinates are the moving joints
    in that order; independent coordinates are the moving, non-mimic ones.
    """

    name: str
    root: str
    bodies: tuple
    joints: tuple
    hip_frame: str
    foot_frame: str

    full_joints: tuple = field(init=False, compare=False)
    independent_joints: tuple = field(init=False, compare=False)
    reduction_map: np.ndarray = field(init=False, compare=False, repr=False)
    offset: np.ndarray = field(init=False, compare=False, repr=False)
    tree: KinematicTree = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        moving = [j for j in self.joints if j.moves]
        independent = [j for j in moving if j.mimic is None]
        ind_index = {j.name: k for k, j in enumerate(independent)}
        G = np.zeros((len(moving), len(independent)))
        c = np.zeros(len(moving))
        for row, j in enumerate(moving):
            if j.mimic is None:
                G[row, ind_index[j.name]] = 1.0
            elif j.mimic.joint in ind_index:
                G[row, ind_index[j.mimic.joint]] = j.mimic.multiplier
                c[row] = j.mimic.offset
            # an unresolved mimic leaves a zero row; validate_model reports it
        G.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "full_joints", tuple(j.name for j in moving))
        object.__setattr__(self, "independent_joints", tuple(j.name for j in independent))
        object.__setattr__(self, "reduction_map", G)
        object.__setattr__(self, "offset", c)
        object.__setattr__(self, "tree", _build_tree(self))

    @property
    def independent_dof(self) -> int:
        return len(self.independent_joints)

    @property
    def link_names(self) -> tuple:
        return tuple(b.name for b in self.bodies)

    def body(self, name: str) -> BodySpec:
        for b in self.bodies:
            if b.name == name:
                return b
        raise KeyError(name)

    def joint(self, name: str) -> JointSpec:
        for j in self.joints:
            if j.name == name:
                return j
        raise KeyError(name)

    def frame_index(self, frame: str) -> int:
        """Kernel body index of a link frame; ``-1`` for the root."""
        if frame == self.root:
            return -1
        for i, j in enumerate(self.joints):
            if j.child_link == frame:
                return i
        raise KeyError(f"unknown frame {frame!r}")

    @property
    def independent_limits(self) -> list:
        return [self.joint(n).limits for n in self.independent_joints]

    @property
    def effort_max(self) -> np.ndarray:
        return np.array([lim.effort_max for lim in self.independent_limits])

    @property
    def velocity_max(self) -> np.ndarray:
        return np.array([lim.velocity_max for lim in self.independent_limits])

    @property
    def position_bounds(self) -> tuple:
        lims = self.independent_limits
        return (
            np.array([lim.position_lower for lim in lims]),
            np.array([lim.position_upper for lim in lims]),
        )

    @property
    def damping(self) -> np.ndarray:
        """Viscous damping per full coordinate."""
        return np.array([self.joint(n).damping for n in self.full_joints])

    @property
    def total_mass(self) -> float:
        return math.fsum(b.mass for b in self.bodies)

    def with_scaled_limits(self, effort_scale: float = 1.0, velocity_scale: float = 1.0) -> "ReducedRobotModel":
        """Copy with every actuated joint's effort/velocity limit scaled."""
        joints = []
        for j in self.joints:
            if j.limits is not None and j.moves and j.mimic is None:
                lim = ActuatorLimits(
                    j.limits.effort_max * effort_scale,
                    j.limits.velocity_max * velocity_scale,
                    j.limits.position_lower,
                    j.limits.position_upper,
                )
                j = _replace(j, limits=lim)
            joints.append(j)
        return _replace(self, joints=tuple(joints))

    def with_frames(self, hip_frame: Optional[str] = None, foot_frame: Optional[str] = None) -> "ReducedRobotModel":
        model = _replace(
            self,
            hip_frame=hip_frame or self.hip_frame,
            foot_frame=foot_frame or self.foot_frame,
        )
        for f in (model.hip_frame, model.foot_frame):
            if f not in model.link_names:
                raise ModelError(f"unknown frame {f!r}")
        return model


def _replace(obj, **changes):
    import dataclasses

    return dataclasses.replace(obj, **changes)


def _build_tree(model: ReducedRobotModel) -> KinematicTree:
    child_index = {j.child_link: i for i, j in enumerate(model.joints)}
    bodies = {b.name: b for b in model.bodies}
    nb = len(model.joints)
    parent = np.full(nb, -1, dtype=np.int32)
    jtype = np.zeros(nb, dtype=np.int32)
    qidx = np.full(nb, -1, dtype=np.int32)
    xrot = np.zeros((nb, 3, 3))
    xpos = np.zeros((nb, 3))
    axis = np.zeros((nb, 3))
    mass = np.zeros(nb)
    com = np.zeros((nb, 3))
    inertia = np.zeros((nb, 3, 3))
    nq = 0
    for i, j in enumerate(model.joints):
        parent[i] = child_index.get(j.parent_link, -1)
        jtype[i] = JOINT_KINDS.index(j.kind) + 1 if j.kind != "fixed" else 0
        if j.moves:
            qidx[i] = nq
            nq += 1
        xrot[i] = rpy_to_matrix(j.origin_rpy)
        xpos[i] = j.origin_xyz
        axis[i] = j.axis
        b = bodies.get(j.child_link)
        if b is not None:
            mass[i] = b.mass
            com[i] = b.com
            inertia[i] = b.inertia
    return KinematicTree(parent, jtype, qidx, xrot, xpos, axis, mass, com, inertia, nq)


# ---------------------------------------------------------------------------
# parsing


def _floats(text: Optional[str], n: int, what: str) -> tuple:
    if text is None:
        return (0.0,) * n
    parts = text.split()
    if len(parts) != n:
        raise ModelError(f"{what}: expected {n} numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ModelError(f"{what}: not numeric: {text!r}") from None


def _attr_float(el: ET.Element, name: str, what: str, default: Optional[float] = None) -> float:
    raw = el.get(name)
    if raw is None:
        if default is None:
            raise ModelError(f"{what}: missing attribute {name!r}")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ModelError(f"{what}: attribute {name}={raw!r} is not numeric") from None


def _origin(el: ET.Element, what: str) -> tuple:
    o = el.find("origin")
    if o is None:
        return (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)
    return _floats(o.get("xyz"), 3, f"{what} origin xyz"), _floats(o.get("rpy"), 3, f"{what} origin rpy")


def _check_children(el: ET.Element, allowed: Sequence[str], what: str, ignored: Sequence[str] = ()):
    for child in el:
        if child.tag in ignored:
            log.info("%s: ignoring <%s> element", what, child.tag)
        elif child.tag not in allowed:
            raise ModelError(f"{what}: unsupported element <{child.tag}>")


def _parse_link(el: ET.Element) -> BodySpec:
    name = el.get("name")
    if not name:
        raise ModelError("link without a name")
    what = f"link {name!r}"
    _check_children(el, ("inertial",), what, _IGNORED_LINK_CHILDREN)
    inertial = el.find("inertial")
    if inertial is None:
        return BodySpec(name)
    _check_children(inertial, ("origin", "mass", "inertia"), what + " inertial")
    xyz, rpy = _origin(inertial, what + " inertial")
    m_el = inertial.find("mass")
    mass = _attr_float(m_el, "value", what + " mass") if m_el is not None else 0.0
    if mass < 0:
        raise ModelError(f"{what}: negative mass {mass}")
    i_el = inertial.find("inertia")
    I = np.zeros((3, 3))
    if i_el is not None:
        g = lambda k: _attr_float(i_el, k, what + " inertia", 0.0)  # noqa: E731
        I = np.array(
            [
                [g("ixx"), g("ixy"), g("ixz")],
                [g("ixy"), g("iyy"), g("iyz")],
                [g("ixz"), g("iyz"), g("izz")],
            ]
        )
    if any(rpy):
        R = rpy_to_matrix(rpy)
        I = R @ I @ R.T
        I = 0.5 * (I + I.T)  # exact symmetry, so serialization loses nothing
    return BodySpec(name, mass, tuple(xyz), tuple(tuple(float(x) for x in row) for row in I))


def _parse_joint(el: ET.Element) -> JointSpec:
    name = el.get("name")
    if not name:
        raise ModelError("joint without a name")
    what = f"joint {name!r}"
    kind = el.get("type")
    if kind not in JOINT_KINDS:
        raise ModelError(f"{what}: unsupported joint type {kind!r}")
    _check_children(el, ("parent", "child", "origin", "axis", "limit", "mimic", "dynamics"), what)
    p, c = el.find("parent"), el.find("child")
    if p is None or c is None or not p.get("link") or not c.get("link"):
        raise ModelError(f"{what}: parent and child links are required")
    xyz, rpy = _origin(el, what)
    axis = (1.0, 0.0, 0.0)
    a_el = el.find("axis")
    if a_el is not None:
        axis = _floats(a_el.get("xyz"), 3, what + " axis")
    mimic = None
    m_el = el.find("mimic")
    if m_el is not None:
        if not m_el.get("joint"):
            raise ModelError(f"{what}: mimic without a source joint")
        mimic = MimicSpec(
            m_el.get("joint"),
            _attr_float(m_el, "multiplier", what + " mimic", 1.0),
            _attr_float(m_el, "offset", what + " mimic", 0.0),
        )
    limits = None
    l_el = el.find("limit")
    if l_el is not None:
        limits = ActuatorLimits(
            _attr_float(l_el, "effort", what + " limit", 0.0),
            _attr_float(l_el, "velocity", what + " limit", 0.0),
            _attr_float(l_el, "lower", what + " limit", 0.0),
            _attr_float(l_el, "upper", what + " limit", 0.0),
        )
    elif kind != "fixed" and mimic is None:
        raise ModelError(f"{what}: actuated joint has no <limit>")
    damping = 0.0
    d_el = el.find("dynamics")
    if d_el is not None:
        damping = _attr_float(d_el, "damping", what + " dynamics", 0.0)
    return JointSpec(name, kind, p.get("link"), c.get("link"), xyz, rpy, axis, limits, mimic, damping)


def _topological(root: str, joints: list) -> list:
    by_parent: dict = {}
    for j in joints:
        by_parent.setdefault(j.parent_link, []).append(j)
    ordered, frontier = [], [root]
    while frontier:
        link = frontier.pop(0)
        for j in by_parent.get(link, []):
            ordered.append(j)
            frontier.append(j.child_link)
    return ordered


def parse_model(document: str, hip_frame: Optional[str] = None, foot_frame: Optional[str] = None,
                validate: bool = True) -> ReducedRobotModel:
    """Build a :class:`ReducedRobotModel` from robot-description XML text.

    ``hip_frame`` defaults to the root link and ``foot_frame`` to the single
    leaf link. Structural problems raise :class:`ModelError`; with
    ``validate`` the invariant diagnostics of :func:`validate_model` are
    raised too.
    """
    try:
        root_el = ET.fromstring(document)
    except ET.ParseError as exc:
        raise ModelError(f"malformed XML: {exc}") from None
    if root_el.tag != "robot":
        raise ModelError(f"unsupported element <{root_el.tag}> (expected <robot>)")
    _check_children(root_el, ("link", "joint"), "robot")

    bodies = [_parse_link(el) for el in root_el.findall("link")]
    joints = [_parse_joint(el) for el in root_el.findall("joint")]
    names = [b.name for b in bodies]
    if len(set(names)) != len(names):
        raise ModelError("duplicate link names")
    if len({j.name for j in joints}) != len(joints):
        raise ModelError("duplicate joint names")
    if not bodies:
        raise ModelError("robot has no links")

    link_set = set(names)
    children = set()
    for j in joints:
        for link in (j.parent_link, j.child_link):
            if link not in link_set:
                raise ModelError(f"joint {j.name!r} references unknown link {link!r}")
        if j.child_link in children:
            raise ModelError(f"link {j.child_link!r} has more than one parent joint")
        children.add(j.child_link)
    roots = [n for n in names if n not in children]
    if len(roots) != 1:
        raise ModelError(f"kinematic tree is disconnected or cyclic (root candidates: {roots})")
    root = roots[0]
    ordered = _topological(root, joints)
    if len(ordered) != len(joints):
        raise ModelError("kinematic tree is disconnected or cyclic")

    by_name = {j.name: j for j in joints}
    for j in joints:
        if j.mimic is None:
            continue
        src = by_name.get(j.mimic.joint)
        if src is None or not src.moves:
            raise ModelError(f"joint {j.name!r} mimics unknown or fixed joint {j.mimic.joint!r}")
        if src.mimic is not None:
            raise ModelError(f"joint {j.name!r}: mimic chain through {src.name!r}")
        if not j.moves:
            raise ModelError(f"fixed joint {j.name!r} cannot mimic")

    leaves = [n for n in names if n not in {j.parent_link for j in joints}]
    if foot_frame is None:
        if len(leaves) != 1:
            raise ModelError(f"foot frame must be given explicitly (leaf links: {leaves})")
        foot_frame = leaves[0]
    hip_frame = hip_frame or root
    for f in (hip_frame, foot_frame):
        if f not in link_set:
            raise ModelError(f"unknown frame {f!r}")

    link_order = [root] + [j.child_link for j in ordered]
    body_map = {b.name: b for b in bodies}
    model = ReducedRobotModel(
        name=root_el.get("name", ""),
        root=root,
        bodies=tuple(body_map[n] for n in link_order),
        joints=tuple(ordered),
        hip_frame=hip_frame,
        foot_frame=foot_frame,
    )
    if validate:
        problems = validate_model(model)
        if problems:
            raise ModelError("; ".join(problems))
    return model


def load_model(path, **kwargs) -> ReducedRobotModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), **kwargs)


# ---------------------------------------------------------------------------
# validation


def validate_model(model: ReducedRobotModel) -> list:
    """Return one human-readable diagnostic per violated model invariant."""
    out = []
    tol = 1e-9
    names = {j.name: j for j in model.joints}
    for j in model.joints:
        if j.kind not in JOINT_KINDS:
            out.append(f"joint {j.name!r}: unsupported kind {j.kind!r}")
            continue
        if j.moves and abs(np.linalg.norm(j.axis) - 1.0) > tol:
            out.append(f"joint {j.name!r}: axis norm {np.linalg.norm(j.axis):.12g} is not 1")
        if j.mimic is not None:
            src = names.get(j.mimic.joint)
            if src is None or not src.moves or src.mimic is not None:
                out.append(f"joint {j.name!r}: mimic source {j.mimic.joint!r} is not an independent moving joint")
        if j.moves and j.mimic is None:
            lim = j.limits
            if lim is None:
                out.append(f"joint {j.name!r}: actuated joint without limits")
                continue
            if not lim.effort_max > 0:
                out.append(f"joint {j.name!r}: effort_max must be > 0 (got {lim.effort_max})")
            if not lim.velocity_max > 0:
                out.append(f"joint {j.name!r}: velocity_max must be > 0 (got {lim.velocity_max})")
        if j.limits is not None and j.limits.position_lower > j.limits.position_upper:
            out.append(f"joint {j.name!r}: position_lower > position_upper")

    for b in model.bodies:
        if b.mass < 0:
            out.append(f"body {b.name!r}: negative mass {b.mass}")
        I = np.asarray(b.inertia, dtype=float)
        if np.max(np.abs(I - I.T)) > tol:
            out.append(f"body {b.name!r}: inertia tensor is not symmetric")
            continue
        ev = np.linalg.eigvalsh(I)
        if ev[0] < -tol:
            out.append(f"body {b.name!r}: inertia tensor is not positive semi-definite")
            continue
        a, b_, c = ev
        if a + b_ < c - tol or a + c < b_ - tol or b_ + c < a - tol:
            out.append(f"body {b.name!r}: principal moments violate the triangle inequality")

    G = model.reduction_map
    if G.size:
        if np.any(np.count_nonzero(G, axis=1) > 1):
            out.append("reduction map: a row has more than one nonzero entry")
        if np.linalg.matrix_rank(G) < G.shape[1]:
            out.append("reduction map: not full column rank")
    link_names = set(model.link_names)
    reached = {model.root} | {j.child_link for j in model.joints}
    if reached != link_names or len(model.joints) != len(model.bodies) - 1:
        out.append("kinematic tree: not a connected tree rooted at the base")
    return out


# ---------------------------------------------------------------------------
# coordinates


def reduce_coordinates(model: ReducedRobotModel, q_ind, v_ind=None, a_ind=None):
    """Map independent positions (and optionally rates) to full coordinates."""
    n = model.independent_dof
    out = []
    for k, vec in enumerate((q_ind, v_ind, a_ind)):
        if vec is None:
            out.append(None)
            continue
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (n,):
            raise ValueError(f"expected a vector of length {n}, got shape {vec.shape}")
        full = model.reduction_map @ vec
        if k == 0:
            full = full + model.offset
        out.append(full)
    if v_ind is None and a_ind is None:
        return out[0]
    return tuple(out)


# ---------------------------------------------------------------------------
# serialization


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def serialize_model(model: ReducedRobotModel) -> str:
    """Write the model back out in the supported description subset."""
    root = ET.Element("robot", name=model.name)
    for b in model.bodies:
        link = ET.SubElement(root, "link", name=b.name)
        inertial = ET.SubElement(link, "inertial")
        ET.SubElement(inertial, "origin", xyz=_fmt(b.com), rpy="0.0 0.0 0.0")
        ET.SubElement(inertial, "mass", value=repr(float(b.mass)))
        I = b.inertia
        ET.SubElement(
            inertial,
            "inertia",
            ixx=repr(float(I[0][0])), ixy=repr(float(I[0][1])), ixz=repr(float(I[0][2])),
            iyy=repr(float(I[1][1])), iyz=repr(float(I[1][2])), izz=repr(float(I[2][2])),
        )
    for j in model.joints:
        el = ET.SubElement(root, "joint", name=j.name, type=j.kind)
        ET.SubElement(el, "parent", link=j.parent_link)
        ET.SubElement(el, "child", link=j.child_link)
        ET.SubElement(el, "origin", xyz=_fmt(j.origin_xyz), rpy=_fmt(j.origin_rpy))
        ET.SubElement(el, "axis", xyz=_fmt(j.axis))
        if j.limits is not None:
            lim = j.limits
            ET.SubElement(
                el, "limit",
                effort=repr(float(lim.effort_max)), velocity=repr(float(lim.velocity_max)),
                lower=repr(float(lim.position_lower)), upper=repr(float(lim.position_upper)),
            )
        if j.mimic is not None:
            ET.SubElement(el, "mimic", joint=j.mimic.joint, multiplier=repr(float(j.mimic.multiplier)),
                          offset=repr(float(j.mimic.offset)))
        if j.damping:
            ET.SubElement(el, "dynamics", damping=repr(float(j.damping)))
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"
