"""URDF export of a DH chain and a minimal parser for round-trip checks.

Joint ``i`` rotates about the ``z`` axis of frame ``i-1``.  Its URDF origin
is the constant part of the previous row, ``Tz(d) Tx(a) Rx(alpha)`` (the
identity for the first joint), and a fixed ``tool`` joint carries the last
row.  Composing ``origin * Rz(q)`` along the chain thus reproduces the DH
product exactly.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

from .geometry import DEFAULT_LINK_WIDTH, link_frame_axes
from .kinematics import DHTable, dh_matrix, euler_zyx_to_rotation, rotation_to_euler_zyx
from .modlib import LINK_MASS_PER_M, Composition
from .planner import JointLimits

BASE_LINK = "base_link"
TOOL_LINK = "tool"


def _fmt(values) -> str:
    # repr keeps full double precision
    return " ".join(repr(float(v)) for v in values)


def _origin(parent, T):
    rz, ry, rx = rotation_to_euler_zyx(T[:3, :3])
    ET.SubElement(parent, "origin", xyz=_fmt(T[:3, 3]), rpy=_fmt((rx, ry, rz)))


def _box_inertia(mass, size):
    x, y, z = size
    return mass / 12.0 * np.array([y * y + z * z, x * x + z * z, x * x + y * y])


def _link_element(robot, name, a, d, alpha, width, mass):
    link = ET.SubElement(robot, "link", name=name)
    L = math.hypot(a, d)
    axes = link_frame_axes(a, d, np.eye(3), dh_matrix(0.0, alpha, 0.0, 0.0)[:3, :3])
    T = np.eye(4)
    T[:3, :3] = axes.T
    T[:3, 3] = (0.5 * a, 0.0, 0.5 * d)
    size = (max(L, width), width, width)
    inertial = ET.SubElement(link, "inertial")
    # inertia is diagonal in the box axes
    _origin(inertial, T)
    ET.SubElement(inertial, "mass", value=repr(float(mass)))
    ixx, iyy, izz = (repr(float(v)) for v in _box_inertia(mass, size))
    ET.SubElement(inertial, "inertia", ixx=ixx, ixy="0.0", ixz="0.0", iyy=iyy, iyz="0.0", izz=izz)
    for tag in ("visual", "collision"):
        el = ET.SubElement(link, tag)
        _origin(el, T)
        geom = ET.SubElement(el, "geometry")
        ET.SubElement(geom, "box", size=_fmt(size))


def export_urdf(
    table: DHTable,
    composition: Composition | None = None,
    limits: JointLimits | None = None,
    link_width: float = DEFAULT_LINK_WIDTH,
    name: str = "modsynth_robot",
) -> str:
    """URDF XML for ``table`` with one revolute joint per DH row.

    Joints are ``continuous`` unless ``limits`` bounds them.
    Link boxes match the collision solids of :mod:`modsynth.geometry`.  With
    a ``composition``, link masses are actuator plus link-module masses and
    joint effort/velocity limits come from the actuator data; otherwise
    masses follow the link-module density alone and effort/velocity are 0.
    """
    n = table.n_joints
    if composition is not None and len(composition) != n:
        raise ValueError(f"composition has {len(composition)} units, table has {n} rows")
    if limits is None:
        limits = JointLimits.unlimited(n)
    if len(limits) != n:
        raise ValueError(f"limits cover {len(limits)} joints, table has {n} rows")

    robot = ET.Element("robot", name=name)
    ET.SubElement(robot, "link", name=BASE_LINK)
    rows = table.rows
    for i, row in enumerate(rows):
        L = math.hypot(row.a, row.d)
        mass = LINK_MASS_PER_M * L
        effort = velocity = 0.0
        if composition is not None:
            act = composition.units[i].actuator
            mass += act.mass
            effort, velocity = act.nominal_torque, act.no_load_speed_rpm * 2.0 * math.pi / 60.0
        mass = max(mass, 1e-6)
        _link_element(robot, f"link_{i + 1}", row.a, row.d, row.alpha, link_width, mass)

        kind = "continuous" if limits.continuous[i] else "revolute"
        joint = ET.SubElement(robot, "joint", name=f"joint_{i + 1}", type=kind)
        ET.SubElement(joint, "parent", link=BASE_LINK if i == 0 else f"link_{i}")
        ET.SubElement(joint, "child", link=f"link_{i + 1}")
        origin = np.eye(4) if i == 0 else dh_matrix(rows[i - 1].a, rows[i - 1].alpha, rows[i - 1].d, 0.0)
        _origin(joint, origin)
        ET.SubElement(joint, "axis", xyz="0.0 0.0 1.0")
        lim = {"effort": repr(float(effort)), "velocity": repr(float(velocity))}
        if kind == "revolute":
            lim.update(lower=repr(float(limits.lower[i])), upper=repr(float(limits.upper[i])))
        ET.SubElement(joint, "limit", **lim)

    ET.SubElement(robot, "link", name=TOOL_LINK)
    tool = ET.SubElement(robot, "joint", name="tool_joint", type="fixed")
    ET.SubElement(tool, "parent", link=f"link_{n}")
    ET.SubElement(tool, "child", link=TOOL_LINK)
    last = rows[-1]
    _origin(tool, dh_matrix(last.a, last.alpha, last.d, 0.0))

    ET.indent(robot)
    return '<?xml version="1.0"?>\n' + ET.tostring(robot, encoding="unicode") + "\n"


# -- parsing --------------------------------------------------------------------


@dataclass(frozen=True)
class UrdfJoint:
    name: str
    kind: str
    parent: str
    child: str
    origin: np.ndarray
    axis: np.ndarray
    lower: float = -math.inf
    upper: float = math.inf


def _parse_origin(el) -> np.ndarray:
    T = np.eye(4)
    if el is None:
        return T
    xyz = [float(v) for v in el.get("xyz", "0 0 0").split()]
    r, p, y = [float(v) for v in el.get("rpy", "0 0 0").split()]
    T[:3, :3] = euler_zyx_to_rotation((y, p, r))
    T[:3, 3] = xyz
    return T


@dataclass(frozen=True)
class UrdfModel:
    """Serial chain read back from URDF text, base to tool."""

    name: str
    joints: tuple
    links: dict

    @property
    def actuated(self) -> tuple:
        return tuple(j for j in self.joints if j.kind != "fixed")

    def frames(self, q) -> np.ndarray:
        """Frames after every joint (fixed joints included), shape ``(len(joints) + 1, 4, 4)``."""
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.size != len(self.actuated):
            raise ValueError(f"expected {len(self.actuated)} joint values, got {q.size}")
        out = [np.eye(4)]
        k = 0
        for j in self.joints:
            T = out[-1] @ j.origin
            if j.kind != "fixed":
                c, s = math.cos(q[k]), math.sin(q[k])
                R = _axis_rotation(j.axis, c, s)
                M = np.eye(4)
                M[:3, :3] = R
                T = T @ M
                k += 1
            out.append(T)
        return np.array(out)

    def forward_kinematics(self, q) -> np.ndarray:
        return self.frames(q)[-1]


def _axis_rotation(axis, c, s):
    x, y, z = axis / np.linalg.norm(axis)
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def parse_urdf(text: str) -> UrdfModel:
    """Read a serial URDF chain; raises ``ValueError`` for branches or gaps."""
    root = ET.fromstring(text)
    if root.tag != "robot":
        raise ValueError("root element must be <robot>")
    links = {l.get("name"): l for l in root.findall("link")}
    by_parent = {}
    for el in root.findall("joint"):
        lim = el.find("limit")
        axis = el.find("axis")
        j = UrdfJoint(
            name=el.get("name"),
            kind=el.get("type"),
            parent=el.find("parent").get("link"),
            child=el.find("child").get("link"),
            origin=_parse_origin(el.find("origin")),
            axis=np.array([float(v) for v in axis.get("xyz").split()]) if axis is not None else np.array([1.0, 0, 0]),
            lower=float(lim.get("lower", "-inf")) if lim is not None else -math.inf,
            upper=float(lim.get("upper", "inf")) if lim is not None else math.inf,
        )
        if j.parent in by_parent:
            raise ValueError(f"link {j.parent!r} has more than one child joint")
        by_parent[j.parent] = j
    children = {j.child for j in by_parent.values()}
    roots = [name for name in links if name not in children]
    if len(roots) != 1:
        raise ValueError(f"expected one root link, found {roots}")
    chain, cur = [], roots[0]
    while cur in by_parent:
        chain.append(by_parent[cur])
        cur = by_parent[cur].child
    if len(chain) != len(by_parent):
        raise ValueError("joints do not form a single chain")
    return UrdfModel(root.get("name"), tuple(chain), links)
