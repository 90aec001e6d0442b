"""Denavit-Hartenberg chains, forward kinematics and the pose-error objective.

Conventions
-----------
* Standard (distal) DH: ``T = Rz(theta) Tz(d) Tx(a) Rx(alpha)``.
* Orientations are Z-Y-X intrinsic Euler angles stored as
  ``(rz, ry, rx)`` so that ``R = Rz(rz) @ Ry(ry) @ Rx(rx)``.  Angles are
  wrapped to the half-open interval ``(-pi, pi]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EULER_ORDER = "ZYX"


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite kinematic parameter: {v!r}")


def wrap_angle(angle):
    """Wrap angle(s) to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)


@dataclass(frozen=True)
class DHRow:
    """One joint of a DH chain: link length ``a``, twist ``alpha``, offset ``d``."""

    a: float
    alpha: float
    d: float

    def __post_init__(self):
        _check_finite(self.a, self.alpha, self.d)


@dataclass(frozen=True, eq=False)
class DHTable:
    """Kinematic parameters of an ``n``-joint chain plus joint angles for ``N`` task locations.

    Parameters
    ----------
    a, alpha, d : array_like, shape (n,)
        Per-joint DH parameters.
    theta : array_like, shape (n, N)
        Joint angles, one column per task-space location.
    """

    a: np.ndarray
    alpha: np.ndarray
    d: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        d = np.array(self.d, dtype=float).reshape(-1)
        theta = np.array(self.theta, dtype=float)
        if theta.ndim == 1:
            theta = theta.reshape(-1, 1)
        n = a.size
        if n < 1:
            raise ValueError("a DH table needs at least one row")
        if alpha.size != n or d.size != n:
            raise ValueError("a, alpha and d must have the same length")
        if theta.ndim != 2 or theta.shape[0] != n or theta.shape[1] < 1:
            raise ValueError(f"theta must have shape ({n}, N>=1), got {theta.shape}")
        _check_finite(a, alpha, d, theta)
        for name, arr in (("a", a), ("alpha", alpha), ("d", d), ("theta", theta)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_rows(cls, rows: Sequence[DHRow], theta) -> "DHTable":
        return cls(
            a=[r.a for r in rows],
            alpha=[r.alpha for r in rows],
            d=[r.d for r in rows],
            theta=theta,
        )

    @property
    def n_joints(self) -> int:
        return self.a.size

    @property
    def n_tsl(self) -> int:
        return self.theta.shape[1]

    @property
    def size(self) -> int:
        """Number of scalar design variables, ``(3 + N) * n``."""
        return (3 + self.n_tsl) * self.n_joints

    @property
    def rows(self) -> list[DHRow]:
        return [DHRow(float(a), float(al), float(d)) for a, al, d in zip(self.a, self.alpha, self.d)]

    def with_theta(self, theta) -> "DHTable":
        return DHTable(self.a, self.alpha, self.d, theta)

    def __eq__(self, other):
        if not isinstance(other, DHTable):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("a", "alpha", "d", "theta")
        )

    def __repr__(self):
        return f"DHTable(n={self.n_joints}, N={self.n_tsl})"


@dataclass(frozen=True, eq=False)
class Pose:
    """End-frame position and Z-Y-X Euler orientation.

    ``orientation_weight`` is a per-axis {0, 1} mask; it only matters for
    desired poses, where a zero entry removes that angle from the error.
    """

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation_weight: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(-1)
        o = np.array(self.orientation, dtype=float).reshape(-1)
        w = np.array(self.orientation_weight, dtype=float).reshape(-1)
        if p.size != 3 or o.size != 3 or w.size != 3:
            raise ValueError("position, orientation and orientation_weight must be 3-vectors")
        _check_finite(p, o)
        if not np.all((w == 0.0) | (w == 1.0)):
            raise ValueError("orientation_weight entries must be 0 or 1")
        for name, arr in (("position", p), ("orientation", wrap_angle(o)), ("orientation_weight", w)):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def has_orientation(self) -> bool:
        return bool(np.any(self.orientation_weight))

    def __repr__(self):
        return f"Pose(position={self.position.tolist()}, orientation={self.orientation.tolist()})"


@dataclass(frozen=True)
class TaskSpec:
    """Ordered desired poses, one per task-space location (TSL)."""

    poses: tuple

    def __post_init__(self):
        poses = tuple(self.poses)
        if not poses:
            raise ValueError("a task needs at least one location")
        object.__setattr__(self, "poses", poses)

    @classmethod
    def from_positions(cls, positions) -> "TaskSpec":
        return cls(tuple(Pose(p) for p in positions))

    def __len__(self):
        return len(self.poses)

    def __iter__(self):
        return iter(self.poses)

    def __getitem__(self, i):
        return self.poses[i]


def dh_matrix(a, alpha, d, theta) -> np.ndarray:
    """Homogeneous transform ``Rz(theta) Tz(d) Tx(a) Rx(alpha)``."""
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def dh_transform(row: DHRow, theta: float) -> np.ndarray:
    """4x4 transform of one DH row at joint angle ``theta``."""
    _check_finite(theta)
    return dh_matrix(row.a, row.alpha, row.d, float(theta))


def chain_transforms(table: DHTable, q) -> np.ndarray:
    """Cumulative base-to-frame transforms for joint vector ``q``.

    Returns an array of shape ``(n + 1, 4, 4)``; entry 0 is the base frame
    (identity) and entry ``i`` is ``T_1 ... T_i``.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    n = table.n_joints
    if q.size != n:
        raise ValueError(f"joint vector has {q.size} entries, table has {n} joints")
    out = np.empty((n + 1, 4, 4))
    out[0] = np.eye(4)
    for i in range(n):
        out[i + 1] = out[i] @ dh_matrix(table.a[i], table.alpha[i], table.d[i], q[i])
    return out


def frame_origins(table: DHTable, q) -> np.ndarray:
    """Origins of frames 0..n, shape ``(n + 1, 3)``."""
    return chain_transforms(table, q)[:, :3, 3]


def end_transform(table: DHTable, q) -> np.ndarray:
    return chain_transforms(table, q)[-1]


def rotation_to_euler_zyx(R) -> np.ndarray:
    """Z-Y-X Euler angles ``(rz, ry, rx)`` of a rotation matrix."""
    R = np.asarray(R, dtype=float)
    ry = np.arctan2(-R[2, 0], np.hypot(R[0, 0], R[1, 0]))
    if np.hypot(R[0, 0], R[1, 0]) < 1e-12:
        # gimbal lock: fold the whole rotation into rz
        rz = np.arctan2(-R[0, 1], R[1, 1])
        rx = 0.0
    else:
        rz = np.arctan2(R[1, 0], R[0, 0])
        rx = np.arctan2(R[2, 1], R[2, 2])
    return wrap_angle(np.array([rz, ry, rx]))


def euler_zyx_to_rotation(angles) -> np.ndarray:
    rz, ry, rx = np.asarray(angles, dtype=float)
    cz, sz = np.cos(rz), np.sin(rz)
    cy, sy = np.cos(ry), np.sin(ry)
    cx, sx = np.cos(rx), np.sin(rx)
    Rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    Ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return Rz @ Ry @ Rx


def pose_from_transform(T) -> Pose:
    T = np.asarray(T, dtype=float)
    return Pose(T[:3, 3], rotation_to_euler_zyx(T[:3, :3]))


def forward_kinematics(table: DHTable, tsl_index: int) -> Pose:
    """End-frame pose of ``table`` at theta column ``tsl_index``.

    Intermediate frames are available through :func:`chain_transforms` and
    :func:`frame_origins`.
    """
    if not 0 <= tsl_index < table.n_tsl:
        raise IndexError(f"tsl_index {tsl_index} out of range for N={table.n_tsl}")
    return pose_from_transform(end_transform(table, table.theta[:, tsl_index]))


def error_terms(actual: Sequence[Pose], desired: TaskSpec) -> tuple[float, float]:
    """Summed squared position error and weighted squared orientation error."""
    if len(actual) != len(desired):
        raise ValueError(f"got {len(actual)} actual poses for {len(desired)} desired")
    p_err = 0.0
    o_err = 0.0
    for act, des in zip(actual, desired):
        p_err += float(np.sum((des.position - act.position) ** 2))
        if des.has_orientation:
            diff = wrap_angle(des.orientation - act.orientation)
            o_err += float(np.sum(des.orientation_weight * diff**2))
    return p_err, o_err


def pose_error(actual: Sequence[Pose], desired: TaskSpec) -> float:
    """Objective ``f = sqrt(P_err) + sqrt(O_err)``.

    Orientation differences are wrapped before squaring and only the axes
    enabled by each desired pose's ``orientation_weight`` contribute.
    """
    p_err, o_err = error_terms(actual, desired)
    return abs(np.sqrt(p_err)) + abs(np.sqrt(o_err))


def table_poses(table: DHTable) -> list[Pose]:
    return [forward_kinematics(table, j) for j in range(table.n_tsl)]
