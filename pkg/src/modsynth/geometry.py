"""Link and obstacle solids, signed distance, and collision constraints."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from . import _kernels
from .kinematics import DHTable, chain_transforms

DEFAULT_LINK_WIDTH = 0.05
DEFAULT_DELTA = 0.005
CONVEXITY_TOL = 1e-9

_BOX_CORNERS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)
_BOX_TRIANGLES = np.array(
    [
        [0, 1, 3], [0, 3, 2],  # -x
        [4, 6, 7], [4, 7, 5],  # +x
        [0, 4, 5], [0, 5, 1],  # -y
        [2, 3, 7], [2, 7, 6],  # +y
        [0, 2, 6], [0, 6, 4],  # -z
        [1, 5, 7], [1, 7, 3],  # +z
    ]
)


class InvalidMeshError(ValueError):
    pass


def _unique_directions(vectors, tol=1e-9):
    """Unit directions with duplicates removed, treating ``u`` and ``-u`` as equal."""
    out = []
    for v in vectors:
        norm = np.linalg.norm(v)
        if norm < tol:
            continue
        u = v / norm
        if not any(abs(abs(u @ w) - 1.0) < tol for w in out):
            out.append(u)
    return np.array(out).reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class ConvexMesh:
    """Closed convex triangulated surface.

    Construction fails with :class:`InvalidMeshError` unless every edge is
    shared by exactly two triangles and every vertex lies on or behind every
    face plane (within ``CONVEXITY_TOL``).
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        V = np.array(self.vertices, dtype=float)
        F = np.array(self.triangles, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] != 3 or len(V) < 4:
            raise InvalidMeshError("vertices must be an (m>=4, 3) array")
        if not np.all(np.isfinite(V)):
            raise InvalidMeshError("vertices must be finite")
        if F.ndim != 2 or F.shape[1] != 3 or len(F) < 4:
            raise InvalidMeshError("triangles must be an (k>=4, 3) index array")
        if F.min() < 0 or F.max() >= len(V):
            raise InvalidMeshError("triangle index out of range")
        edge_count: dict[tuple[int, int], int] = {}
        for tri in F:
            for e in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(e), max(e))
                edge_count[key] = edge_count.get(key, 0) + 1
        if any(c != 2 for c in edge_count.values()):
            raise InvalidMeshError("mesh is not watertight (every edge must border two triangles)")
        centroid = V.mean(axis=0)
        normals = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
        lengths = np.linalg.norm(normals, axis=1)
        if np.any(lengths < 1e-14):
            raise InvalidMeshError("degenerate triangle")
        normals /= lengths[:, None]
        # orient outward relative to the centroid
        flip = np.einsum("ij,ij->i", normals, V[F[:, 0]] - centroid) < 0
        normals[flip] *= -1
        offsets = np.einsum("ij,ij->i", normals, V[F[:, 0]])
        excess = V @ normals.T - offsets[None, :]
        if excess.max() > CONVEXITY_TOL:
            raise InvalidMeshError(f"mesh is not convex (vertex {excess.max():.3g} m outside a face)")
        V.setflags(write=False)
        F.setflags(write=False)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", F)
        object.__setattr__(self, "_normals", normals)

    @classmethod
    def box(cls, center, size, rotation=None) -> "ConvexMesh":
        """Box with side lengths ``size`` (scalar or 3-vector) around ``center``."""
        half = 0.5 * np.broadcast_to(np.asarray(size, dtype=float), (3,))
        if np.any(half <= 0):
            raise InvalidMeshError("box sides must be positive")
        R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        V = (_BOX_CORNERS * half) @ R.T + np.asarray(center, dtype=float)
        return cls(V, _BOX_TRIANGLES)

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Distinct face normal directions (sign-insensitive)."""
        return _unique_directions(self._normals)

    @cached_property
    def edge_directions(self) -> np.ndarray:
        V, F = self.vertices, self.triangles
        edges = np.concatenate([V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 1]], V[F[:, 0]] - V[F[:, 2]]])
        return _unique_directions(edges)

    def translated(self, offset) -> "ConvexMesh":
        return ConvexMesh(self.vertices + np.asarray(offset, dtype=float), self.triangles)

    def aabb(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class Scene:
    """Obstacles, safety margin ``delta`` and link cross-section width."""

    obstacles: tuple = ()
    delta: float = DEFAULT_DELTA
    link_width: float = DEFAULT_LINK_WIDTH

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not self.delta >= 0:
            raise ValueError("delta must be >= 0")
        if not self.link_width > 0:
            raise ValueError("link_width must be > 0")
        for ob in self.obstacles:
            if not isinstance(ob, ConvexMesh):
                raise TypeError("obstacles must be ConvexMesh instances")

    @cached_property
    def _packed(self):
        return _pack_meshes(self.obstacles)


def _pack_meshes(meshes: Sequence[ConvexMesh]):
    m = len(meshes)
    nv = np.array([len(o.vertices) for o in meshes], dtype=np.int64)
    nf = np.array([len(o.face_normals) for o in meshes], dtype=np.int64)
    ne = np.array([len(o.edge_directions) for o in meshes], dtype=np.int64)
    V = np.zeros((m, max(nv, default=1), 3))
    N = np.zeros((m, max(nf, default=1), 3))
    E = np.zeros((m, max(ne, default=1), 3))
    for k, o in enumerate(meshes):
        V[k, : nv[k]] = o.vertices
        N[k, : nf[k]] = o.face_normals
        E[k, : ne[k]] = o.edge_directions
    return V, nv, N, nf, E, ne


@dataclass(frozen=True, eq=False)
class LinkSolid:
    """Square-section box along the segment ``start -> end``.

    ``axes`` rows are the box's unit axes (along the segment first).  When
    the segment is shorter than ``width`` the box length is ``width``,
    centred on the segment midpoint, so coincident origins give a cube.
    """

    start: np.ndarray
    end: np.ndarray
    width: float
    axes: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.start + self.end)

    @property
    def half_extents(self) -> np.ndarray:
        return 0.5 * np.array([max(self.length, self.width), self.width, self.width])

    @property
    def vertices(self) -> np.ndarray:
        return self.center + (_BOX_CORNERS * self.half_extents) @ self.axes

    def as_mesh(self) -> ConvexMesh:
        return ConvexMesh(self.vertices, _BOX_TRIANGLES)


def link_frame_axes(a, d, R_prev, R_next) -> np.ndarray:
    """Box axes for the link from frame ``i-1`` to frame ``i``.

    The segment direction is ``(d z_{i-1} + a x_i) / L`` and the second axis
    ``(d x_i - a z_{i-1}) / L`` lies in the same plane, so the section
    orientation follows the DH frames smoothly.
    """
    z_prev = R_prev[:, 2]
    x_next = R_next[:, 0]
    L = np.hypot(a, d)
    if L < 1e-12:
        u, v = x_next, z_prev
    else:
        u = (d * z_prev + a * x_next) / L
        v = (d * x_next - a * z_prev) / L
    return np.array([u, np.cross(v, u), v])


def _link_boxes(table: DHTable, q, width):
    """Vertices ``(n, 8, 3)`` and axes ``(n, 3, 3)`` of every link box."""
    T = chain_transforms(table, q)
    n = table.n_joints
    V = np.empty((n, 8, 3))
    A = np.empty((n, 3, 3))
    for i in range(n):
        p0, p1 = T[i, :3, 3], T[i + 1, :3, 3]
        axes = link_frame_axes(table.a[i], table.d[i], T[i, :3, :3], T[i + 1, :3, :3])
        length = max(np.linalg.norm(p1 - p0), width)
        half = 0.5 * np.array([length, width, width])
        V[i] = 0.5 * (p0 + p1) + (_BOX_CORNERS * half) @ axes
        A[i] = axes
    return V, A


def link_solids_at(table: DHTable, q, width: float = DEFAULT_LINK_WIDTH) -> list[LinkSolid]:
    T = chain_transforms(table, q)
    return [
        LinkSolid(
            T[i, :3, 3].copy(),
            T[i + 1, :3, 3].copy(),
            float(width),
            link_frame_axes(table.a[i], table.d[i], T[i, :3, :3], T[i + 1, :3, :3]),
        )
        for i in range(table.n_joints)
    ]


def link_solids(table: DHTable, tsl_index: int, width: float = DEFAULT_LINK_WIDTH) -> list[LinkSolid]:
    """One :class:`LinkSolid` per joint at theta column ``tsl_index``."""
    return link_solids_at(table, table.theta[:, tsl_index], width)


def signed_distance(A: ConvexMesh, B: ConvexMesh) -> float:
    """Signed separation of two convex meshes.

    Positive: Euclidean gap.  Negative: minus the penetration depth, i.e.
    the length of the shortest translation that separates them.
    """
    return float(
        _kernels.signed_distance_kernel(
            A.vertices, len(A.vertices), A.face_normals, len(A.face_normals),
            A.edge_directions, len(A.edge_directions),
            B.vertices, len(B.vertices), B.face_normals, len(B.face_normals),
            B.edge_directions, len(B.edge_directions),
        )
    )


@lru_cache(maxsize=None)
def _self_pairs(n):
    pairs = self_collision_pairs(n)
    pairs.setflags(write=False)
    return pairs


def self_collision_pairs(n: int) -> np.ndarray:
    """Index pairs of non-adjacent links ``(i, k)``, ``k >= i + 2``."""
    pairs = [(i, k) for i in range(n) for k in range(i + 2, n)]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def constraint_labels(n: int, n_obstacles: int) -> list[tuple]:
    """Labels for one location's block of :func:`config_constraint_values`."""
    labels = [("obstacle", i, k) for i in range(n) for k in range(n_obstacles)]
    labels += [("link", int(i), int(k)) for i, k in self_collision_pairs(n)]
    return labels


def config_distances(table: DHTable, scene: Scene, q, cutoff: float = np.inf) -> np.ndarray:
    """Signed distances for link-obstacle pairs (link-major) then non-adjacent link pairs.

    Distances at or above ``cutoff`` may be replaced by a cheaper lower bound
    that is itself at least ``cutoff``.
    """
    q = np.ascontiguousarray(q, dtype=float).reshape(-1)
    if q.size != table.n_joints:
        raise ValueError(f"joint vector has {q.size} entries, table has {table.n_joints} joints")
    return _kernels.config_distances(
        table.a, table.alpha, table.d, q, float(scene.link_width),
        *scene._packed, _self_pairs(table.n_joints), float(cutoff),
    )


def config_constraint_values(table: DHTable, scene: Scene, q, cutoff: float = np.inf) -> np.ndarray:
    """Collision constraints ``g = delta - D`` at one joint vector (``g <= 0`` is safe).

    With a finite ``cutoff``, constraints with ``D >= cutoff`` are only
    guaranteed to satisfy ``g <= delta - cutoff``.
    """
    return scene.delta - config_distances(table, scene, q, cutoff)


def constraint_values(table: DHTable, scene: Scene) -> np.ndarray:
    """All collision constraints, location-major, for every theta column."""
    blocks = [config_constraint_values(table, scene, table.theta[:, j]) for j in range(table.n_tsl)]
    return np.concatenate(blocks)


def is_collision_free(table: DHTable, scene: Scene, q) -> bool:
    g = config_constraint_values(table, scene, q)
    return bool(g.size == 0 or g.max() <= 0.0)
