"""Joint-limited inverse kinematics and collision-free joint-space planning.

IK is damped least squares on a finite-difference Jacobian with clamping to
the joint limits after every step.  Planning is bidirectional RRT (connect
variant) with random shortcut smoothing.  Edges are checked by conservative
advancement, so clearance holds along the whole segment and not only at the
sampled configurations.

Joints may be bounded or continuous.  A continuous joint lives on the circle:
differences are taken modulo 2 pi, waypoints are wrapped to (-pi, pi], and
a path may cross +-pi.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import Scene, config_constraint_values, self_collision_pairs
from .kinematics import DHTable, Pose, end_transform, rotation_to_euler_zyx, wrap_angle

log = logging.getLogger(__name__)

DEFAULT_STEP = 0.05
# matches the solver default, so synthesized configurations count as free
CONSTRAINT_TOL = 1e-6
# smallest advance along an edge (m of guaranteed clearance)
MIN_ADVANCE = 1e-9


class IKFailure(RuntimeError):
    pass


class NoPathError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class JointLimits:
    """Per-joint range.  Joints flagged ``continuous`` ignore ``lower``/``upper``."""

    lower: np.ndarray
    upper: np.ndarray
    continuous: np.ndarray | None = None

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        cont = np.zeros(lo.shape, bool) if self.continuous is None else np.asarray(self.continuous, bool).reshape(-1)
        if lo.shape != hi.shape or cont.shape != lo.shape:
            raise ValueError("lower, upper and continuous must have the same length")
        if not np.all(lo < hi):
            raise ValueError("every lower limit must be below its upper limit")
        lo = np.where(cont, -np.pi, lo)
        hi = np.where(cont, np.pi, hi)
        for name, arr in (("lower", lo), ("upper", hi), ("continuous", cont)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, n, lower=-np.pi, upper=np.pi) -> "JointLimits":
        return cls(np.full(n, lower), np.full(n, upper))

    @classmethod
    def unlimited(cls, n) -> "JointLimits":
        """Every joint continuous."""
        return cls(np.full(n, -np.pi), np.full(n, np.pi), np.ones(n, bool))

    def __len__(self):
        return self.lower.size

    def contains(self, q, tol=0.0) -> bool:
        q = np.asarray(q, dtype=float)
        ok = (q >= self.lower - tol) & (q <= self.upper + tol)
        return bool(np.all(ok | self.continuous))

    def clamp(self, q) -> np.ndarray:
        """Clip bounded joints and wrap continuous ones to (-pi, pi]."""
        q = np.asarray(q, dtype=float)
        return np.where(self.continuous, wrap_angle(q), np.clip(q, self.lower, self.upper))

    def diff(self, q0, q1) -> np.ndarray:
        """Displacement from ``q0`` to ``q1``; the short way round for continuous joints."""
        d = np.asarray(q1, dtype=float) - np.asarray(q0, dtype=float)
        return np.where(self.continuous, wrap_angle(d), d)

    def distance(self, q0, q1) -> np.ndarray:
        """Largest per-joint displacement (broadcasts over leading axes)."""
        return np.max(np.abs(self.diff(q0, q1)), axis=-1)

    def sample(self, rng) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)

    def interpolate(self, q0, q1, step) -> np.ndarray:
        """Points from ``q0`` to ``q1`` (both exact) at most ``step`` apart per joint."""
        dq = self.diff(q0, q1)
        n_steps = max(1, int(np.ceil(np.max(np.abs(dq)) / step - 1e-12)))
        t = np.linspace(0.0, 1.0, n_steps + 1)[:, None]
        pts = self.clamp(q0 + t * dq)
        pts[0] = q0
        pts[-1] = q1
        return pts


@dataclass(frozen=True, eq=False)
class JointPath:
    """Joint vectors from start to goal; neighbours differ by at most ``step`` per joint.

    For continuous joints the difference is measured modulo 2 pi.
    """

    waypoints: np.ndarray
    step: float
    continuous: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.waypoints, dtype=float)
        if w.ndim != 2 or len(w) < 2:
            raise ValueError("a path needs at least two joint vectors")
        cont = np.zeros(w.shape[1], bool) if self.continuous is None else np.asarray(self.continuous, bool)
        object.__setattr__(self, "waypoints", w)
        object.__setattr__(self, "continuous", cont)

    def __len__(self):
        return len(self.waypoints)

    @property
    def start(self):
        return self.waypoints[0]

    @property
    def goal(self):
        return self.waypoints[-1]

    def steps(self) -> np.ndarray:
        """Per-joint displacement of every segment, shape ``(len - 1, n)``."""
        d = np.diff(self.waypoints, axis=0)
        return np.where(self.continuous, wrap_angle(d), d)

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "continuous": self.continuous.tolist(),
            "waypoints": self.waypoints.tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "JointPath":
        return cls(np.asarray(data["waypoints"], dtype=float), float(data["step"]), data.get("continuous"))


# -- inverse kinematics ---------------------------------------------------------


def _task_error(table, q, target: Pose):
    T = end_transform(table, q)
    err = target.position - T[:3, 3]
    if target.has_orientation:
        o_err = target.orientation_weight * wrap_angle(target.orientation - rotation_to_euler_zyx(T[:3, :3]))
        err = np.concatenate([err, o_err[target.orientation_weight > 0]])
    return err


def _jacobian(table, q, target, h=1e-7):
    e0 = _task_error(table, q, target)
    J = np.empty((e0.size, q.size))
    for k in range(q.size):
        qk = q.copy()
        qk[k] += h
        J[:, k] = -(_task_error(table, qk, target) - e0) / h
    return J


def ik_damped_least_squares(
    table: DHTable,
    target: Pose,
    seed,
    limits: JointLimits,
    tol: float = 1e-6,
    max_iterations: int = 500,
    damping: float = 0.1,
) -> np.ndarray:
    """Joint vector reaching ``target`` from ``seed``, kept inside ``limits``.

    Position is always matched; orientation axes are matched where the
    target's ``orientation_weight`` is set.  The damping factor shrinks after
    an improving step and grows after a rejected one.  Raises
    :class:`IKFailure` when the error is still above ``tol`` after
    ``max_iterations``.
    """
    q = np.asarray(seed, dtype=float).copy()
    if q.size != table.n_joints:
        raise ValueError("seed length does not match the table")
    if not limits.contains(q):
        raise ValueError("seed outside joint limits")
    err = _task_error(table, q, target)
    cost = float(err @ err)
    lam = damping
    for _ in range(max_iterations):
        if np.sqrt(cost) <= tol:
            return q
        J = _jacobian(table, q, target)
        A = J.T @ J + lam**2 * np.eye(q.size)
        dq = np.linalg.solve(A, J.T @ err)
        q_new = limits.clamp(q + dq)
        err_new = _task_error(table, q_new, target)
        cost_new = float(err_new @ err_new)
        if cost_new < cost:
            q, err, cost = q_new, err_new, cost_new
            lam = max(lam * 0.5, 1e-6)
        else:
            lam = lam * 10.0
            if lam > 1e6:
                break
    if np.sqrt(cost) <= tol:
        return q
    raise IKFailure(f"IK did not converge (residual {np.sqrt(cost):.3e})")


# -- motion planning --------------------------------------------------------------


def _bisection_order(m):
    """Indices ``0..m-1`` ordered coarse to fine, so collisions are found early."""
    order, seen = [], set()
    level = [(0, m - 1)]
    while level:
        nxt = []
        for lo, hi in level:
            if lo > hi:
                continue
            mid = (lo + hi) // 2
            if mid not in seen:
                seen.add(mid)
                order.append(mid)
            nxt += [(lo, mid - 1), (mid + 1, hi)]
        level = nxt
    return order


class _Checker:
    """Collision checks with a continuous guarantee along straight joint-space edges.

    Joint ``j`` turns everything from link ``j`` outward about an axis through
    its frame origin, so along ``q0 + t dq`` a point of link ``i`` moves no
    faster than ``sum_{j<=i} |dq_j| r_ji`` per unit ``t``, with ``r_ji`` the
    chain length from joint ``j`` through link ``i`` plus a box margin.
    Link-link distances only change through the joints between the two
    links.  Advancing ``t`` by the smallest slack-over-rate ratio therefore
    never steps over a contact (conservative advancement).  Samples are also
    never further apart than ``step`` on any joint.
    """

    def __init__(self, table, scene, limits, step, tol=CONSTRAINT_TOL, max_checks=20_000):
        self.table, self.scene, self.limits = table, scene, limits
        self.step, self.tol, self.max_checks = step, tol, max_checks
        self.checks = 0
        n = table.n_joints
        lengths = np.hypot(table.a, table.d)
        # every box point lies within 2 widths of its segment
        margin = 2.0 * scene.link_width
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        obs = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1):
                obs[i, j] = cum[i + 1] - cum[j] + margin
        pairs = self_collision_pairs(n)
        pair_rows = np.zeros((len(pairs), n))
        for p, (i, k) in enumerate(pairs):
            for j in range(i + 1, k + 1):
                pair_rows[p, j] = cum[k + 1] - cum[j] + margin
        self._rate_matrix = np.vstack([np.repeat(obs, len(scene.obstacles), axis=0), pair_rows])

    def slacks(self, q, cutoff=np.inf) -> np.ndarray:
        """``tol - g``; entries for distances beyond ``cutoff`` are lower bounds."""
        self.checks += 1
        return self.tol - config_constraint_values(self.table, self.scene, q, cutoff)

    def free(self, q) -> bool:
        s = self.slacks(q, self.scene.delta)
        return bool(s.size == 0 or s.min() >= 0.0)

    def coarse_edge_free(self, q0, q1) -> bool:
        """Cheap necessary test: interior samples at ``step`` resolution, midpoints first."""
        pts = self.limits.interpolate(q0, q1, self.step)[1:-1]
        return all(self.free(pts[i]) for i in _bisection_order(len(pts)))

    def edge_free(self, q0, q1) -> bool:
        # q0 is assumed free; q1 is reached and checked by the walk
        if not (self.free(q1) and self.coarse_edge_free(q0, q1)):
            return False
        dq = self.limits.diff(q0, q1)
        span = float(np.abs(dq).max())
        if span == 0.0 or self._rate_matrix.size == 0:
            return True
        rates = self._rate_matrix @ np.abs(dq)
        moving = rates > 0.0
        t_cap = self.step / span
        # pairs further apart than this cannot limit a full step
        cutoff = self.scene.delta + float(rates.max()) * t_cap
        t = 0.0
        for _ in range(self.max_checks):
            q = q1 if t >= 1.0 else q0 + t * dq
            s = self.slacks(q, cutoff)
            if t > 0.0 and s.min() < 0.0:
                return False
            if t >= 1.0:
                return True
            ratio = np.maximum(s[moving], MIN_ADVANCE) / rates[moving]
            t = min(1.0, t + min(t_cap, float(ratio.min()) if ratio.size else t_cap))
        return False


class _Tree:
    def __init__(self, root):
        self.nodes = [root]
        self.parents = [-1]
        self._arr = np.empty((64, root.size))
        self._arr[0] = root

    def add(self, q, parent) -> int:
        k = len(self.nodes)
        if k == len(self._arr):
            self._arr = np.concatenate([self._arr, np.empty_like(self._arr)])
        self._arr[k] = q
        self.nodes.append(q)
        self.parents.append(parent)
        return k

    def nearest(self, q, limits) -> int:
        return int(np.argmin(limits.distance(self._arr[: len(self.nodes)], q)))

    def branch(self, idx) -> list:
        out = []
        while idx != -1:
            out.append(self.nodes[idx])
            idx = self.parents[idx]
        return out


def _extend(tree: _Tree, q_target, checker: _Checker, reach):
    """Grow ``tree`` toward ``q_target`` by up to ``reach``; return new node index or None."""
    limits = checker.limits
    i = tree.nearest(q_target, limits)
    q_near = tree.nodes[i]
    delta = limits.diff(q_near, q_target)
    dist = float(np.max(np.abs(delta)))
    q_new = q_target if dist <= reach else limits.clamp(q_near + delta * (reach / dist))
    if not checker.edge_free(q_near, q_new):
        return None
    return tree.add(q_new, i)


def _connect(tree: _Tree, q_target, checker, reach):
    idx = None
    while True:
        new = _extend(tree, q_target, checker, reach)
        if new is None:
            return idx, False
        idx = new
        if tree.nodes[new] is q_target:
            return idx, True


def _shortcut(path, checker, rng, attempts):
    path = list(path)
    for _ in range(attempts):
        if len(path) < 3:
            break
        i, j = sorted(rng.choice(len(path), size=2, replace=False))
        if j - i < 2:
            continue
        if checker.edge_free(path[i], path[j]):
            path = path[: i + 1] + path[j:]
    return path


def _densify(path, limits, step):
    pts = [path[0]]
    for q0, q1 in zip(path, path[1:]):
        pts.extend(limits.interpolate(q0, q1, step)[1:])
    return np.array(pts)


def plan_joint_path(
    table: DHTable,
    scene: Scene,
    start,
    goal,
    limits: JointLimits,
    seed: int = 0,
    step: float = DEFAULT_STEP,
    max_samples: int = 50_000,
    reach: float = 0.5,
    shortcut_attempts: int = 100,
    goal_bias: float = 0.05,
    tol: float = CONSTRAINT_TOL,
) -> JointPath:
    """Collision-free joint path from ``start`` to ``goal``.

    The straight segment is tried first.  Otherwise two trees grow from the
    endpoints with uniform samples inside ``limits`` until they connect or
    ``max_samples`` samples are spent.  Consecutive waypoints differ by at
    most ``step`` per joint, and every configuration on the straight segments
    between them satisfies ``g <= tol``.

    Raises ``ValueError`` for colliding or out-of-limit endpoints and
    :class:`NoPathError` when the sample budget runs out.
    """
    start = np.asarray(start, dtype=float).copy()
    goal = np.asarray(goal, dtype=float).copy()
    if start.shape != (table.n_joints,) or goal.shape != (table.n_joints,):
        raise ValueError("start/goal must match the number of joints")
    if len(limits) != table.n_joints:
        raise ValueError("limits must match the number of joints")
    if not (limits.contains(start) and limits.contains(goal)):
        raise ValueError("start/goal outside joint limits")
    checker = _Checker(table, scene, limits, step, tol)
    if not checker.free(start):
        raise ValueError("start configuration is in collision")
    if not checker.free(goal):
        raise ValueError("goal configuration is in collision")

    def finish(path):
        return JointPath(_densify(path, limits, step), step, limits.continuous)

    if checker.edge_free(start, goal):
        return finish([start, goal])

    rng = np.random.default_rng(seed)
    tree_a, tree_b = _Tree(start), _Tree(goal)
    a_is_start = True
    for sample in range(max_samples):
        q_rand = tree_b.nodes[0] if rng.random() < goal_bias else limits.sample(rng)
        new_a = _extend(tree_a, q_rand, checker, reach)
        if new_a is not None:
            new_b, reached = _connect(tree_b, tree_a.nodes[new_a], checker, reach)
            if reached:
                path = tree_a.branch(new_a)[::-1] + tree_b.branch(new_b)[1:]
                if not a_is_start:
                    path = path[::-1]
                log.debug("RRT-Connect joined after %d samples (%d checks)", sample + 1, checker.checks)
                return finish(_shortcut(path, checker, rng, shortcut_attempts))
        tree_a, tree_b = tree_b, tree_a
        a_is_start = not a_is_start
    raise NoPathError(f"no path found within {max_samples} samples")


def path_is_collision_free(
    table: DHTable, scene: Scene, path: JointPath, resolution: float | None = None, tol: float = CONSTRAINT_TOL
) -> bool:
    """Sample ``path`` at ``resolution`` (default ``path.step / 4``) and check ``g <= tol`` everywhere."""
    res = resolution or path.step / 4.0
    n = path.waypoints.shape[1]
    limits = JointLimits(np.full(n, -np.inf), np.full(n, np.inf), path.continuous)
    checker = _Checker(table, scene, limits, res, tol)
    return all(checker.free(q) for q in _densify(list(path.waypoints), limits, res))
