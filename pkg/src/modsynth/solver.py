"""Inner-level constrained optimisation of DH parameters and joint angles.

The design vector packs all ``a``, then all ``alpha``, then all ``d``,
then the joint angles column by column (location-major), for a length of
``(3 + N) * n``.  The local method is SLSQP from SciPy; gradients and
constraint Jacobians are forward differences of the same objective and
constraint code that produces the reported values.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .geometry import Scene, self_collision_pairs
from .kinematics import DHTable, TaskSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Bounds:
    """Box limits ``(lower, upper)`` per kind of design variable."""

    a: tuple = (0.0, 0.5)
    alpha: tuple = (-np.pi / 2, np.pi / 2)
    d: tuple = (0.0, 0.5)
    theta: tuple = (-np.pi, np.pi)

    def __post_init__(self):
        for name in ("a", "alpha", "d", "theta"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"invalid {name} bounds ({lo}, {hi})")
            object.__setattr__(self, name, (lo, hi))

    def vectors(self, n: int, n_tsl: int) -> tuple[np.ndarray, np.ndarray]:
        kinds = [self.a] * n + [self.alpha] * n + [self.d] * n + [self.theta] * (n * n_tsl)
        lo, hi = np.array(kinds).T
        return lo, hi


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 300
    constraint_tolerance: float = 1e-6
    objective_tolerance: float = 1e-12
    fd_step: float = 1e-7
    restarts: int = 8
    rng_seed: int = 0
    # stop the multi-start as soon as a feasible restart reaches this objective
    early_stop: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("constraint_tolerance", "objective_tolerance", "fd_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True)
class SolveOutcome:
    table: DHTable
    f: float
    max_violation: float
    feasible: bool
    iterations: int
    restart: int
    restart_log: list = field(default_factory=list, compare=False, repr=False)


def pack(table: DHTable) -> np.ndarray:
    return np.concatenate([table.a, table.alpha, table.d, table.theta.T.reshape(-1)])


def unpack(x, n: int, n_tsl: int) -> DHTable:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != (3 + n_tsl) * n:
        raise ValueError(f"design vector has {x.size} entries, expected {(3 + n_tsl) * n}")
    theta = x[3 * n :].reshape(n_tsl, n).T
    return DHTable(x[:n], x[n : 2 * n], x[2 * n : 3 * n], theta)


class InnerProblem:
    """Objective, constraints and their finite-difference derivatives for fixed ``n``.

    All evaluations go through the compiled kernels in ``_kernels``; the
    Jacobians difference exactly the functions that report ``f`` and ``g``.
    """

    def __init__(self, n: int, task: TaskSpec, scene: Scene, bounds: Bounds, fd_step: float = 1e-7):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.task = task
        self.scene = scene
        self.n_tsl = len(task)
        self.lower, self.upper = bounds.vectors(n, self.n_tsl)
        self.fd_step = fd_step
        self.dim = (3 + self.n_tsl) * n
        self._P = np.array([p.position for p in task])
        self._O = np.array([p.orientation for p in task])
        self._W = np.array([p.orientation_weight for p in task])
        self._geom = (float(scene.link_width), float(scene.delta), *scene._packed, self_collision_pairs(n))

    def _x(self, x):
        x = np.ascontiguousarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"design vector has shape {x.shape}, expected ({self.dim},)")
        return x

    def f(self, x) -> float:
        """Reported objective ``sqrt(P_err) + sqrt(O_err)``."""
        p_err, o_err = _kernels.pose_terms(self._x(x), self.n, self.n_tsl, self._P, self._O, self._W)
        return abs(np.sqrt(p_err)) + abs(np.sqrt(o_err))

    def merit(self, x) -> float:
        """Smooth working objective ``P_err + O_err`` (same zero set as ``f``)."""
        return _kernels.merit(self._x(x), self.n, self.n_tsl, self._P, self._O, self._W)

    def fd_steps(self, x) -> np.ndarray:
        h = self.fd_step * np.maximum(1.0, np.abs(x))
        # step away from the upper bound so probes stay inside the box
        return np.where(x + h > self.upper, -h, h)

    def merit_grad(self, x) -> np.ndarray:
        x = self._x(x)
        return _kernels.merit_grad(x, self.n, self.n_tsl, self._P, self._O, self._W, self.fd_steps(x))

    def g(self, x) -> np.ndarray:
        """Collision constraints, location-major; ``g <= 0`` is feasible."""
        return _kernels.constraints(self._x(x), self.n, self.n_tsl, *self._geom)

    def g_jac(self, x) -> np.ndarray:
        x = self._x(x)
        return _kernels.constraint_jac(x, self.n, self.n_tsl, *self._geom, self.fd_steps(x))

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


def _local_solve(problem: InnerProblem, x0, cfg: SolverConfig):
    cons = []
    if problem.g(x0).size:
        # SLSQP wants c(x) >= 0
        cons.append(
            {
                "type": "ineq",
                "fun": lambda x: -problem.g(problem.clip(x)),
                "jac": lambda x: -problem.g_jac(problem.clip(x)),
            }
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            lambda x: problem.merit(problem.clip(x)),
            x0,
            jac=lambda x: problem.merit_grad(problem.clip(x)),
            method="SLSQP",
            bounds=list(zip(problem.lower, problem.upper)),
            constraints=cons,
            options={"maxiter": cfg.max_iterations, "ftol": cfg.objective_tolerance},
        )
    return problem.clip(res.x), int(res.nit)


def _rank(outcome: SolveOutcome):
    return (not outcome.feasible, outcome.f, outcome.restart)


def solve_inner(
    n: int, task: TaskSpec, scene: Scene, bounds: Bounds | None = None, cfg: SolverConfig | None = None
) -> SolveOutcome:
    """Multi-start local minimisation of the pose error under collision constraints.

    Each restart draws its start uniformly inside the bounds from its own
    child of ``SeedSequence(cfg.rng_seed)``, so restarts are independent of
    evaluation order.  The winner is the lowest ``(infeasible, f, restart)``.
    A restart whose objective turns non-finite is logged and skipped.
    """
    bounds = bounds or Bounds()
    cfg = cfg or SolverConfig()
    problem = InnerProblem(n, task, scene, bounds, cfg.fd_step)
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(cfg.restarts)
    best = None
    restart_log = []
    for r, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        x0 = rng.uniform(problem.lower, problem.upper)
        try:
            x, nit = _local_solve(problem, x0, cfg)
            f = problem.f(x)
            g = problem.g(x)
        except (ValueError, FloatingPointError) as exc:
            log.warning("restart %d failed: %s", r, exc)
            restart_log.append((r, float("nan"), float("nan"), False))
            continue
        if not np.isfinite(f):
            log.warning("restart %d produced a non-finite objective", r)
            restart_log.append((r, float("nan"), float("nan"), False))
            continue
        max_g = float(g.max()) if g.size else -np.inf
        feasible = max_g <= cfg.constraint_tolerance
        log.debug("n=%d restart %d: f=%.3e max_g=%.3e nit=%d", n, r, f, max_g, nit)
        restart_log.append((r, f, max_g, feasible))
        outcome = SolveOutcome(unpack(x, n, len(task)), f, max_g, feasible, nit, r)
        if best is None or _rank(outcome) < _rank(best):
            best = outcome
        if cfg.early_stop is not None and feasible and f <= cfg.early_stop:
            break
    if best is None:
        raise RuntimeError(f"every restart failed for n={n}")
    return SolveOutcome(
        best.table, best.f, best.max_violation, best.feasible, best.iterations, best.restart, restart_log
    )
