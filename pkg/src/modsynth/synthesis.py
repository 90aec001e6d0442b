"""Outer search over the number of joints wrapping the inner optimisation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

from .geometry import Scene
from .kinematics import DHTable, TaskSpec
from .solver import Bounds, SolveOutcome, SolverConfig, solve_inner

log = logging.getLogger(__name__)

DEFAULT_DOF_ARRAY = (2, 3, 4, 5, 6, 7, 8)
MAX_SERIAL_DOF = 8
DEFAULT_THRESHOLD = 1e-3


class NoSolutionError(RuntimeError):
    """No probed DoF produced a feasible configuration under the threshold."""

    def __init__(self, result: "SynthesisResult"):
        super().__init__(f"no feasible configuration; probed n = {[p.n for p in result.trace]}")
        self.result = result


class Probe(NamedTuple):
    n: int
    f: float
    feasible: bool


def validate_dof_array(dof_array: Sequence[int]) -> tuple[int, ...]:
    A = tuple(int(v) for v in dof_array)
    if not A:
        raise ValueError("DoF array must not be empty")
    if any(v < 1 for v in A):
        raise ValueError("DoF values must be >= 1")
    if any(b <= a for a, b in zip(A, A[1:])):
        raise ValueError("DoF array must be strictly increasing")
    if A[-1] > MAX_SERIAL_DOF:
        raise ValueError(f"at most {MAX_SERIAL_DOF} joints can be assembled in series")
    return A


@dataclass(frozen=True)
class SynthesisConfig:
    task: TaskSpec
    scene: Scene = field(default_factory=Scene)
    threshold: float = DEFAULT_THRESHOLD
    dof_array: tuple = DEFAULT_DOF_ARRAY
    solver: SolverConfig = field(default_factory=SolverConfig)
    bounds: Bounds = field(default_factory=Bounds)
    # probe every n in ascending order instead of bisecting
    exhaustive: bool = False

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold T must be > 0")
        object.__setattr__(self, "dof_array", validate_dof_array(self.dof_array))


@dataclass(frozen=True)
class SynthesisResult:
    n_star: int | None
    outcome: SolveOutcome | None
    trace: tuple

    @property
    def found(self) -> bool:
        return self.n_star is not None

    @property
    def table(self) -> DHTable:
        if self.outcome is None:
            raise NoSolutionError(self)
        return self.outcome.table


ProbeFn = Callable[[int], SolveOutcome]


def _accepted(outcome, threshold) -> bool:
    return bool(outcome.feasible and outcome.f <= threshold)


def search_dof(dof_array: Sequence[int], accept: Callable[[int], bool], exhaustive: bool = False) -> int | None:
    """Smallest accepted ``n`` found by bisecting ``dof_array`` (or by an ascending sweep).

    Success at index ``m`` moves the upper index to ``m - 1``, failure moves
    the lower index to ``m + 1``; the smallest accepted ``n`` seen is
    returned, ``None`` when nothing was accepted.  ``accept`` is called once
    per probe, in probe order.
    """
    best = None
    if exhaustive:
        for n in dof_array:
            if accept(n):
                return n
        return None
    lo, hi = 0, len(dof_array) - 1
    while lo <= hi:
        m = (lo + hi) // 2
        n = dof_array[m]
        if accept(n):
            best = n if best is None else min(best, n)
            hi = m - 1
        else:
            lo = m + 1
    return best


def binary_search_dof(cfg: SynthesisConfig, probe: ProbeFn | None = None) -> SynthesisResult:
    """Bisect the DoF array for the smallest ``n`` whose inner problem succeeds.

    A probe succeeds when its outcome is feasible and ``f <= T``.  See
    :func:`search_dof` for the search itself.

    ``probe`` maps ``n`` to anything with ``f`` and ``feasible`` attributes;
    by default it runs :func:`~modsynth.solver.solve_inner`.
    """
    if probe is None:
        probe = _inner_probe(cfg)
    trace = []
    outcomes = {}

    def run(n):
        outcome = probe(n)
        ok = _accepted(outcome, cfg.threshold)
        trace.append(Probe(n, float(outcome.f), bool(outcome.feasible)))
        log.info("probe n=%d: f=%.3e feasible=%s -> %s", n, outcome.f, outcome.feasible, "ok" if ok else "fail")
        outcomes[n] = outcome
        return ok

    best_n = search_dof(cfg.dof_array, run, cfg.exhaustive)
    return SynthesisResult(best_n, outcomes.get(best_n), tuple(trace))


def _inner_probe(cfg: SynthesisConfig) -> ProbeFn:
    solver_cfg = cfg.solver
    if solver_cfg.early_stop is None:
        solver_cfg = replace(solver_cfg, early_stop=cfg.threshold)

    def probe(n):
        return solve_inner(n, cfg.task, cfg.scene, cfg.bounds, solver_cfg)

    return probe


def synthesize(cfg: SynthesisConfig, probe: ProbeFn | None = None) -> tuple[SynthesisResult, DHTable]:
    """Run the DoF search with the inner solver and return the minimal-DoF table.

    Raises :class:`NoSolutionError` (carrying the full trace) when nothing
    in the DoF array succeeds.
    """
    result = binary_search_dof(cfg, probe)
    if not result.found:
        raise NoSolutionError(result)
    return result, result.table
