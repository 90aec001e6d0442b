"""How the outer DoF search walks the candidate array.

Run:  python3 demos/02_dof_search.py

With candidates 2..8 the search bisects: it probes the middle (5), and on
success moves down, on failure moves up, keeping the smallest success.  A
stand-in oracle that accepts any n >= n0 shows the probe sequence for each
threshold without running the optimiser.
"""
from types import SimpleNamespace

from modsynth import SynthesisConfig, TaskSpec, binary_search_dof

cfg = SynthesisConfig(TaskSpec.from_positions([(0.3, 0.0, 0.5)]))
print(f"candidates {list(cfg.dof_array)}, threshold T = {cfg.threshold}")
for n0 in list(cfg.dof_array) + [9]:
    res = binary_search_dof(cfg, lambda n: SimpleNamespace(f=1e-5 if n >= n0 else 0.1, feasible=n >= n0))
    steps = " -> ".join(f"{p.n}{'+' if p.feasible else '-'}" for p in res.trace)
    print(f"  feasible from n = {n0}: probes {steps:28s} n* = {res.n_star}")
