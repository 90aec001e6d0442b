"""Full pipeline on the ten-cube desk scenario.

Run:  python3 demos/03_synthesize_and_plan.py [--restarts 8] [--seed 0]

1. load the scenario (obstacle placement is a reconstruction),
2. search the number of joints, optimising DH parameters for each probe,
3. map the winner onto modules,
4. plan collision-free joint paths between consecutive task locations,
5. write the bundle and a URDF next to this script (demos/out/).

Takes roughly 15 s with 8 restarts.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from modsynth.bundle import plan_consecutive, synthesize_scenario
from modsynth.geometry import constraint_values
from modsynth.kinematics import forward_kinematics
from modsynth.planner import path_is_collision_free
from modsynth.scenario import load_scenario
from modsynth.urdf import export_urdf

here = Path(__file__).parent
parser = argparse.ArgumentParser()
parser.add_argument("--restarts", type=int, default=8)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

scenario = load_scenario(here / "paper_sec5.json")
print(f"{len(scenario.obstacles)} obstacles, {len(scenario.task)} task locations, delta = {scenario.data['delta']}")

t0 = time.perf_counter()
bundle = synthesize_scenario(scenario, seed=args.seed, restarts=args.restarts)
print(f"\nDoF search ({time.perf_counter() - t0:.1f} s):")
T = bundle.synthesis["threshold"]
for p in bundle.synthesis["trace"]:
    verdict = "accepted" if p["feasible"] and p["f"] <= T else ("rejected: f > T" if p["feasible"] else "rejected: collision")
    print(f"  n = {p['n']}: f = {p['f']:.2e}  {verdict}")
if not bundle.found:
    raise SystemExit("no feasible configuration")

table = bundle.table
g = constraint_values(table, scenario.scene)
print(f"\nn* = {bundle.n_star}, f = {bundle.synthesis['f']:.2e}, worst clearance margin g = {g.max():.2e}")
print(f"a     = {np.round(table.a, 4)}\nalpha = {np.round(table.alpha, 4)}\nd     = {np.round(table.d, 4)}")
for j, pose in enumerate(scenario.task):
    print(f"  TSL{j + 1}: theta = {np.round(table.theta[:, j], 4)}  reached {np.round(forward_kinematics(table, j).position, 4)}")
print(f"composition {bundle.composition.label}, twist residuals {np.round(bundle.residual.twist_deg, 2)} deg")

t0 = time.perf_counter()
paths = plan_consecutive(bundle)
print(f"\nplanning ({time.perf_counter() - t0:.2f} s, continuous joints):")
for key, path in paths.items():
    ok = path_is_collision_free(table, scenario.scene, path)
    print(f"  {key}: {len(path)} waypoints, max step {np.abs(path.steps()).max():.3f} rad, collision free: {ok}")

out = here / "out"
out.mkdir(exist_ok=True)
(out / "bundle.json").write_text(bundle.to_json())
(out / "robot.urdf").write_text(export_urdf(table, bundle.composition, link_width=scenario.data["link_width"]))
print(f"\nwrote {out / 'bundle.json'} and {out / 'robot.urdf'}")
