"""Map a published optimal DH table onto joint and link modules.

Run:  python3 demos/01_table2_mapping.py

The table below is the 3-joint optimum reported for the cluttered desk
scenario (three task locations).  We check how closely its joint angles
reach the locations, quantise the twists onto the twist-unit grids, pick
H/L actuators with the static torque heuristic and export URDF.
"""
import numpy as np

from modsynth import DHTable, compose, forward_kinematics
from modsynth.modlib import composition_table
from modsynth.urdf import export_urdf, parse_urdf

table = DHTable(
    a=[0.0, 0.3, 0.3],
    alpha=[1.0367, 1.0624, 0.0],
    d=[0.25, 0.0, 0.0],
    theta=[[2.6063, 2.336, 1.4483], [2.1362, 2.8469, 0.2030], [1.7242, 2.0784, 0.6573]],
)
tsls = [(0.3, 0.0, 0.5), (0.3, 0.0, 0.3), (0.1, 0.5, 0.5)]

print("forward kinematics against the task locations")
for j, target in enumerate(tsls):
    p = forward_kinematics(table, j).position
    print(f"  TSL{j + 1}: reached {np.round(p, 4)}  target {target}  residual {np.linalg.norm(p - target):.4f} m")
# TSL2 misses by about 3 cm; theta_12 = 2.2336 instead of 2.336 would hit it
alt = table.theta.copy()
alt[0, 1] = 2.2336
print(f"  TSL2 with theta_12 = 2.2336: residual "
      f"{np.linalg.norm(forward_kinematics(table.with_theta(alt), 1).position - tsls[1]):.1e} m")

comp, residual = compose(table)
print(f"\ncomposition {comp.label} (torque feasible: {comp.torque_feasible}, mass {comp.mass:.3f} kg)")
for i, (u, r) in enumerate(zip(comp.units, residual.twist_deg), start=1):
    print(f"  joint {i}: {u.label}  pivot {np.degrees(u.pivot_twist):5.1f} deg  port {np.degrees(u.port_twist):5.1f} deg"
          f"  link {u.link_length:.3f} m  twist residual {r:.2f} deg")

# the modular robot realises the quantised twists, so its poses shift slightly
built = composition_table(comp, table)
for j, target in enumerate(tsls):
    print(f"  built robot at TSL{j + 1}: residual {np.linalg.norm(forward_kinematics(built, j).position - target):.4f} m")

model = parse_urdf(export_urdf(table, comp, name="table2_robot"))
print(f"\nURDF: {len(model.actuated)} actuated joints, chain {[j.name for j in model.joints]}")
