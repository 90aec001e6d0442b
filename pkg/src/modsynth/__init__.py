"""Task-based synthesis of modular serial manipulators.

Finds the fewest joints whose DH parameters reach a set of task-space
locations without collisions, maps the result onto a catalog of joint and
link modules, validates it with inverse kinematics and motion planning, and
exports it as URDF.
"""
__version__ = "0.1.0"

from .geometry import ConvexMesh, Scene, constraint_values, signed_distance
from .kinematics import DHRow, DHTable, Pose, TaskSpec, forward_kinematics, pose_error
from .modlib import Composition, ModuleUnit, compose, count_combinations, enumerate_variant_combos
from .planner import JointLimits, JointPath, ik_damped_least_squares, plan_joint_path
from .solver import Bounds, SolverConfig, solve_inner
from .synthesis import SynthesisConfig, binary_search_dof, search_dof, synthesize

__all__ = [
    "Bounds",
    "Composition",
    "ConvexMesh",
    "DHRow",
    "DHTable",
    "JointLimits",
    "JointPath",
    "ModuleUnit",
    "Pose",
    "Scene",
    "SolverConfig",
    "SynthesisConfig",
    "TaskSpec",
    "binary_search_dof",
    "compose",
    "constraint_values",
    "count_combinations",
    "enumerate_variant_combos",
    "forward_kinematics",
    "ik_damped_least_squares",
    "plan_joint_path",
    "pose_error",
    "search_dof",
    "signed_distance",
    "solve_inner",
    "synthesize",
]
