"""Scenario files: JSON ingestion, schema validation and defaults.

A scenario lists obstacles, task-space locations (TSLs) and the search
settings.  Files are checked against ``data/scenario.schema.json``; unknown
keys are rejected so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .geometry import ConvexMesh, InvalidMeshError, Scene
from .kinematics import Pose, TaskSpec, euler_zyx_to_rotation
from .solver import Bounds, SolverConfig
from .synthesis import SynthesisConfig, validate_dof_array


class ScenarioError(ValueError):
    """Unreadable or invalid scenario; ``problems`` holds one message per violation."""

    def __init__(self, source, problems):
        self.source = str(source)
        self.problems = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{self.source}: invalid scenario\n{lines}")


@lru_cache(maxsize=None)
def scenario_schema() -> dict:
    return json.loads(resources.files("modsynth.data").joinpath("scenario.schema.json").read_text())


def _defaults() -> dict:
    props = scenario_schema()["properties"]
    return {k: v["default"] for k, v in props.items() if "default" in v}


def _json_path(err) -> str:
    out = "$"
    for part in err.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else f".{part}"
    return out


def validate_scenario_dict(data, source="<scenario>") -> dict:
    """Validate ``data`` and return a copy with defaults filled in.

    Every schema violation is reported at once, followed by semantic checks
    (strictly increasing DoF array, valid obstacle meshes).
    """
    validator = Draft202012Validator(scenario_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    problems = [f"{_json_path(e)}: {e.message}" for e in errors]
    if problems:
        raise ScenarioError(source, problems)
    full = _defaults()
    full.update(copy.deepcopy(data))
    try:
        full["dof_array"] = list(validate_dof_array(full["dof_array"]))
    except ValueError as exc:
        problems.append(f"$.dof_array: {exc}")
    try:
        Bounds(**full.get("bounds", {}))
    except ValueError as exc:
        problems.append(f"$.bounds: {exc}")
    for i, ob in enumerate(full["obstacles"]):
        try:
            _obstacle_mesh(ob)
        except (InvalidMeshError, ValueError) as exc:
            problems.append(f"$.obstacles[{i}]: {exc}")
    if problems:
        raise ScenarioError(source, problems)
    return full


def _obstacle_mesh(spec) -> ConvexMesh:
    if spec["type"] == "box":
        rot = spec.get("rotation")
        R = None if rot is None else euler_zyx_to_rotation(rot)
        return ConvexMesh.box(spec["center"], spec["size"], R)
    return ConvexMesh(np.asarray(spec["vertices"], dtype=float), np.asarray(spec["triangles"], dtype=np.int64))


@dataclass(frozen=True, eq=False)
class ScenarioFile:
    """Parsed scenario; ``data`` is the canonical dictionary with defaults applied."""

    data: dict
    source: str = "<scenario>"

    @classmethod
    def from_dict(cls, data, source="<scenario>") -> "ScenarioFile":
        return cls(validate_scenario_dict(data, source), str(source))

    @property
    def obstacles(self) -> tuple:
        return tuple(_obstacle_mesh(ob) for ob in self.data["obstacles"])

    @property
    def scene(self) -> Scene:
        return Scene(self.obstacles, delta=self.data["delta"], link_width=self.data["link_width"])

    @property
    def task(self) -> TaskSpec:
        poses = []
        for t in self.data["tsls"]:
            poses.append(Pose(t["position"], t.get("orientation", (0.0, 0.0, 0.0)), t.get("orientation_weight", (0, 0, 0))))
        return TaskSpec(tuple(poses))

    @property
    def bounds(self) -> Bounds:
        return Bounds(**self.data.get("bounds", {}))

    @property
    def euler_order(self) -> str:
        return self.data["euler_order"]

    def synthesis_config(self, seed: int | None = None, restarts: int | None = None,
                         exhaustive: bool | None = None) -> SynthesisConfig:
        """Synthesis settings from the file; keyword arguments override it."""
        solver = SolverConfig(
            max_iterations=self.data["max_iterations"],
            restarts=self.data["restarts"] if restarts is None else restarts,
            rng_seed=self.data["seed"] if seed is None else seed,
        )
        return SynthesisConfig(
            task=self.task,
            scene=self.scene,
            threshold=self.data["T"],
            dof_array=tuple(self.data["dof_array"]),
            solver=solver,
            bounds=self.bounds,
            exhaustive=self.data["exhaustive_dof"] if exhaustive is None else exhaustive,
        )

    def to_json(self) -> str:
        """Canonical text: sorted keys, defaults explicit.  Stable under reparse."""
        return json.dumps(self.data, sort_keys=True, indent=2) + "\n"


def parse_scenario(text: str, source="<scenario>") -> ScenarioFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(source, [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    return ScenarioFile.from_dict(data, source)


def load_scenario(path) -> ScenarioFile:
    """Read and validate a scenario file."""
    path = Path(path)
    return parse_scenario(path.read_text(), str(path))


def bundled_scenario(name: str = "paper_sec5") -> ScenarioFile:
    """A scenario shipped with the package (``data/<name>.json``)."""
    ref = resources.files("modsynth.data").joinpath(f"{name}.json")
    return parse_scenario(ref.read_text(), f"modsynth.data/{name}.json")
