"""Result bundles: everything one synthesis run produced, as canonical JSON.

A bundle carries the validated scenario, the DoF search trace, the winning
DH table, the modular composition with its quantization residuals, any
planned joint paths, and provenance (config hash, seeds, tool version).
Nothing time-dependent is stored, so re-running with the bundled scenario
and seeds reproduces the file byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .kinematics import EULER_ORDER, DHTable
from .modlib import Composition, ModuleUnit, TwistResidual, compose
from .planner import JointLimits, JointPath, plan_joint_path
from .scenario import ScenarioFile
from .synthesis import SynthesisResult, binary_search_dof

log = logging.getLogger(__name__)

BUNDLE_FORMAT = "modsynth-bundle"
BUNDLE_VERSION = 1


def _num(x):
    """JSON-safe float: non-finite values become ``None``."""
    x = float(x)
    return x if math.isfinite(x) else None


def table_to_dict(table: DHTable) -> dict:
    return {
        "a": table.a.tolist(),
        "alpha": table.alpha.tolist(),
        "d": table.d.tolist(),
        "theta": table.theta.tolist(),
    }


def table_from_dict(data) -> DHTable:
    try:
        return DHTable(data["a"], data["alpha"], data["d"], data["theta"])
    except KeyError as exc:
        raise ValueError(f"DH table is missing {exc.args[0]!r}") from None


def composition_to_dict(comp: Composition) -> dict:
    """Units with twists in degrees (they sit on 10/30 degree grids) and lengths in meters."""
    return {
        "label": comp.label,
        "torque_feasible": bool(comp.torque_feasible),
        "joint_torques": [float(t) for t in comp.joint_torques],
        "mass": float(comp.mass),
        "units": [
            {
                "variant": u.variant,
                "type": u.unit_type,
                "pivot_twist_deg": round(math.degrees(u.pivot_twist), 9),
                "port_twist_deg": round(math.degrees(u.port_twist), 9),
                "link_length": float(u.link_length),
            }
            for u in comp.units
        ],
    }


def composition_from_dict(data) -> Composition:
    units = [
        ModuleUnit(
            variant=u["variant"],
            unit_type=int(u["type"]),
            pivot_twist=math.radians(u["pivot_twist_deg"]),
            port_twist=math.radians(u["port_twist_deg"]),
            link_length=float(u["link_length"]),
        )
        for u in data["units"]
    ]
    return Composition(tuple(units), bool(data.get("torque_feasible", True)), tuple(data.get("joint_torques", ())))


def config_hash(scenario: ScenarioFile, seed: int, restarts: int, exhaustive: bool) -> str:
    payload = json.dumps(
        {"scenario": scenario.data, "seed": seed, "restarts": restarts, "exhaustive_dof": exhaustive},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class ResultBundle:
    scenario: ScenarioFile
    seed: int
    restarts: int
    exhaustive: bool
    synthesis: dict
    table: DHTable | None = None
    composition: Composition | None = None
    residual: TwistResidual | None = None
    paths: dict = field(default_factory=dict)

    @property
    def n_star(self):
        return self.synthesis.get("n_star")

    @property
    def found(self) -> bool:
        return self.table is not None

    def provenance(self) -> dict:
        return {
            "tool": "modsynth",
            "version": __version__,
            "config_hash": config_hash(self.scenario, self.seed, self.restarts, self.exhaustive),
            "seed": self.seed,
            "restarts": self.restarts,
            "exhaustive_dof": self.exhaustive,
        }

    def to_dict(self) -> dict:
        return {
            "format": BUNDLE_FORMAT,
            "format_version": BUNDLE_VERSION,
            "euler_order": EULER_ORDER,
            "provenance": self.provenance(),
            "scenario": self.scenario.data,
            "synthesis": self.synthesis,
            "dh_table": table_to_dict(self.table) if self.table is not None else None,
            "composition": composition_to_dict(self.composition) if self.composition is not None else None,
            "twist_residual": (
                {
                    "twist": list(self.residual.twist),
                    "twist_deg": list(self.residual.twist_deg),
                    "link": list(self.residual.link),
                }
                if self.residual is not None
                else None
            ),
            "paths": {k: v.to_dict() for k, v in sorted(self.paths.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data, source="<bundle>") -> "ResultBundle":
        if data.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"{source}: not a {BUNDLE_FORMAT} file")
        if data.get("euler_order", EULER_ORDER) != EULER_ORDER:
            raise ValueError(f"{source}: Euler order {data['euler_order']!r} is not {EULER_ORDER}")
        prov = data["provenance"]
        scenario = ScenarioFile.from_dict(data["scenario"], f"{source}#scenario")
        res = data.get("twist_residual")
        return cls(
            scenario=scenario,
            seed=int(prov["seed"]),
            restarts=int(prov["restarts"]),
            exhaustive=bool(prov["exhaustive_dof"]),
            synthesis=data["synthesis"],
            table=table_from_dict(data["dh_table"]) if data.get("dh_table") else None,
            composition=composition_from_dict(data["composition"]) if data.get("composition") else None,
            residual=(
                TwistResidual(tuple(res["twist"]), tuple(res["link"]))
                if res
                else None
            ),
            paths={k: JointPath.from_dict(v) for k, v in data.get("paths", {}).items()},
        )

    @classmethod
    def from_json(cls, text: str, source="<bundle>") -> "ResultBundle":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data, source)


def load_bundle(path) -> ResultBundle:
    path = Path(path)
    return ResultBundle.from_json(path.read_text(), str(path))


def _synthesis_dict(result: SynthesisResult, threshold: float) -> dict:
    out = {
        "n_star": result.n_star,
        "threshold": threshold,
        "trace": [{"n": p.n, "f": _num(p.f), "feasible": p.feasible} for p in result.trace],
    }
    o = result.outcome
    if o is not None:
        out.update(
            f=_num(o.f),
            max_violation=_num(o.max_violation),
            feasible=bool(o.feasible),
            restart=int(o.restart),
            iterations=int(o.iterations),
            restart_log=[
                {"restart": int(r), "f": _num(f), "max_violation": _num(g), "feasible": bool(ok)}
                for r, f, g, ok in o.restart_log
            ],
        )
    return out


def synthesize_scenario(
    scenario: ScenarioFile, seed: int | None = None, restarts: int | None = None,
    exhaustive: bool | None = None, probe=None,
) -> ResultBundle:
    """Full pipeline: DoF search, inner optimisation, then modular composition.

    Returns a bundle whether or not a solution was found; check
    :attr:`ResultBundle.found`.
    """
    cfg = scenario.synthesis_config(seed, restarts, exhaustive)
    result = binary_search_dof(cfg, probe)
    bundle = ResultBundle(
        scenario=scenario,
        seed=cfg.solver.rng_seed,
        restarts=cfg.solver.restarts,
        exhaustive=cfg.exhaustive,
        synthesis=_synthesis_dict(result, cfg.threshold),
    )
    if not result.found:
        return bundle
    bundle.table = result.table
    try:
        bundle.composition, bundle.residual = compose(result.table, payload=scenario.data["payload"])
    except ValueError as exc:
        # e.g. a single-joint table or a twist the modules cannot realise
        log.warning("composition skipped: %s", exc)
        bundle.synthesis["composition_error"] = str(exc)
    return bundle


def path_key(i: int, j: int) -> str:
    """1-based TSL pair key used in ``ResultBundle.paths``."""
    return f"{i}-{j}"


def plan_consecutive(bundle: ResultBundle, limits: JointLimits | None = None, seed: int | None = None,
                     **kwargs) -> dict:
    """Plan TSL 1 to 2, 2 to 3, ... with the bundle's table and store the paths.

    Raises :class:`~modsynth.planner.NoPathError` at the first pair without a path.
    """
    if bundle.table is None:
        raise ValueError("bundle has no DH table")
    table = bundle.table
    limits = limits if limits is not None else JointLimits.unlimited(table.n_joints)
    seed = bundle.seed if seed is None else seed
    scene = bundle.scenario.scene
    for i in range(table.n_tsl - 1):
        path = plan_joint_path(table, scene, table.theta[:, i], table.theta[:, i + 1], limits, seed=seed, **kwargs)
        bundle.paths[path_key(i + 1, i + 2)] = path
    return bundle.paths
