"""Command-line entry point.

Structured output goes to stdout (or ``-o FILE``); logs go to stderr.
Exit status is 0 on success, 2 when no solution or path exists, 1 on errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .bundle import (
    ResultBundle,
    composition_to_dict,
    load_bundle,
    path_key,
    plan_consecutive,
    synthesize_scenario,
    table_from_dict,
)
from .modlib import compose, count_combinations, enumerate_variant_combos
from .planner import JointLimits, NoPathError, plan_joint_path
from .scenario import load_scenario
from .urdf import export_urdf

log = logging.getLogger("modsynth")

EXIT_OK, EXIT_ERROR, EXIT_NO_SOLUTION = 0, 1, 2
SEED_ENV = "MODSYNTH_SEED"


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        log.info("wrote %s", out)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def cmd_synth(args) -> int:
    scenario = load_scenario(args.scenario)
    bundle = synthesize_scenario(
        scenario, seed=_seed(args), restarts=args.restarts, exhaustive=True if args.exhaustive_dof else None
    )
    if bundle.found and args.plan:
        try:
            plan_consecutive(bundle)
        except NoPathError as exc:
            log.error("planning failed: %s", exc)
            _emit(bundle.to_json(), args.output)
            return EXIT_NO_SOLUTION
    _emit(bundle.to_json(), args.output)
    if not bundle.found:
        log.error("no feasible configuration for DoF array %s", scenario.data["dof_array"])
        return EXIT_NO_SOLUTION
    comp = bundle.composition.label if bundle.composition is not None else "n/a"
    log.info("n* = %d, f = %.3e, composition %s", bundle.n_star, bundle.synthesis["f"], comp)
    return EXIT_OK


def _load_table(path):
    data = json.loads(Path(path).read_text())
    if data.get("format") == "modsynth-bundle":
        bundle = ResultBundle.from_dict(data, str(path))
        if bundle.table is None:
            raise ValueError(f"{path}: bundle has no DH table")
        return bundle.table
    return table_from_dict(data)


def cmd_compose(args) -> int:
    table = _load_table(args.dh)
    comp, residual = compose(table, payload=args.payload, link_grid=args.link_grid)
    out = {
        "composition": composition_to_dict(comp),
        "twist_residual": {"twist_deg": list(residual.twist_deg), "link": list(residual.link)},
    }
    _emit(_dump(out), args.output)
    return EXIT_OK


def cmd_enumerate(args) -> int:
    combos = enumerate_variant_combos(args.n)
    _emit(_dump({"n": args.n, "count": count_combinations(args.n), "combos": combos}), args.output)
    return EXIT_OK


def cmd_plan(args) -> int:
    bundle = load_bundle(args.bundle)
    if bundle.table is None:
        raise ValueError(f"{args.bundle}: bundle has no DH table")
    table = bundle.table
    n_tsl = table.n_tsl
    for name, idx in (("--from", args.from_), ("--to", args.to)):
        if not 1 <= idx <= n_tsl:
            raise ValueError(f"{name} must be in 1..{n_tsl}, got {idx}")
    seed = _seed(args)
    try:
        path = plan_joint_path(
            table,
            bundle.scenario.scene,
            table.theta[:, args.from_ - 1],
            table.theta[:, args.to - 1],
            JointLimits.uniform(table.n_joints) if args.bounded else JointLimits.unlimited(table.n_joints),
            seed=bundle.seed if seed is None else seed,
            step=args.step,
            max_samples=args.max_samples,
        )
    except NoPathError as exc:
        log.error("%s", exc)
        return EXIT_NO_SOLUTION
    out = {"from": args.from_, "to": args.to, "key": path_key(args.from_, args.to), **path.to_dict()}
    _emit(_dump(out), args.output)
    log.info("path with %d waypoints", len(path))
    return EXIT_OK


def cmd_export_urdf(args) -> int:
    bundle = load_bundle(args.bundle)
    if bundle.table is None:
        raise ValueError(f"{args.bundle}: bundle has no DH table")
    n = bundle.table.n_joints
    limits = JointLimits.uniform(n) if args.bounded else JointLimits.unlimited(n)
    xml = export_urdf(bundle.table, bundle.composition, limits, bundle.scenario.data["link_width"], args.name)
    _emit(xml, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modsynth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=False):
        sp.add_argument("-o", "--output", help="write to this file instead of stdout")
        if seed:
            sp.add_argument("--seed", type=int, help=f"RNG seed (default: file value or ${SEED_ENV})")

    s = sub.add_parser("synth", help="run the full pipeline on a scenario file")
    s.add_argument("scenario")
    s.add_argument("--restarts", type=int, help="multi-start count per probed DoF")
    s.add_argument("--exhaustive-dof", action="store_true", help="probe every DoF in ascending order")
    s.add_argument("--plan", action="store_true", help="also plan paths between consecutive TSLs")
    common(s, seed=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("compose", help="map a DH table (or bundle) to modules")
    s.add_argument("dh")
    s.add_argument("--payload", type=float, default=0.0, help="payload mass in kg")
    s.add_argument("--link-grid", type=float, help="snap link lengths to this step (m)")
    common(s)
    s.set_defaults(func=cmd_compose)

    s = sub.add_parser("enumerate", help="list feasible H/L variant combinations")
    s.add_argument("n", type=int)
    common(s)
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("plan", help="plan a joint path between two task-space locations")
    s.add_argument("bundle")
    s.add_argument("--from", dest="from_", type=int, required=True, help="start TSL (1-based)")
    s.add_argument("--to", type=int, required=True, help="goal TSL (1-based)")
    s.add_argument("--step", type=float, default=0.05, help="max joint step between waypoints (rad)")
    s.add_argument("--max-samples", type=int, default=50_000)
    s.add_argument("--bounded", action="store_true", help="limit joints to [-pi, pi] instead of continuous rotation")
    common(s, seed=True)
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("export-urdf", help="write the bundle's robot as URDF")
    s.add_argument("bundle")
    s.add_argument("--name", default="modsynth_robot")
    s.add_argument("--bounded", action="store_true", help="revolute joints limited to [-pi, pi]")
    common(s)
    s.set_defaults(func=cmd_export_urdf)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
