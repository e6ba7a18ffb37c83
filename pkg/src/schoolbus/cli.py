"""Command line front end: generate, solve, block, experiment, export-mps."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .blocking import CyclicCompatibilityError, solve_blocking
from .instance import InstanceFormatError, ScenarioSpec, generate_scenario, load_instance, save_instance, validate_instance
from .mip import ModelBuildError, ModelSpec, build_routing_model, export_model
from .report import emit_reports, run_experiment, solve_routing
from .routing import ALL_OBJECTIVES, ObjectiveKind, SolverConfig
from .trips import build_compatibility_graph, check_routing_feasibility, trips_from_json, trips_to_json

log = logging.getLogger("schoolbus")


class CliError(Exception):
    pass


def _read_json(path: str | Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")


def _write_json(data, path: str | Path) -> None:
    Path(path).write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


def _load_valid_instance(path: str | Path):
    try:
        inst = load_instance(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file")
    problems = validate_instance(inst)
    if problems:
        raise CliError(f"{path}: invalid instance: " + "; ".join(v.message for v in problems[:5]))
    return inst


def _objectives(text: str) -> list[ObjectiveKind]:
    if text.strip().lower() == "all":
        return list(ALL_OBJECTIVES)
    return [ObjectiveKind.parse(t) for t in text.split(",") if t.strip()]


def cmd_generate(args) -> None:
    data = _read_json(args.spec) if args.spec else {}
    spec = ScenarioSpec.from_dict(data)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    errs = spec.errors()
    if errs:
        raise CliError("; ".join(errs))
    inst = generate_scenario(spec)
    save_instance(inst, args.output)
    log.info("wrote %s: %d schools, %d stops", args.output, len(inst.schools), len(inst.stops))


def cmd_solve(args) -> None:
    inst = _load_valid_instance(args.instance)
    config = SolverConfig(objective_kind=args.objective, time_limit=args.time_limit, seed=args.seed)
    sol = solve_routing(inst, config)
    problems = check_routing_feasibility(sol, inst)
    if problems:
        raise CliError("solver produced an infeasible routing: " + "; ".join(v.message for v in problems[:5]))
    out = Path(args.output)
    inst_ref = os.path.relpath(Path(args.instance).resolve(), out.resolve().parent)
    _write_json(
        {
            "trips": trips_to_json(sol.trips, sol.schedules),
            "manifest": {
                "instance": inst_ref,
                "objective_kind": sol.objective_kind.value,
                "seed": args.seed,
                "status": sol.status,
                "wall_time": round(sol.wall_time, 6),
                "objective_value": sol.objective_value,
                "bound": sol.bound,
                "gap": sol.gap,
            },
        },
        out,
    )
    log.info("%s: %d trips, objective %s (%s)", sol.objective_kind.label, len(sol.trips), sol.objective_value, sol.status)


def cmd_block(args) -> None:
    data = _read_json(args.solution)
    if not isinstance(data, dict) or "trips" not in data:
        raise CliError(f"{args.solution}: expected an object with a 'trips' list")
    try:
        trips, schedules = trips_from_json(data["trips"])
    except ValueError as exc:
        raise CliError(f"{args.solution}: {exc}")
    inst_path = args.instance
    if inst_path is None:
        ref = data.get("manifest", {}).get("instance")
        if ref is None:
            raise CliError("solution has no instance reference; pass --instance")
        inst_path = Path(args.solution).resolve().parent / ref
    inst = _load_valid_instance(inst_path)
    problems = check_routing_feasibility(trips, inst)
    if problems:
        raise CliError("solution is infeasible: " + "; ".join(v.message for v in problems[:5]))
    compat = build_compatibility_graph(trips, inst)
    try:
        blocks = solve_blocking(trips, compat)
    except CyclicCompatibilityError as exc:
        raise CliError(str(exc))
    _write_json(blocks.to_json(), args.output)
    log.info("%d trips, %d edges -> %d buses", len(trips), compat.n_edges, blocks.bus_count)


def cmd_experiment(args) -> None:
    d = Path(args.instances)
    if not d.is_dir():
        raise CliError(f"{d}: not a directory")
    files = sorted(d.glob("*.json"))
    if not files:
        raise CliError(f"{d}: no *.json instances")
    config = SolverConfig(time_limit=args.time_limit, seed=args.seed)
    kinds = _objectives(args.objectives)
    rows = []
    for f in files:
        inst = _load_valid_instance(f)
        rows += run_experiment(inst, kinds, config, scenario=f.stem)
        log.info("%s done", f.stem)
    emit_reports(rows, args.output, timings=not args.no_timings)
    failed = [r for r in rows if not r.ok]
    for r in failed:
        log.error("%s / %s: %s", r.scenario, r.objective.value, r.error)


def cmd_export_mps(args) -> None:
    inst = _load_valid_instance(args.instance)
    try:
        model = build_routing_model(inst, ModelSpec(objective_kind=args.objective))
    except ModelBuildError as exc:
        raise CliError(str(exc))
    export_model(model, args.output)
    log.info("%d variables, %d rows -> %s", model.n_variables, model.n_rows, args.output)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schoolbus", description="Multi-school PM bus routing with trip compatibility.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a random instance")
    g.add_argument("--spec", help="scenario spec JSON (defaults if omitted)")
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="route one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--objective", type=ObjectiveKind.parse, default=ObjectiveKind.MAXCOM_TT)
    s.add_argument("--time-limit", type=float, default=60.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("block", help="chain the trips of a solution into buses")
    b.add_argument("--solution", required=True)
    b.add_argument("--instance", help="overrides the instance named in the solution manifest")
    b.add_argument("-o", "--output", required=True)
    b.set_defaults(func=cmd_block)

    e = sub.add_parser("experiment", help="all objectives over a directory of instances")
    e.add_argument("--instances", required=True)
    e.add_argument("--objectives", default="all")
    e.add_argument("--time-limit", type=float, default=60.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--no-timings", action="store_true", help="blank running times for reproducible output")
    e.add_argument("-o", "--output", required=True)
    e.set_defaults(func=cmd_experiment)

    x = sub.add_parser("export-mps", help="write the routing model in MPS format")
    x.add_argument("--instance", required=True)
    x.add_argument("--objective", type=ObjectiveKind.parse, default=ObjectiveKind.MAXCOM_TT)
    x.add_argument("-o", "--output", required=True)
    x.set_defaults(func=cmd_export_mps)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (CliError, InstanceFormatError, ValueError, OSError) as exc:
        print(f"schoolbus {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
