"""Command-line surface.

Verbs: run (full simulation), plan (routing only, prints a cost report),
fit-mfd (offline fit of a samples CSV), compare (paired baseline/proposed
runs with a directional report), validate (invariant checks on a log).
Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import metrics, routeplan
from .engine import AvoidanceConfig, Engine, ReplanPolicy, RunConfig
from .flightdyn import IntegratorConfig
from .hexspace import network_from_config
from .routeplan import PlannerConfig
from .scenario import DemandSpec, Flow, ScenarioConfig, Zone, corridor_scenario, \
    two_layer_scenario

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _scenario_from_args(args) -> ScenarioConfig:
    if args.scenario == "file":
        if not args.config:
            raise ValueError("--scenario file requires --config")
        with open(args.config) as fh:
            doc = json.load(fh)
        return _scenario_from_doc(doc, seed=args.seed, mode=args.mode)
    if args.scenario == "two-layer":
        return two_layer_scenario(seed=args.seed, guidance_mode=args.mode,
                                  rate=args.rate, horizon=args.horizon)
    return corridor_scenario(kind=args.scenario, altitude_mode=args.altitude,
                             rate=args.rate, horizon=args.horizon,
                             seed=args.seed, guidance_mode=args.mode)


def _scenario_from_doc(doc: dict, seed: int, mode: str) -> ScenarioConfig:
    network = network_from_config(doc["network"])
    flows = [
        Flow(Zone(*f["origin_zone"]), Zone(*f["dest_zone"]),
             [tuple(p) for p in f["rate_profile"]])
        for f in doc["flows"]
    ]
    return ScenarioConfig(
        name=doc.get("name", "file"),
        network=network,
        demand=DemandSpec(flows=flows, seed=seed),
        horizon=doc["horizon"],
        guidance_mode=mode,
        measurement_zone=tuple(doc["measurement_zone"])
        if "measurement_zone" in doc else None,
        closures=[(tuple(c["region"]), c["start"], c["end"])
                  for c in doc.get("closures", [])],
    )


def _run_config(args) -> RunConfig:
    scenario = _scenario_from_args(args)
    return RunConfig(
        scenario=scenario,
        planner=PlannerConfig(),
        integrator=IntegratorConfig(),
        avoidance=AvoidanceConfig(),
        replan=ReplanPolicy(),
        out_dir=args.out,
        verbose_orca=getattr(args, "verbose_orca", False),
    )


def cmd_run(args) -> int:
    bundle = Engine(_run_config(args)).run()
    print(json.dumps(bundle.summary, indent=2, sort_keys=True))
    return 0


def cmd_plan(args) -> int:
    config = _run_config(args)
    scenario = config.scenario
    from .scenario import generate_demand

    events = generate_demand(scenario.demand, scenario.horizon)
    if args.count:
        events = events[:args.count]
    graph = scenario.network.routing_graph(at_time=0.0)
    candidates = [
        routeplan.candidate_paths(graph, e.origin, e.destination,
                                  scenario.network, owner=i,
                                  max_candidates=config.planner.max_candidates)
        for i, e in enumerate(events)
    ]
    result = routeplan.approx_optimal_paths(candidates, config.planner,
                                            scenario.network)
    per_aircraft = [
        {"aircraft": i,
         "pass_by": [list(r) for r in path.pass_by],
         "graph_length_m": path.graph_length}
        for i, path in enumerate(result.decision.selection)
    ]
    print(json.dumps({
        "aircraft": len(events),
        "total_cost_s": result.cost,
        "evaluations": result.evaluations,
        "paths": per_aircraft,
    }, indent=2))
    return 0


def cmd_fit_mfd(args) -> int:
    samples = metrics.samples_from_csv(args.samples)
    fit = metrics.fit_mfd(samples)
    print(metrics.fit_report_json(fit))
    return 0


def cmd_compare(args) -> int:
    results = {}
    for mode in ("baseline", "proposed"):
        args.mode = mode
        config = _run_config(args)
        if args.out:
            config.out_dir = f"{args.out}/{mode}"
        results[mode] = Engine(config).run().summary
    report = {"baseline": results["baseline"], "proposed": results["proposed"]}
    directions = {}
    for key, better_high in (
        ("avg_min_separation_m", True),
        ("avg_travel_speed_mps", True),
        ("trip_completion_rate", True),
        ("energy_kwh_per_trip", False),
    ):
        b, p = results["baseline"].get(key), results["proposed"].get(key)
        if b is None or p is None:
            directions[key] = None
        else:
            directions[key] = (p >= b) if better_high else (p <= b)
    report["proposed_improves"] = directions
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_validate(args) -> int:
    log = metrics.TrajectoryLog.read_csv(args.log)
    problems = []
    seen: dict[int, float] = {}
    for rec in log.records:
        if rec.id in seen and rec.t <= seen[rec.id]:
            problems.append(f"records not strictly time-ordered for aircraft {rec.id}")
            break
        seen[rec.id] = rec.t
    by_tick = log.by_tick()
    for t, recs in sorted(by_tick.items()):
        ids = [r.id for r in recs]
        if len(ids) != len(set(ids)):
            problems.append(f"duplicate aircraft record at t={t}")
            break
    print(json.dumps({
        "records": len(log.records),
        "trips": len(log.trips),
        "completed": sum(1 for trip in log.trips.values() if trip.completed),
        "problems": problems,
    }, indent=2))
    return 0 if not problems else EXIT_RUNTIME


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON scenario document (with --scenario file)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mode", choices=["proposed", "baseline"], default="proposed")
    parser.add_argument("--scenario", default="plus",
                        choices=["plus", "hash", "star", "two-layer", "file"])
    parser.add_argument("--altitude", default="2D",
                        choices=["2D", "3D-thin", "3D-thick"])
    parser.add_argument("--rate", type=float, default=0.05,
                        help="per-flow arrival rate, aircraft/s")
    parser.add_argument("--horizon", type=float, default=3000.0)
    parser.add_argument("--out", help="output directory")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="uamsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a full simulation")
    _add_common(p_run)
    p_run.add_argument("--verbose-orca", action="store_true",
                       help="dump per-agent constraint planes as JSON lines")
    p_run.set_defaults(func=cmd_run)

    p_plan = sub.add_parser("plan", help="route planning only, prints cost report")
    _add_common(p_plan)
    p_plan.add_argument("--count", type=int, default=10,
                        help="number of demand events to plan")
    p_plan.set_defaults(func=cmd_plan)

    p_fit = sub.add_parser("fit-mfd", help="fit the flow curve to a samples CSV")
    p_fit.add_argument("samples")
    p_fit.set_defaults(func=cmd_fit_mfd)

    p_cmp = sub.add_parser("compare", help="paired baseline/proposed runs")
    _add_common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate", help="invariant checks on a trajectory CSV")
    p_val.add_argument("log")
    p_val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
