"""Command line front end.

Subcommands:
  plan      plan every request of a scenario's workload, print or save JSON
  run       run one scenario over seeds, write a metrics CSV
  sweep     run a grid of scenario overrides over seeds, write a metrics CSV
  validate  check a scenario config and its network without running

The QNETSIM_LOG environment variable sets the log level (DEBUG, INFO, ...).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from .harness import (
    Scenario, build_graph, load_scenario, run_scenario, scenario_from_dict,
    sweep, write_csv,
)
from .planner import NoFeasiblePath, plan_for_request, plan_to_dict
from .swapping import POLICY_NAMES
from .workload import generate_workload

log = logging.getLogger("qnetsim.cli")


def parse_seeds(text: str) -> list[int]:
    """Seed lists: '7', '1,2,5', or inclusive ranges like '1-20'."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part.lstrip("-"):
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("empty seed list")
    return seeds


def _load(args) -> Scenario:
    scenario = (load_scenario(args.config) if args.config
                else scenario_from_dict({}))
    if getattr(args, "policy", None):
        scenario = replace(scenario, policy=args.policy)
    if getattr(args, "gem_mode", None):
        scenario = replace(scenario, gem_mode=args.gem_mode)
    if getattr(args, "predist", None):
        scenario = replace(scenario,
                           predist=replace(scenario.predist,
                                           mode=args.predist))
    return scenario


def cmd_plan(args) -> int:
    scenario = _load(args)
    graph = build_graph(scenario)
    seeds = parse_seeds(args.seeds)
    requests = generate_workload(graph, scenario.workload, seeds[0])
    docs = []
    for req in requests:
        try:
            plan = plan_for_request(graph, req.src, req.dst, scenario.params,
                                    request_id=req.request_id,
                                    min_fidelity=req.plan_min_fidelity)
        except NoFeasiblePath as exc:
            docs.append({"request_id": req.request_id, "error": str(exc)})
            continue
        docs.append(plan_to_dict(plan))
    text = json.dumps({"scenario": scenario.name, "seed": seeds[0],
                       "plans": docs}, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {len(docs)} plans to {args.out}")
    else:
        print(text)
    return 0


def cmd_run(args) -> int:
    scenario = _load(args)
    seeds = parse_seeds(args.seeds)
    records = run_scenario(scenario, seeds)
    write_csv(records, args.out)
    total = sum(r.delivered_total for r in records)
    print(f"{scenario.name}: {len(records)} runs, {total} pairs delivered, "
          f"results in {args.out}")
    return 0


def cmd_sweep(args) -> int:
    with open(args.config) as fh:
        doc = json.load(fh)
    base = scenario_from_dict(doc.get("scenario", {}))
    grid = doc.get("grid", {})
    seeds = parse_seeds(args.seeds) if args.seeds else doc.get("seeds", [1])
    records = sweep(base, grid, seeds)
    write_csv(records, args.out)
    arms = sorted({r.scenario for r in records})
    print(f"{len(arms)} arms x {len(seeds)} seeds -> {len(records)} rows "
          f"in {args.out}")
    return 0


def cmd_validate(args) -> int:
    try:
        scenario = _load(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if scenario.policy not in POLICY_NAMES:
        print(f"unknown policy: {scenario.policy!r}", file=sys.stderr)
        return 1
    try:
        graph = build_graph(scenario)
    except Exception as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return 1
    problems = []
    if not graph.is_connected():
        problems.append("network is not connected")
    try:
        requests = generate_workload(graph, scenario.workload, 1)
    except ValueError as exc:
        problems.append(str(exc))
        requests = []
    for req in requests[:1]:
        try:
            plan_for_request(graph, req.src, req.dst, scenario.params,
                             request_id=req.request_id,
                             min_fidelity=req.plan_min_fidelity)
        except NoFeasiblePath as exc:
            problems.append(f"{req.request_id}: {exc}")
    if problems:
        for p in problems:
            print(f"problem: {p}", file=sys.stderr)
        return 1
    print(f"ok: {scenario.name}: {len(graph.nodes)} nodes, "
          f"{len(graph.links)} links, density {graph.density:.4f}, "
          f"{scenario.workload.n_requests} requests, "
          f"policy {scenario.policy}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnetsim",
        description="entanglement distribution network simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out):
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--seeds", default="1",
                       help="e.g. '7', '1,2,5', or '1-20' (default: 1)")
        if needs_out:
            p.add_argument("--out", required=True, help="output file")
        else:
            p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--policy", choices=POLICY_NAMES,
                       help="override the scenario's swap policy")
        p.add_argument("--gem-mode", choices=("distributed", "centralized"),
                       help="where swap decisions are made")
        p.add_argument("--predist", choices=("none", "once", "continuous"),
                       help="predistribution mode override")

    p_plan = sub.add_parser("plan", help="plan a workload, emit JSON")
    common(p_plan, needs_out=False)
    p_plan.set_defaults(func=cmd_plan)

    p_run = sub.add_parser("run", help="run a scenario, emit CSV")
    common(p_run, needs_out=True)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a config grid, emit CSV")
    common(p_sweep, needs_out=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="check a config without running")
    common(p_val, needs_out=False)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("QNETSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
