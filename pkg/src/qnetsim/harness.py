"""Scenario running, seed sweeps, and deterministic results tables.

A scenario bundles everything one run needs: the network recipe, the
workload shape, the policy under test, and the operating modes. Seeds vary
the workload draw and every stochastic stream inside the simulation while
the topology stays fixed, so arms of a comparison face the same network and
the same request sequence.

CSV output is canonical: fixed column order, rows sorted, floats written
with ``repr``. Re-running the same scenario and seeds produces a
byte-identical file.
"""
from __future__ import annotations

import csv
import dataclasses
import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .params import DEFAULT_PARAMS, NoiseParams, SimParams
from .sim import SimResult, Simulation
from .topology import NetworkGraph, generate_topology
from .workload import PredistConfig, WorkloadSpec, generate_workload


@dataclass(frozen=True)
class Scenario:
    """One named experiment configuration."""

    name: str = "default"
    params: SimParams = field(default_factory=lambda: DEFAULT_PARAMS)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    policy: str = "scoring"
    gem_mode: str = "distributed"
    carrier: str = "shared"
    predist: PredistConfig = field(default_factory=PredistConfig)
    topology_seed: int = 1
    graph_json: Optional[str] = None  # explicit network, overrides generation


CSV_COLUMNS = (
    "scenario", "policy", "gem_mode", "predist_mode", "carrier", "seed",
    "duration_s", "n_requests", "n_done", "n_terminated", "delivered_total",
    "rate_per_s", "mean_fidelity", "mean_latency_s", "replans", "discards",
    "swap_attempts", "swap_successes", "purify_attempts", "link_successes",
    "directory_updates", "classical_messages",
)


@dataclass(frozen=True)
class MetricsRecord:
    """One CSV row: a scenario/seed pair reduced to headline numbers."""

    scenario: str
    policy: str
    gem_mode: str
    predist_mode: str
    carrier: str
    seed: int
    duration_s: float
    n_requests: int
    n_done: int
    n_terminated: int
    delivered_total: int
    rate_per_s: float
    mean_fidelity: Optional[float]
    mean_latency_s: Optional[float]
    replans: int
    discards: int
    swap_attempts: int
    swap_successes: int
    purify_attempts: int
    link_successes: int
    directory_updates: int
    classical_messages: int

    def to_row(self) -> list[str]:
        out = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


def build_graph(scenario: Scenario) -> NetworkGraph:
    if scenario.graph_json is not None:
        return NetworkGraph.from_json(scenario.graph_json)
    p = scenario.params
    return generate_topology(p.node_count, p.area_side_km, p.edge_density,
                             scenario.topology_seed,
                             memory_slots=p.memory_slots)


def summarize(scenario: Scenario, seed: int, res: SimResult) -> MetricsRecord:
    c = res.counters
    return MetricsRecord(
        scenario=scenario.name,
        policy=res.policy,
        gem_mode=res.gem_mode,
        predist_mode=res.predist_mode,
        carrier=res.carrier,
        seed=seed,
        duration_s=res.duration_s,
        n_requests=len(res.requests),
        n_done=sum(1 for r in res.requests if r.final_state == "done"),
        n_terminated=sum(1 for r in res.requests
                         if r.final_state == "terminated"),
        delivered_total=res.total_delivered,
        rate_per_s=res.delivered_per_s,
        mean_fidelity=res.mean_fidelity,
        mean_latency_s=res.mean_latency_s,
        replans=c.get("replans", 0),
        discards=c.get("discards", 0),
        swap_attempts=c.get("swap_attempts", 0),
        swap_successes=c.get("swap_successes", 0),
        purify_attempts=c.get("purify_attempts", 0),
        link_successes=c.get("link_successes", 0),
        directory_updates=res.directory_updates,
        classical_messages=sum(res.message_counts.values()),
    )


def run_once(scenario: Scenario, seed: int,
             graph: Optional[NetworkGraph] = None) -> SimResult:
    if graph is None:
        graph = build_graph(scenario)
    requests = generate_workload(graph, scenario.workload, seed)
    sim = Simulation(graph, requests, scenario.params,
                     policy=scenario.policy, gem_mode=scenario.gem_mode,
                     carrier=scenario.carrier, predist=scenario.predist,
                     master_seed=seed)
    return sim.run(scenario.params.duration_s)


def run_scenario(scenario: Scenario, seeds: Sequence[int]
                 ) -> list[MetricsRecord]:
    graph = build_graph(scenario)
    return [summarize(scenario, seed, run_once(scenario, seed, graph))
            for seed in seeds]


def _apply_override(scenario: Scenario, key: str, value) -> Scenario:
    """Set a scenario field; dotted keys reach into nested configs."""
    if "." in key:
        head, leaf = key.split(".", 1)
        sub = getattr(scenario, head)
        return replace(scenario, **{head: replace(sub, **{leaf: value})})
    return replace(scenario, **{key: value})


def _grid_name(base: str, combo: tuple) -> str:
    parts = [base]
    for key, value in combo:
        leaf = key.rsplit(".", 1)[-1]
        parts.append(f"{leaf}={value}")
    return "/".join(parts)


def sweep(base: Scenario, grid: Mapping[str, Sequence],
          seeds: Sequence[int]) -> list[MetricsRecord]:
    """Cartesian product of overrides, each arm run over all seeds."""
    if not grid:
        return run_scenario(base, seeds)
    keys = sorted(grid)
    records = []
    for values in itertools.product(*(grid[k] for k in keys)):
        combo = tuple(zip(keys, values))
        arm = base
        for key, value in combo:
            arm = _apply_override(arm, key, value)
        arm = replace(arm, name=_grid_name(base.name, combo))
        records.extend(run_scenario(arm, seeds))
    return records


# ---------------------------------------------------------------------------
# serialization


def write_csv(records: Sequence[MetricsRecord], path: str) -> None:
    rows = sorted(records, key=lambda r: (r.scenario, r.policy, r.gem_mode,
                                          r.predist_mode, r.carrier, r.seed))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in rows:
            writer.writerow(rec.to_row())


def scenario_to_dict(scenario: Scenario) -> dict:
    return dataclasses.asdict(scenario)


def scenario_from_dict(doc: Mapping) -> Scenario:
    """Build a scenario from plain JSON data; unknown keys are an error."""
    doc = dict(doc)
    kwargs = {}
    if "params" in doc:
        pdoc = dict(doc.pop("params"))
        if "noise" in pdoc:
            pdoc["noise"] = NoiseParams(**pdoc["noise"])
        kwargs["params"] = SimParams(**pdoc)
    if "workload" in doc:
        kwargs["workload"] = WorkloadSpec(**doc.pop("workload"))
    if "predist" in doc:
        kwargs["predist"] = PredistConfig(**doc.pop("predist"))
    allowed = {"name", "policy", "gem_mode", "carrier", "topology_seed",
               "graph_json"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    kwargs.update(doc)
    return Scenario(**kwargs)


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))
