"""Discrete-event simulator for entanglement distribution networks.

Layers, bottom up: analytic Werner-state algebra (`werner`), random waypoint
topologies with link budgets (`topology`), a deterministic event engine
(`engine`), a replicated entanglement directory (`registry`), schedule-tree
planning (`planner`), link-layer pair generation (`linklayer`), swap decision
policies (`swapping`), request transport monitoring (`transport`), workload
generation (`workload`), the integrated simulation (`sim`), and experiment
harnessing with CSV output (`harness`).
"""

from .params import SimParams, NoiseParams, DEFAULT_PARAMS, US_PER_S, US_PER_MS
from .engine import Engine, Event, SimSummary, SimTime
from .werner import WernerState
from .topology import NetworkGraph, Node, Link, generate_topology, link_budget
from .planner import (
    Leaf, Swap, Purify, Plan, ResourceLedger,
    optimal_tree, optimal_tree_over_path, augment_with_purification,
    plan_for_request, plan_batch, select_superlinks,
    estimate_tree, link_rate_map, swap_latency, plan_to_dict,
    NoFeasiblePath, InfeasibleFidelity,
)
from .workload import (
    EntanglementRequest, WorkloadSpec, PredistConfig, generate_workload,
)
from .sim import Simulation, SimResult, RequestSummary
from .harness import (
    Scenario, MetricsRecord, run_once, run_scenario, sweep, write_csv,
    scenario_from_dict, load_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "SimParams", "NoiseParams", "DEFAULT_PARAMS", "US_PER_S", "US_PER_MS",
    "Engine", "Event", "SimSummary", "SimTime",
    "WernerState",
    "NetworkGraph", "Node", "Link", "generate_topology", "link_budget",
    "Leaf", "Swap", "Purify", "Plan", "ResourceLedger",
    "optimal_tree", "optimal_tree_over_path", "augment_with_purification",
    "plan_for_request", "plan_batch", "select_superlinks",
    "estimate_tree", "link_rate_map", "swap_latency", "plan_to_dict",
    "NoFeasiblePath", "InfeasibleFidelity",
    "EntanglementRequest", "WorkloadSpec", "PredistConfig",
    "generate_workload",
    "Simulation", "SimResult", "RequestSummary",
    "Scenario", "MetricsRecord", "run_once", "run_scenario", "sweep",
    "write_csv", "scenario_from_dict", "load_scenario",
    "__version__",
]
