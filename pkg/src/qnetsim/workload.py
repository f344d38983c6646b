"""Request arrival generation.

Endpoint pairs are drawn uniformly among pairs at least two hops apart, so
every request involves at least one swap station. Arrivals are evenly spaced
from a configurable offset.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .engine import _stream_seed
from .topology import NetworkGraph

# request kinds
FIXED_COUNT = "fixed_count"
RATE_MAX_FIDELITY = "rate_max_fidelity"
MAX_RATE_MIN_FIDELITY = "max_rate_min_fidelity"
RATE_AND_FIDELITY = "rate_and_fidelity"

REQUEST_KINDS = (FIXED_COUNT, RATE_MAX_FIDELITY, MAX_RATE_MIN_FIDELITY,
                 RATE_AND_FIDELITY)


@dataclass(frozen=True)
class EntanglementRequest:
    request_id: str
    src: int
    dst: int
    kind: str
    arrival_s: float
    count: Optional[int] = None          # fixed_count: pairs to deliver
    rate_target: Optional[float] = None  # pairs per second to hold
    min_fidelity: Optional[float] = None

    @property
    def monitor_rate_target(self) -> Optional[float]:
        if self.kind in (RATE_MAX_FIDELITY, RATE_AND_FIDELITY):
            return self.rate_target
        return None

    @property
    def monitor_min_fidelity(self) -> Optional[float]:
        if self.kind in (MAX_RATE_MIN_FIDELITY, RATE_AND_FIDELITY):
            return self.min_fidelity
        return None

    @property
    def plan_min_fidelity(self) -> Optional[float]:
        """Fidelity floor the planner must build to, if any."""
        return self.min_fidelity


@dataclass(frozen=True)
class WorkloadSpec:
    n_requests: int = 6
    inter_arrival_s: float = 5.0
    offset_s: float = 0.0
    kind: str = MAX_RATE_MIN_FIDELITY
    count: Optional[int] = None
    rate_target: Optional[float] = None
    min_fidelity: Optional[float] = 0.6
    min_hops: int = 2


@dataclass(frozen=True)
class PredistConfig:
    mode: str = "none"            # none | once | continuous
    stock_target: int = 10        # pairs banked per superlink
    low_water: int = 5            # continuous mode re-activates below this
    superlinks: int = 5
    tick_s: float = 0.1
    max_age_s: Optional[float] = None  # stock never expires unless set


def eligible_pairs(graph: NetworkGraph, min_hops: int = 2
                   ) -> list[tuple[int, int]]:
    """Node pairs at least ``min_hops`` apart, sorted for determinism."""
    out = []
    ids = sorted(node.id for node in graph.nodes)
    for src in ids:
        dist = graph.hop_distances_from(src)
        for dst in ids:
            if dst > src and dist.get(dst, -1) >= min_hops:
                out.append((src, dst))
    return out


def generate_workload(graph: NetworkGraph, spec: WorkloadSpec, seed: int
                      ) -> list[EntanglementRequest]:
    pairs = eligible_pairs(graph, spec.min_hops)
    if not pairs:
        raise ValueError(f"no node pairs at least {spec.min_hops} hops apart")
    rng = np.random.Generator(np.random.PCG64(_stream_seed(seed, 0, "workload")))
    out = []
    for i in range(spec.n_requests):
        src, dst = pairs[int(rng.integers(0, len(pairs)))]
        out.append(EntanglementRequest(
            request_id=f"req-{i}",
            src=src, dst=dst,
            kind=spec.kind,
            arrival_s=spec.offset_s + i * spec.inter_arrival_s,
            count=spec.count,
            rate_target=spec.rate_target,
            min_fidelity=spec.min_fidelity,
        ))
    return out
