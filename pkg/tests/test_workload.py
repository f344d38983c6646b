"""Request generation: eligible pairs, arrival spacing, determinism."""
import pytest

from qnetsim.topology import Link, NetworkGraph, Node
from qnetsim.workload import (
    FIXED_COUNT, MAX_RATE_MIN_FIDELITY, RATE_AND_FIDELITY, RATE_MAX_FIDELITY,
    EntanglementRequest, WorkloadSpec, eligible_pairs, generate_workload,
)


def line_graph(n):
    nodes = [Node(i, 10.0 * i, 0.0) for i in range(n)]
    links = [Link(i, i + 1, 10.0) for i in range(n - 1)]
    return NetworkGraph(nodes, links, side_km=10.0 * n)


def triangle():
    nodes = [Node(0, 0.0, 0.0), Node(1, 10.0, 0.0), Node(2, 5.0, 8.0)]
    links = [Link(0, 1, 10.0), Link(0, 2, 9.43), Link(1, 2, 9.43)]
    return NetworkGraph(nodes, links, side_km=12.0)


def test_eligible_pairs_need_two_hops():
    assert eligible_pairs(line_graph(4)) == [(0, 2), (0, 3), (1, 3)]
    assert eligible_pairs(triangle()) == []


def test_generate_workload_layout():
    g = line_graph(6)
    spec = WorkloadSpec(n_requests=4, inter_arrival_s=5.0, offset_s=2.0,
                        kind=MAX_RATE_MIN_FIDELITY, min_fidelity=0.6)
    reqs = generate_workload(g, spec, seed=1)
    assert [r.request_id for r in reqs] == ["req-0", "req-1", "req-2", "req-3"]
    assert [r.arrival_s for r in reqs] == [2.0, 7.0, 12.0, 17.0]
    allowed = set(eligible_pairs(g))
    for r in reqs:
        assert (r.src, r.dst) in allowed
        assert r.kind == MAX_RATE_MIN_FIDELITY
        assert r.min_fidelity == 0.6


def test_generate_workload_deterministic_by_seed():
    g = line_graph(8)
    spec = WorkloadSpec(n_requests=6)
    a = generate_workload(g, spec, seed=9)
    b = generate_workload(g, spec, seed=9)
    assert a == b
    c = generate_workload(g, spec, seed=10)
    assert [(r.src, r.dst) for r in a] != [(r.src, r.dst) for r in c]


def test_generate_workload_no_eligible_pairs():
    with pytest.raises(ValueError):
        generate_workload(triangle(), WorkloadSpec(n_requests=1), seed=0)


def test_monitor_targets_by_kind():
    base = dict(request_id="r", src=0, dst=2, arrival_s=0.0,
                count=8, rate_target=12.0, min_fidelity=0.8)
    fixed = EntanglementRequest(kind=FIXED_COUNT, **base)
    assert fixed.monitor_rate_target is None
    assert fixed.monitor_min_fidelity is None
    rate = EntanglementRequest(kind=RATE_MAX_FIDELITY, **base)
    assert rate.monitor_rate_target == 12.0
    assert rate.monitor_min_fidelity is None
    maxrate = EntanglementRequest(kind=MAX_RATE_MIN_FIDELITY, **base)
    assert maxrate.monitor_rate_target is None
    assert maxrate.monitor_min_fidelity == 0.8
    both = EntanglementRequest(kind=RATE_AND_FIDELITY, **base)
    assert both.monitor_rate_target == 12.0
    assert both.monitor_min_fidelity == 0.8
    assert both.plan_min_fidelity == 0.8
