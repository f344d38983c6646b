"""Topology generation, link budgets, and classical-latency geometry."""
import json
import math

import pytest

from qnetsim.params import DEFAULT_PARAMS
from qnetsim import topology
from qnetsim.topology import (
    DensityUnreachable, Link, NetworkGraph, Node, UnknownNode,
    generate_topology, link_budget, transmittance,
)


def two_node_graph(distance_km: float) -> NetworkGraph:
    nodes = [Node(0, 0.0, 0.0), Node(1, distance_km, 0.0)]
    links = [Link(0, 1, distance_km)]
    return NetworkGraph(nodes, links, side_km=max(distance_km, 1.0))


def test_transmittance_at_attenuation_length():
    # half the attenuation length in the exponent: exp(-d / 2L)
    assert transmittance(20.0, 20.0) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert transmittance(0.0, 20.0) == 1.0


def test_link_budget_twenty_km_reference_numbers():
    link = Link(0, 1, 20.0)
    budget = link_budget(link, DEFAULT_PARAMS)
    p_t = math.exp(-0.5)
    assert budget.p_transmit == pytest.approx(p_t, abs=1e-15)
    expected_p = 0.33 * 0.33 * p_t * 0.2
    assert budget.p_success == pytest.approx(expected_p, rel=1e-12)
    assert budget.p_success == pytest.approx(0.01321024, abs=5e-9)
    assert budget.attempt_period_us == 50
    assert budget.expected_rate == pytest.approx(expected_p / 50e-6, rel=1e-12)
    assert budget.expected_rate == pytest.approx(264.2048, abs=5e-4)


def test_classical_latency_round_trip_of_geometry():
    g = two_node_graph(20.0)
    assert g.classical_latency_us(0, 1) == 100
    assert g.classical_latency_us(1, 0) == 100
    assert g.classical_latency_us(0, 0) == 0
    diag = two_node_graph(141.42)
    assert diag.classical_latency_us(0, 1) == 707


def test_classical_latency_floor_one_microsecond():
    g = two_node_graph(0.1)  # 0.5 us of flight time rounds to the floor
    assert g.classical_latency_us(0, 1) == 1


def test_classical_latency_unknown_node():
    g = two_node_graph(20.0)
    with pytest.raises(UnknownNode):
        g.classical_latency_us(0, 99)


def test_shortest_path_prefers_low_ids_on_ties():
    nodes = [Node(i, float(i), 0.0) for i in range(4)]
    links = [Link(0, 1, 1.0), Link(0, 2, 1.0), Link(1, 3, 1.0), Link(2, 3, 1.0)]
    g = NetworkGraph(nodes, links, side_km=10.0)
    assert g.shortest_path_hops(0, 3) == [0, 1, 3]
    assert g.shortest_path_hops(3, 0) == [3, 1, 0]
    assert g.shortest_path_hops(0, 0) == [0]


def test_hop_distances_and_connectivity():
    nodes = [Node(i, float(i), 0.0) for i in range(4)]
    g = NetworkGraph(nodes, [Link(0, 1, 1.0), Link(1, 2, 1.0)], side_km=10.0)
    dist = g.hop_distances_from(0)
    assert dist == {0: 0, 1: 1, 2: 2}
    assert not g.is_connected()
    assert g.shortest_path_hops(0, 3) is None


def test_center_node_is_closest_to_centroid():
    nodes = [Node(0, 0.0, 0.0), Node(1, 10.0, 0.0), Node(2, 5.0, 1.0),
             Node(3, 5.0, 9.0)]
    g = NetworkGraph(nodes, [Link(0, 1, 10.0)], side_km=10.0)
    # centroid (5, 2.5): node 2 sits 1.5 away, nearer than all others
    assert g.center_node() == 2


def test_generate_topology_is_deterministic():
    a = generate_topology(30, 100.0, 0.12, seed=5)
    b = generate_topology(30, 100.0, 0.12, seed=5)
    assert a.to_json() == b.to_json()
    c = generate_topology(30, 100.0, 0.12, seed=6)
    assert a.to_json() != c.to_json()


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_generate_topology_density_and_connectivity(seed):
    g = generate_topology(100, 100.0, 0.1, seed=seed)
    assert g.is_connected()
    assert abs(g.density - 0.1) <= 0.1 * 0.1 + 1e-12
    assert all(0.0 <= n.x <= 100.0 and 0.0 <= n.y <= 100.0 for n in g.nodes)


def test_generate_topology_two_nodes_full_density():
    g = generate_topology(2, 50.0, 1.0, seed=3)
    assert len(g.links) == 1
    assert g.is_connected()


def test_generate_topology_impossible_density():
    with pytest.raises(DensityUnreachable):
        generate_topology(10, 100.0, 1.5, seed=0, max_tries=5)


def test_json_round_trip_preserves_structure():
    g = generate_topology(15, 80.0, 0.2, seed=11)
    clone = NetworkGraph.from_json(g.to_json())
    assert clone.to_json() == g.to_json()
    assert [n.id for n in clone.nodes] == [n.id for n in g.nodes]
    assert clone.classical_latency_us(0, 1) == g.classical_latency_us(0, 1)
    parsed = json.loads(g.to_json())
    assert set(parsed) >= {"side_km", "nodes", "links"}


def test_links_store_sorted_endpoints_and_length():
    g = generate_topology(15, 80.0, 0.2, seed=11)
    for link in g.links:
        assert link.a < link.b
        d = g.distance_km(link.a, link.b)
        assert link.length_km == pytest.approx(d, rel=1e-12)


def test_neighbors_sorted():
    g = generate_topology(15, 80.0, 0.25, seed=2)
    for n in g.nodes:
        nb = g.neighbors(n.id)
        assert nb == sorted(nb)
