"""Schedule-tree planning against exhaustive enumeration and hand arithmetic."""
import math

import numpy as np
import pytest

from qnetsim.params import DEFAULT_PARAMS
from qnetsim.topology import Link, NetworkGraph, Node, generate_topology
from qnetsim.planner import (
    InfeasibleFidelity, Leaf, NoFeasiblePath, Purify, ResourceLedger, Swap,
    augment_with_purification, estimate_tree, link_rate_map, optimal_tree,
    optimal_tree_over_path, plan_for_request, select_superlinks,
    superlink_gain, swap_latency,
)

from oracles import (
    best_latency_over_path, brute_force_best_latency,
    catalan_latency_over_path,
)

P = DEFAULT_PARAMS


def line_graph(n: int, spacing_km: float = 20.0) -> NetworkGraph:
    nodes = [Node(i, i * spacing_km, 0.0) for i in range(n)]
    links = [Link(i, i + 1, spacing_km) for i in range(n - 1)]
    return NetworkGraph(nodes, links, side_km=max(n * spacing_km, 1.0))


def test_swap_latency_hand_arithmetic():
    # slower child 10 ms, op 10 us, correction 200 us, half the attempts fail
    assert swap_latency(0.004, 0.010, 10e-6, 200e-6, 0.5) == pytest.approx(
        (1.5 * 0.010 + 10e-6 + 200e-6) / 0.5, rel=1e-15)
    # equal children: joint expected arrival is 1.5 child periods
    assert swap_latency(0.004, 0.004, 0.0, 0.0, 1.0) == pytest.approx(0.006)


def test_joint_arrival_factor_against_monte_carlo():
    # renewal processes with exponential periods: E[max] = 1.5 * mean
    rng = np.random.default_rng(7)
    mean = 0.004
    a = rng.exponential(mean, 1_000_000)
    b = rng.exponential(mean, 1_000_000)
    assert np.maximum(a, b).mean() == pytest.approx(1.5 * mean, rel=0.02)


def test_leaf_estimate_matches_link_budget():
    g = line_graph(2)
    rates = link_rate_map(g, P)
    est = estimate_tree(Leaf(0, 1), P, lambda s: rates[s],
                        g.classical_latency_us)
    assert est.latency_s == pytest.approx(1.0 / rates[(0, 1)], rel=1e-15)
    assert est.latency_s == pytest.approx(0.0037849, abs=5e-7)
    assert est.fidelity == pytest.approx(P.link_fidelity, abs=1e-12)
    assert est.depths == {(0, 1): 0}


def test_two_hop_estimate_hand_values():
    g = line_graph(3)
    rates = link_rate_map(g, P)
    tree = Swap(1, Leaf(0, 1), Leaf(1, 2), 0, 2)
    est = estimate_tree(tree, P, lambda s: rates[s], g.classical_latency_us)
    leaf = 1.0 / rates[(0, 1)]
    ct = g.classical_latency_us(0, 2) / 1e6  # 40 km apart: 200 us
    assert ct == 200e-6
    want = (1.5 * leaf + 10e-6 + ct) / 0.4
    assert est.latency_s == pytest.approx(want, rel=1e-12)
    assert est.latency_s == pytest.approx(0.0147185, abs=5e-7)
    # weight: product of leaf weights, decayed for half the slower period
    w_leaf = (4 * P.link_fidelity - 1) / 3
    w = w_leaf * w_leaf * math.exp(-2 * 0.01 * 0.5 * leaf)
    assert est.fidelity == pytest.approx((3 * w + 1) / 4, rel=1e-12)
    assert est.depths == {(0, 2): 0, (0, 1): 1, (1, 2): 1}
    assert est.node_rates[(0, 2)] == pytest.approx(1.0 / est.latency_s)


def test_cached_leaf_is_effectively_free():
    g = line_graph(2)
    rates = link_rate_map(g, P)
    est = estimate_tree(Leaf(0, 1, cached=True), P, lambda s: rates[s],
                        g.classical_latency_us)
    assert est.latency_s == 1e-6
    assert est.cached_spans == [(0, 1)]
    assert est.leaf_spans == []


def test_interval_recurrence_matches_shape_enumeration():
    g = line_graph(5)
    rates = link_rate_map(g, P)
    link_lat = {s: 1.0 / r for s, r in rates.items()}

    def classical_s(u, v):
        return g.classical_latency_us(u, v) / 1e6

    path = [0, 1, 2, 3, 4]
    best_dp = best_latency_over_path(path, link_lat, classical_s,
                                     P.swap_op_us / 1e6, P.swap_success)
    best_enum = catalan_latency_over_path(path, link_lat, classical_s,
                                          P.swap_op_us / 1e6, P.swap_success)
    assert best_dp == pytest.approx(best_enum, rel=1e-15)
    tree = optimal_tree_over_path(path, g, P, rates)
    est = estimate_tree(tree, P, lambda s: rates[s], g.classical_latency_us)
    assert est.latency_s == pytest.approx(best_dp, rel=1e-12)


def test_interval_recurrence_balanced_on_uniform_line():
    g = line_graph(5)
    rates = link_rate_map(g, P)
    tree = optimal_tree_over_path([0, 1, 2, 3, 4], g, P, rates)
    assert isinstance(tree, Swap) and tree.at == 2
    assert tree.left.span == (0, 2) and tree.right.span == (2, 4)


def test_interval_recurrence_uses_cached_superlink():
    g = line_graph(5)
    rates = link_rate_map(g, P)
    tree = optimal_tree_over_path([0, 1, 2, 3, 4], g, P, rates,
                                  cached_spans=[(0, 3)])
    est = estimate_tree(tree, P, lambda s: rates[s], g.classical_latency_us)
    plain = estimate_tree(optimal_tree_over_path([0, 1, 2, 3, 4], g, P, rates),
                          P, lambda s: rates[s], g.classical_latency_us)
    assert est.cached_spans == [(0, 3)]
    assert est.latency_s < plain.latency_s


@pytest.mark.parametrize("seed", range(8))
def test_label_search_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 11))
    g = generate_topology(n, 60.0, 0.35, seed=seed + 100)
    rates = link_rate_map(g, P)
    ids = [node.id for node in g.nodes]
    checked = 0
    for _ in range(10):
        src, dst = rng.choice(ids, size=2, replace=False)
        src, dst = int(src), int(dst)
        tree = optimal_tree(g, src, dst, P, link_rates=rates,
                            max_hops=6, max_labels=None)
        est = estimate_tree(tree, P, lambda s: rates[s],
                            g.classical_latency_us)
        want = brute_force_best_latency(g, P, src, dst, max_hops=6)
        assert est.latency_s == pytest.approx(want, abs=1e-9)
        checked += 1
        if checked >= 3:
            break


def test_label_search_detour_beats_direct_when_middle_slot_starved():
    g = line_graph(3)
    # a 2-hop plan needs two slots at node 1; deny them
    slots = {0: 5, 1: 1, 2: 5}
    with pytest.raises(NoFeasiblePath):
        optimal_tree(g, 0, 2, P, free_slots=lambda n: slots[n])


def test_label_search_no_path():
    nodes = [Node(0, 0.0, 0.0), Node(1, 10.0, 0.0), Node(2, 30.0, 0.0)]
    g = NetworkGraph(nodes, [Link(0, 1, 10.0)], side_km=40.0)
    with pytest.raises(NoFeasiblePath):
        optimal_tree(g, 0, 2, P)


def test_augmentation_round_robin_depth_first():
    params = P.with_updates(link_fidelity=0.9)
    g = line_graph(3)
    rates = link_rate_map(g, params)
    base = optimal_tree_over_path([0, 1, 2], g, params, rates)
    out = augment_with_purification(base, 0.88, params, lambda s: rates[s],
                                    g.classical_latency_us)
    # one pumping round at each leaf is not enough; the root needs one too
    assert isinstance(out, Purify) and out.rounds == 1
    assert isinstance(out.child, Swap)
    assert isinstance(out.child.left, Purify) and out.child.left.rounds == 1
    assert isinstance(out.child.right, Purify) and out.child.right.rounds == 1
    est = estimate_tree(out, params, lambda s: rates[s],
                        g.classical_latency_us)
    assert est.fidelity >= 0.88
    assert est.fidelity == pytest.approx(0.8929, abs=2e-3)
    assert est.purify_rounds == {(0, 1): 1, (1, 2): 1, (0, 2): 1}

    # the partial pass stops short: leaves alone stall near 0.860
    partial = Swap(1, Purify(Leaf(0, 1), 1, 0, 1), Purify(Leaf(1, 2), 1, 1, 2),
                   0, 2)
    est_p = estimate_tree(partial, params, lambda s: rates[s],
                          g.classical_latency_us)
    assert est_p.fidelity == pytest.approx(0.860, abs=2e-3)
    assert est_p.fidelity < 0.88


def test_augmentation_skips_when_already_sufficient():
    g = line_graph(3)
    rates = link_rate_map(g, P)
    base = optimal_tree_over_path([0, 1, 2], g, P, rates)
    out = augment_with_purification(base, 0.9, P, lambda s: rates[s],
                                    g.classical_latency_us)
    assert out is base


def test_augmentation_raises_when_saturated():
    params = P.with_updates(link_fidelity=0.9)
    g = line_graph(3)
    rates = link_rate_map(g, params)
    base = optimal_tree_over_path([0, 1, 2], g, params, rates)
    with pytest.raises(InfeasibleFidelity):
        augment_with_purification(base, 0.999, params, lambda s: rates[s],
                                  g.classical_latency_us)


def test_purification_raises_latency():
    params = P.with_updates(link_fidelity=0.9)
    g = line_graph(3)
    rates = link_rate_map(g, params)
    base = optimal_tree_over_path([0, 1, 2], g, params, rates)
    augmented = augment_with_purification(base, 0.88, params,
                                          lambda s: rates[s],
                                          g.classical_latency_us)
    est_b = estimate_tree(base, params, lambda s: rates[s],
                          g.classical_latency_us)
    est_a = estimate_tree(augmented, params, lambda s: rates[s],
                          g.classical_latency_us)
    assert est_a.latency_s > 2.0 * est_b.latency_s


def test_plan_for_request_end_to_end():
    g = line_graph(4)
    plan = plan_for_request(g, 0, 3, P, request_id="req-7")
    assert plan.route == (0, 1, 2, 3)
    assert plan.request_id == "req-7"
    assert plan.leaf_spans == ((0, 1), (1, 2), (2, 3))
    assert plan.l_target_s == pytest.approx(2.0 * plan.root_latency_s)
    stations = [s for s, _, _, _ in plan.prescribed_swaps()]
    assert sorted(stations) == [1, 2]
    out_spans = [o for _, _, _, o in plan.prescribed_swaps()]
    assert out_spans[-1] == (0, 3)  # root swap reported last


def test_plan_for_request_routes_around_congested_node():
    nodes = [Node(0, 0.0, 0.0), Node(1, 10.0, 5.0), Node(2, 10.0, -5.0),
             Node(3, 20.0, 0.0)]
    links = [Link(0, 1, 11.18), Link(0, 2, 11.18), Link(1, 3, 11.18),
             Link(2, 3, 11.18)]
    g = NetworkGraph(nodes, links, side_km=25.0)
    ledger = ResourceLedger(g)
    first = plan_for_request(g, 0, 3, P, ledger=ledger, request_id="a")
    assert first.route == (0, 1, 3)
    # starve node 1 below the two slots an internal station needs
    while ledger.free_slots(1) >= 2:
        ledger._free[1] -= 1
    second = plan_for_request(g, 0, 3, P, ledger=ledger, request_id="b")
    assert second.route == (0, 2, 3)


def test_plan_for_request_endpoint_out_of_slots():
    g = line_graph(3)
    ledger = ResourceLedger(g)
    ledger._free[0] = 0
    with pytest.raises(NoFeasiblePath):
        plan_for_request(g, 0, 2, P, ledger=ledger)


def test_ledger_claims_and_releases():
    g = line_graph(4)
    ledger = ResourceLedger(g)
    plan = plan_for_request(g, 0, 3, P, ledger=ledger)
    assert ledger.free_slots(0) == 4
    assert ledger.free_slots(1) == 3
    assert ledger.links_taken == {(0, 1), (1, 2), (2, 3)}
    ledger.release_plan(plan)
    assert ledger.free_slots(1) == 5
    assert ledger.links_taken == set()


def test_plan_uses_claimable_stock():
    g = line_graph(4)
    plan = plan_for_request(g, 0, 3, P, cached_stock={(0, 2): 3})
    assert (0, 2) in plan.cached_spans
    plain = plan_for_request(g, 0, 3, P)
    assert plan.root_latency_s < plain.root_latency_s


def test_exhausted_stock_is_ignored():
    g = line_graph(4)
    ledger = ResourceLedger(g)
    ledger.cached_claims[(0, 2)] = 3
    plan = plan_for_request(g, 0, 3, P, ledger=ledger,
                            cached_stock={(0, 2): 3})
    assert plan.cached_spans == ()


def test_superlink_selection_greedy_matches_exhaustive_first_pick():
    g = line_graph(6)
    rates = link_rate_map(g, P)
    routes = [[0, 1, 2, 3, 4, 5], [1, 2, 3, 4]]
    candidates = set()
    for route in routes:
        for i in range(len(route)):
            for j in range(i + 2, len(route)):
                candidates.add(tuple(sorted((route[i], route[j]))))
    gains = {pair: superlink_gain(pair, routes, g, P, rates)
             for pair in sorted(candidates)}
    best_pair = max(sorted(gains), key=lambda p: gains[p])
    picks = select_superlinks(routes, 3, g, P, link_rates=rates)
    assert picks[0] == best_pair
    assert len(picks) <= 3
    assert len(set(picks)) == len(picks)


def test_superlink_gain_off_route_pair_never_wins():
    g = line_graph(6)
    rates = link_rate_map(g, P)
    routes = [[0, 1, 2, 3]]
    assert superlink_gain((4, 5), routes, g, P, rates) <= 0.0


def test_superlink_selection_stops_when_nothing_helps():
    g = line_graph(3)
    rates = link_rate_map(g, P)
    picks = select_superlinks([[0, 1]], 4, g, P, link_rates=rates)
    assert picks == []
