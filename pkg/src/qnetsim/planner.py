"""Route and swap-schedule planning.

A delivered end-to-end pair is produced by a binary schedule tree: leaves
generate elementary link pairs (or draw on predistributed stock), internal
nodes fuse their two child pairs with an entanglement swap, and any node may
be wrapped in pumping-style purification rounds. The planner estimates each
tree's production latency and output fidelity with closed-form rate algebra,
then searches for the latency-optimal tree.

Two searches are provided. ``optimal_tree`` runs a label-setting search over
node pairs and is exact when ``max_labels`` is None; it is the reference
search for small graphs. ``plan_for_request`` is the runtime entry point: it
picks a shortest route, runs an interval dynamic program over that route
(``optimal_tree_over_path``), and augments with purification to meet a
fidelity floor. Both share the same estimator, so their outputs are
comparable.
"""
from __future__ import annotations

import heapq
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Union

from .params import SimParams, US_PER_S
from .topology import NetworkGraph, link_budget
from .werner import (
    fidelity_to_weight,
    weight_to_fidelity,
    purify_success_probability,
    purify_output_fidelity,
)
import math


class NoFeasiblePath(Exception):
    """No schedule tree connects the requested endpoints."""


class InfeasibleFidelity(Exception):
    """Purification cannot lift the tree to the requested fidelity."""


# Latency charged to a leaf that draws on already-banked stock instead of
# generating a fresh pair.
PSEUDO_LEAF_LATENCY_S = 1e-6
MAX_PURIFY_ROUNDS = 3

Span = tuple[int, int]


def _span(u: int, v: int) -> Span:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True, slots=True)
class Leaf:
    """Elementary pair generation across one link (or cached stock draw)."""

    u: int
    v: int
    cached: bool = False

    @property
    def span(self) -> Span:
        return _span(self.u, self.v)


@dataclass(frozen=True, slots=True)
class Swap:
    """Fuse the child pairs meeting at ``at`` into one spanning (u, v)."""

    at: int
    left: "TreeNode"
    right: "TreeNode"
    u: int
    v: int

    @property
    def span(self) -> Span:
        return _span(self.u, self.v)


@dataclass(frozen=True, slots=True)
class Purify:
    """Pump the child's output with ``rounds`` fresh copies of itself."""

    child: "TreeNode"
    rounds: int
    u: int
    v: int

    @property
    def span(self) -> Span:
        return _span(self.u, self.v)


TreeNode = Union[Leaf, Swap, Purify]


def swap_latency(left_s: float, right_s: float, op_s: float,
                 classical_s: float, success_p: float) -> float:
    """Expected time to produce one fused pair from two child processes.

    The slower child dominates; the faster one restarts while waiting, so the
    expected joint arrival is 1.5x the slower child's period. The operation
    and the correction notification to the far endpoint are paid per attempt,
    and the whole attempt repeats on swap failure.
    """
    return (1.5 * max(left_s, right_s) + op_s + classical_s) / success_p


def link_rate_map(graph: NetworkGraph, params: SimParams) -> dict[Span, float]:
    """Expected heralded pairs per second for every link in the graph."""
    return {
        _span(link.a, link.b): link_budget(link, params).expected_rate
        for link in graph.links
    }


@dataclass
class TreeEstimate:
    """Per-node production rates plus root latency and fidelity."""

    latency_s: float
    weight: float
    node_rates: dict[Span, float] = field(default_factory=dict)
    depths: dict[Span, int] = field(default_factory=dict)
    leaf_spans: list[Span] = field(default_factory=list)
    cached_spans: list[Span] = field(default_factory=list)
    purify_rounds: dict[Span, int] = field(default_factory=dict)

    @property
    def fidelity(self) -> float:
        return weight_to_fidelity(self.weight)


def estimate_tree(tree: TreeNode, params: SimParams,
                  link_rate: Callable[[Span], float],
                  classical_us: Callable[[int, int], int]) -> TreeEstimate:
    """Walk the tree bottom-up, accumulating latency and Werner weight."""
    est = TreeEstimate(latency_s=0.0, weight=0.0)
    op_s = params.swap_op_us / US_PER_S
    depolar = params.noise.depolar_rate

    def walk(node: TreeNode, depth: int) -> tuple[float, float]:
        span = node.span
        if isinstance(node, Leaf):
            lat = PSEUDO_LEAF_LATENCY_S if node.cached else 1.0 / link_rate(span)
            w = fidelity_to_weight(params.link_fidelity)
            (est.cached_spans if node.cached else est.leaf_spans).append(span)
        elif isinstance(node, Swap):
            lat_l, w_l = walk(node.left, depth + 1)
            lat_r, w_r = walk(node.right, depth + 1)
            ct_s = classical_us(node.u, node.v) / US_PER_S
            lat = swap_latency(lat_l, lat_r, op_s, ct_s, params.swap_success)
            # the earlier child pair idles for about half the slower period
            wait_s = 0.5 * max(lat_l, lat_r)
            w = w_l * w_r * math.exp(-2.0 * depolar * wait_s)
        else:  # Purify: transparent for depth, same span as its child
            lat_c, w_c = walk(node.child, depth)
            f_base = weight_to_fidelity(w_c)
            f = f_base
            joint_p = 1.0
            for _ in range(node.rounds):
                p = purify_success_probability(f, f_base)
                f = purify_output_fidelity(f, f_base)
                joint_p *= p
            lat = lat_c * (node.rounds + 1) / joint_p
            w = fidelity_to_weight(f)
            est.purify_rounds[span] = node.rounds
        est.node_rates[span] = 1.0 / lat
        prev = est.depths.get(span)
        est.depths[span] = depth if prev is None else min(prev, depth)
        return lat, w

    est.latency_s, est.weight = walk(tree, 0)
    return est


# ---------------------------------------------------------------------------
# exact label-setting search over node pairs


@dataclass(frozen=True, slots=True)
class _Label:
    latency: float
    u: int
    v: int
    nodes: frozenset
    tree: TreeNode
    hops: int


def optimal_tree(graph: NetworkGraph, src: int, dst: int, params: SimParams,
                 *,
                 link_rates: Optional[Mapping[Span, float]] = None,
                 cached_spans: Iterable[Span] = (),
                 free_slots: Optional[Callable[[int], int]] = None,
                 exclude_links: Iterable[Span] = (),
                 max_hops: Optional[int] = None,
                 max_labels: Optional[int] = 8) -> TreeNode:
    """Latency-optimal schedule tree between ``src`` and ``dst``.

    Labels are partial trees keyed by their endpoint pair. A settled label
    combines with previously settled labels sharing exactly one endpoint,
    which keeps every candidate route simple. A label is dominated when a
    settled label of the same pair is no slower and uses a subset of its
    nodes; dominated labels are discarded. With ``max_labels`` None the
    dominance rule is the only pruning and the search is exact; a finite cap
    bounds work on large graphs at the cost of optimality.
    """
    if src == dst:
        raise NoFeasiblePath(f"endpoints coincide: {src}")
    rates = dict(link_rates) if link_rates is not None else link_rate_map(graph, params)
    banned = {_span(*s) for s in exclude_links}
    target = _span(src, dst)
    op_s = params.swap_op_us / US_PER_S

    seq = itertools.count()
    heap: list[tuple[float, int, _Label]] = []

    def push(lab: _Label) -> None:
        heapq.heappush(heap, (lab.latency, next(seq), lab))

    for link in sorted(graph.links, key=lambda l: (l.a, l.b)):
        span = _span(link.a, link.b)
        if span in banned:
            continue
        if free_slots is not None and (free_slots(link.a) < 1 or free_slots(link.b) < 1):
            continue
        lat = 1.0 / rates[span]
        push(_Label(lat, link.a, link.b, frozenset(span), Leaf(link.a, link.b), 1))
    for span in sorted({_span(*s) for s in cached_spans}):
        a, b = span
        if free_slots is not None and (free_slots(a) < 1 or free_slots(b) < 1):
            continue
        push(_Label(PSEUDO_LEAF_LATENCY_S, a, b,
                    frozenset(span), Leaf(a, b, cached=True), 1))

    settled: dict[Span, list[_Label]] = {}
    at: dict[int, list[_Label]] = {}

    while heap:
        _, _, lab = heapq.heappop(heap)
        pair = _span(lab.u, lab.v)
        bucket = settled.setdefault(pair, [])
        if max_labels is not None and len(bucket) >= max_labels:
            continue
        if any(d.latency <= lab.latency and d.nodes <= lab.nodes for d in bucket):
            continue
        bucket.append(lab)
        if pair == target:
            return lab.tree
        at.setdefault(lab.u, []).append(lab)
        at.setdefault(lab.v, []).append(lab)
        for mid, far in ((lab.u, lab.v), (lab.v, lab.u)):
            if free_slots is not None and free_slots(mid) < 2:
                continue
            for other in at.get(mid, ()):
                if other is lab:
                    continue
                if lab.nodes & other.nodes != {mid}:
                    continue
                if max_hops is not None and lab.hops + other.hops > max_hops:
                    continue
                o_far = other.u if other.v == mid else other.v
                a, b = _span(far, o_far)
                left, right = ((lab.tree, other.tree) if far == a
                               else (other.tree, lab.tree))
                ct_s = graph.classical_latency_us(a, b) / US_PER_S
                lat = swap_latency(lab.latency, other.latency, op_s, ct_s,
                                   params.swap_success)
                push(_Label(lat, a, b, lab.nodes | other.nodes,
                            Swap(mid, left, right, a, b),
                            lab.hops + other.hops))
    raise NoFeasiblePath(f"no schedule tree connects {src} and {dst}")


# ---------------------------------------------------------------------------
# interval dynamic program over a fixed route


def optimal_tree_over_path(path: list[int], graph: NetworkGraph,
                           params: SimParams,
                           link_rates: Mapping[Span, float],
                           cached_spans: Iterable[Span] = ()) -> TreeNode:
    """Latency-optimal tree whose leaves follow the given route.

    Classic interval recurrence: the best tree over path[i..j] is the best
    split point m fusing the best subtrees over path[i..m] and path[m..j].
    A cached span between two route positions seeds its interval as a
    pseudo-leaf, which is how predistributed stock shortcuts a segment.
    """
    k = len(path) - 1
    if k < 1:
        raise NoFeasiblePath("route must span at least one link")
    cached = {_span(*s) for s in cached_spans}
    op_s = params.swap_op_us / US_PER_S

    INF = math.inf
    lat: list[list[float]] = [[INF] * (k + 1) for _ in range(k + 1)]
    tree: list[list[Optional[TreeNode]]] = [[None] * (k + 1) for _ in range(k + 1)]

    for i in range(k):
        u, v = path[i], path[i + 1]
        span = _span(u, v)
        if span in cached:
            lat[i][i + 1] = PSEUDO_LEAF_LATENCY_S
            tree[i][i + 1] = Leaf(u, v, cached=True)
        else:
            if span not in link_rates:
                raise NoFeasiblePath(f"no link between {u} and {v}")
            lat[i][i + 1] = 1.0 / link_rates[span]
            tree[i][i + 1] = Leaf(u, v)

    for length in range(2, k + 1):
        for i in range(0, k - length + 1):
            j = i + length
            u, v = path[i], path[j]
            span = _span(u, v)
            if span in cached:
                lat[i][j] = PSEUDO_LEAF_LATENCY_S
                tree[i][j] = Leaf(u, v, cached=True)
                continue
            ct_s = graph.classical_latency_us(u, v) / US_PER_S
            for m in range(i + 1, j):
                cand = swap_latency(lat[i][m], lat[m][j], op_s, ct_s,
                                    params.swap_success)
                if cand < lat[i][j]:
                    lat[i][j] = cand
                    tree[i][j] = Swap(path[m], tree[i][m], tree[m][j], u, v)

    result = tree[0][k]
    if result is None:
        raise NoFeasiblePath("interval recurrence produced no tree")
    return result


# ---------------------------------------------------------------------------
# purification augmentation


def _addresses(tree: TreeNode) -> list[tuple[int, tuple[int, ...]]]:
    """(depth, address) of every structural node, purification-transparent."""
    out: list[tuple[int, tuple[int, ...]]] = []

    def walk(node: TreeNode, depth: int, addr: tuple[int, ...]) -> None:
        if isinstance(node, Purify):
            walk(node.child, depth, addr)
            return
        out.append((depth, addr))
        if isinstance(node, Swap):
            walk(node.left, depth + 1, addr + (0,))
            walk(node.right, depth + 1, addr + (1,))

    walk(tree, 0, ())
    return out


def _with_rounds(tree: TreeNode, rounds: Mapping[tuple[int, ...], int],
                 addr: tuple[int, ...] = ()) -> TreeNode:
    if isinstance(tree, Purify):
        return _with_rounds(tree.child, rounds, addr)
    if isinstance(tree, Swap):
        rebuilt: TreeNode = Swap(tree.at,
                                 _with_rounds(tree.left, rounds, addr + (0,)),
                                 _with_rounds(tree.right, rounds, addr + (1,)),
                                 tree.u, tree.v)
    else:
        rebuilt = tree
    r = rounds.get(addr, 0)
    if r > 0:
        rebuilt = Purify(rebuilt, r, tree.u, tree.v)
    return rebuilt


def augment_with_purification(tree: TreeNode, min_fidelity: float,
                              params: SimParams,
                              link_rate: Callable[[Span], float],
                              classical_us: Callable[[int, int], int],
                              max_rounds: int = MAX_PURIFY_ROUNDS) -> TreeNode:
    """Add pumping rounds until the estimated root fidelity clears the floor.

    Greedy round-robin over tree positions, deepest first: each step adds one
    round at the next position and re-estimates. Cleaning up close to the
    leaves is cheap (low-latency copies) and compounds through every swap
    above, so the deep positions get their rounds first.
    """
    est = estimate_tree(tree, params, link_rate, classical_us)
    if est.fidelity >= min_fidelity:
        return tree
    positions = sorted(_addresses(tree), key=lambda da: (-da[0], da[1]))
    rounds: dict[tuple[int, ...], int] = {}
    while True:
        progressed = False
        for _, addr in positions:
            if rounds.get(addr, 0) >= max_rounds:
                continue
            rounds[addr] = rounds.get(addr, 0) + 1
            progressed = True
            rebuilt = _with_rounds(tree, rounds)
            est = estimate_tree(rebuilt, params, link_rate, classical_us)
            if est.fidelity >= min_fidelity:
                return rebuilt
        if not progressed:
            raise InfeasibleFidelity(
                f"fidelity {est.fidelity:.4f} below floor {min_fidelity:.4f} "
                f"with {max_rounds} rounds everywhere")


# ---------------------------------------------------------------------------
# plans, admission ledger, batch planning


@dataclass(frozen=True)
class Plan:
    """Committed schedule for one request."""

    request_id: str
    src: int
    dst: int
    route: tuple[int, ...]
    tree: TreeNode
    node_rates: dict[Span, float]
    depths: dict[Span, int]
    leaf_spans: tuple[Span, ...]
    cached_spans: tuple[Span, ...]
    purify_rounds: dict[Span, int]
    root_latency_s: float
    root_fidelity: float
    l_target_s: float

    @property
    def span(self) -> Span:
        return _span(self.src, self.dst)

    def prescribed_swaps(self) -> list[tuple[int, Span, Span, Span]]:
        """(station, left child span, right child span, output span) triples."""
        out: list[tuple[int, Span, Span, Span]] = []

        def walk(node: TreeNode) -> None:
            if isinstance(node, Purify):
                walk(node.child)
            elif isinstance(node, Swap):
                walk(node.left)
                walk(node.right)
                out.append((node.at, node.left.span, node.right.span, node.span))

        walk(self.tree)
        return out


def tree_to_dict(node: TreeNode) -> dict:
    """JSON-ready form of a schedule tree."""
    if isinstance(node, Leaf):
        return {"op": "generate", "u": node.u, "v": node.v,
                "cached": node.cached}
    if isinstance(node, Purify):
        return {"op": "purify", "u": node.u, "v": node.v,
                "rounds": node.rounds, "child": tree_to_dict(node.child)}
    return {"op": "swap", "at": node.at, "u": node.u, "v": node.v,
            "left": tree_to_dict(node.left), "right": tree_to_dict(node.right)}


def plan_to_dict(plan: Plan) -> dict:
    """JSON-ready form of a committed plan."""
    return {
        "request_id": plan.request_id,
        "src": plan.src,
        "dst": plan.dst,
        "route": list(plan.route),
        "tree": tree_to_dict(plan.tree),
        "node_rates": {f"{a}-{b}": r
                       for (a, b), r in sorted(plan.node_rates.items())},
        "leaf_spans": [list(s) for s in plan.leaf_spans],
        "cached_spans": [list(s) for s in plan.cached_spans],
        "purify_rounds": {f"{a}-{b}": n
                          for (a, b), n in sorted(plan.purify_rounds.items())},
        "root_latency_s": plan.root_latency_s,
        "root_fidelity": plan.root_fidelity,
        "l_target_s": plan.l_target_s,
    }


class ResourceLedger:
    """Admission bookkeeping shared by the plans of one batch.

    Each committed plan reserves one memory slot per leaf endpoint, marks its
    generating links as taken, and pins the stock it draws on. The ledger is
    a planning-time admission guard, not a runtime allocator.
    """

    def __init__(self, graph: NetworkGraph):
        self._free = {node.id: node.memory_slots for node in graph.nodes}
        self.links_taken: set[Span] = set()
        self.cached_claims: Counter = Counter()

    def free_slots(self, node: int) -> int:
        return self._free[node]

    def claim_plan(self, plan: Plan) -> None:
        for span in plan.leaf_spans:
            self._free[span[0]] -= 1
            self._free[span[1]] -= 1
            self.links_taken.add(span)
        for span in plan.cached_spans:
            self._free[span[0]] -= 1
            self._free[span[1]] -= 1
            self.cached_claims[span] += 1

    def release_plan(self, plan: Plan) -> None:
        for span in plan.leaf_spans:
            self._free[span[0]] += 1
            self._free[span[1]] += 1
            self.links_taken.discard(span)
        for span in plan.cached_spans:
            self._free[span[0]] += 1
            self._free[span[1]] += 1
            self.cached_claims[span] -= 1
            if self.cached_claims[span] <= 0:
                del self.cached_claims[span]


def _bfs_route(graph: NetworkGraph, src: int, dst: int,
               banned_nodes: frozenset = frozenset(),
               banned_links: Iterable[Span] = ()) -> Optional[list[int]]:
    """Shortest hop route avoiding the bans; lowest-id parents break ties."""
    if src == dst:
        return [src]
    banned_l = {_span(*s) for s in banned_links}
    parent: dict[int, int] = {src: -1}
    frontier = [src]
    while frontier:
        nxt: list[int] = []
        for u in sorted(frontier):
            for v in graph.neighbors(u):
                if v in parent or v in banned_nodes:
                    continue
                if _span(u, v) in banned_l:
                    continue
                parent[v] = u
                if v == dst:
                    route = [dst]
                    while route[-1] != src:
                        route.append(parent[route[-1]])
                    route.reverse()
                    return route
                nxt.append(v)
        frontier = nxt
    return None


def _route_slot_feasible(route: list[int], ledger: ResourceLedger) -> Optional[int]:
    """First route node lacking slots (2 internal, 1 endpoint), else None."""
    for pos, node in enumerate(route):
        need = 1 if pos in (0, len(route) - 1) else 2
        if ledger.free_slots(node) < need:
            return node
    return None


def plan_for_request(graph: NetworkGraph, src: int, dst: int,
                     params: SimParams, *,
                     request_id: str = "",
                     ledger: Optional[ResourceLedger] = None,
                     link_rates: Optional[Mapping[Span, float]] = None,
                     cached_stock: Optional[Mapping[Span, int]] = None,
                     min_fidelity: Optional[float] = None,
                     exclude_links: Iterable[Span] = (),
                     route_retries: int = 3) -> Plan:
    """Plan one request: route, schedule tree, purification, admission.

    If the shortest route fails the ledger's slot check, replanning retries
    with the congested node banned, a few times, before giving up.
    """
    if link_rates is None:
        link_rates = link_rate_map(graph, params)
    stock = dict(cached_stock) if cached_stock else {}
    if ledger is not None:
        for span, n in ledger.cached_claims.items():
            if span in stock:
                stock[span] = stock[span] - n
    excl = {_span(*s) for s in exclude_links}

    banned_nodes: set[int] = set()
    route: Optional[list[int]] = None
    for _ in range(route_retries):
        cand = _bfs_route(graph, src, dst, frozenset(banned_nodes), excl)
        if cand is None:
            break
        if ledger is not None:
            congested = _route_slot_feasible(cand, ledger)
            if congested is not None and congested not in (src, dst):
                banned_nodes.add(congested)
                continue
            if congested is not None:
                raise NoFeasiblePath(
                    f"endpoint {congested} has no free memory slot")
        route = cand
        break
    if route is None:
        raise NoFeasiblePath(f"no admissible route from {src} to {dst}")

    positions = {node: i for i, node in enumerate(route)}
    route_cached = []
    for span, n in stock.items():
        if n <= 0:
            continue
        a, b = span
        if a in positions and b in positions and abs(positions[a] - positions[b]) >= 1:
            route_cached.append(span)

    tree = optimal_tree_over_path(route, graph, params, link_rates, route_cached)
    if min_fidelity is not None:
        tree = augment_with_purification(
            tree, min_fidelity, params,
            lambda s: link_rates[s], graph.classical_latency_us)
    est = estimate_tree(tree, params, lambda s: link_rates[s],
                        graph.classical_latency_us)

    plan = Plan(
        request_id=request_id,
        src=src, dst=dst,
        route=tuple(route),
        tree=tree,
        node_rates=dict(est.node_rates),
        depths=dict(est.depths),
        leaf_spans=tuple(est.leaf_spans),
        cached_spans=tuple(est.cached_spans),
        purify_rounds=dict(est.purify_rounds),
        root_latency_s=est.latency_s,
        root_fidelity=est.fidelity,
        l_target_s=2.0 * est.latency_s,
    )
    if ledger is not None:
        ledger.claim_plan(plan)
    return plan


def plan_batch(graph: NetworkGraph, pairs: list[tuple[int, int]],
               params: SimParams, *,
               link_rates: Optional[Mapping[Span, float]] = None,
               cached_stock: Optional[Mapping[Span, int]] = None,
               min_fidelity: Optional[float] = None) -> list[Plan]:
    """Plan several requests against one shared admission ledger."""
    if link_rates is None:
        link_rates = link_rate_map(graph, params)
    ledger = ResourceLedger(graph)
    plans = []
    for i, (src, dst) in enumerate(pairs):
        plans.append(plan_for_request(
            graph, src, dst, params,
            request_id=f"req-{i}",
            ledger=ledger, link_rates=link_rates,
            cached_stock=cached_stock, min_fidelity=min_fidelity))
    return plans


# ---------------------------------------------------------------------------
# superlink selection for predistribution


def _route_latency(route: list[int], graph: NetworkGraph, params: SimParams,
                   link_rates: Mapping[Span, float],
                   cached: Iterable[Span]) -> float:
    tree = optimal_tree_over_path(route, graph, params, link_rates, cached)
    est = estimate_tree(tree, params, lambda s: link_rates[s],
                        graph.classical_latency_us)
    return est.latency_s


def superlink_gain(pair: Span, routes: list[list[int]], graph: NetworkGraph,
                   params: SimParams, link_rates: Mapping[Span, float],
                   picked: Iterable[Span] = ()) -> float:
    """Net latency gain of stocking ``pair``: route savings minus build cost.

    Savings sum over every route on which both endpoints lie; the build cost
    is the latency of producing one stock pair over the subpath between them.
    Off-route pairs score zero minus their build cost and never win.
    """
    picked_set = set(picked)
    saving = 0.0
    cost = 0.0
    first_subpath: Optional[list[int]] = None
    for route in routes:
        positions = {n: i for i, n in enumerate(route)}
        a, b = pair
        if a not in positions or b not in positions:
            continue
        i, j = sorted((positions[a], positions[b]))
        if j - i < 2:
            continue
        base = _route_latency(route, graph, params, link_rates, picked_set)
        with_pair = _route_latency(route, graph, params, link_rates,
                                   picked_set | {pair})
        saving += base - with_pair
        if first_subpath is None:
            first_subpath = route[i:j + 1]
    if first_subpath is not None:
        cost = _route_latency(first_subpath, graph, params, link_rates,
                              picked_set)
    return saving - cost


def select_superlinks(routes: list[list[int]], count: int,
                      graph: NetworkGraph, params: SimParams,
                      link_rates: Optional[Mapping[Span, float]] = None
                      ) -> list[Span]:
    """Greedy pick of node pairs worth stocking ahead of demand.

    Candidates are same-route pairs spanning at least two hops. Each round
    picks the pair with the best net gain given the picks so far, stopping
    early when no candidate still helps.
    """
    if link_rates is None:
        link_rates = link_rate_map(graph, params)
    candidates: set[Span] = set()
    for route in routes:
        for i in range(len(route)):
            for j in range(i + 2, len(route)):
                candidates.add(_span(route[i], route[j]))
    picked: list[Span] = []
    while len(picked) < count and candidates:
        best_pair: Optional[Span] = None
        best_gain = 0.0
        for pair in sorted(candidates):
            gain = superlink_gain(pair, routes, graph, params, link_rates,
                                  picked)
            if gain > best_gain:
                best_gain = gain
                best_pair = pair
        if best_pair is None:
            break
        picked.append(best_pair)
        candidates.discard(best_pair)
    return picked
