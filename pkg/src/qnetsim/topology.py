"""Random geometric topologies and link budgets.

Nodes are dropped uniformly in a square; links are drawn with probability
beta * exp(-d / (alpha * d_max)), the usual distance-biased random-graph
recipe. alpha is fixed; beta is solved by bisection so the expected edge count
matches the requested density, then the draw is retried until the realized
graph is connected and within tolerance of that density.
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .params import SimParams, US_PER_S

WAXMAN_ALPHA = 0.4
DENSITY_TOLERANCE = 0.10


class DensityUnreachable(Exception):
    pass


class UnknownNode(Exception):
    pass


@dataclass(frozen=True, slots=True)
class Node:
    id: int
    x: float
    y: float
    memory_slots: int = 5


@dataclass(frozen=True, slots=True)
class Link:
    a: int  # lower endpoint id
    b: int
    length_km: float


@dataclass(frozen=True, slots=True)
class LinkBudget:
    """Per-attempt success chain for heralded pair generation on one link."""
    p_transmit: float
    p_success: float
    attempt_period_us: int
    expected_rate: float  # pairs per second


def transmittance(length_km: float, attenuation_km: float) -> float:
    # photons travel half the span each to the midpoint station
    return math.exp(-length_km / (2.0 * attenuation_km))


def link_budget(link: Link, params: SimParams) -> LinkBudget:
    p_t = transmittance(link.length_km, params.attenuation_km)
    p = (params.photon_success ** 2) * p_t * params.herald_success
    rate = p * US_PER_S / params.attempt_period_us
    return LinkBudget(p_t, p, params.attempt_period_us, rate)


class NetworkGraph:
    """Immutable node/link structure with derived classical latencies."""

    def __init__(self, nodes: list[Node], links: list[Link], side_km: float,
                 classical_speed_km_s: float = 2.0e5):
        self.nodes = list(nodes)
        self.links = list(links)
        self.side_km = side_km
        self._by_id = {n.id: n for n in self.nodes}
        self._adj: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        self._link_by_pair: dict[tuple[int, int], Link] = {}
        for lk in self.links:
            self._adj[lk.a].append(lk.b)
            self._adj[lk.b].append(lk.a)
            self._link_by_pair[(lk.a, lk.b)] = lk
        for nid in self._adj:
            self._adj[nid].sort()
        self._latency_cache: dict[tuple[int, int], int] = {}
        self._speed_km_s = classical_speed_km_s

    @property
    def classical_speed_km_s(self) -> float:
        return self._speed_km_s

    # -- structure ----------------------------------------------------------

    def node(self, nid: int) -> Node:
        try:
            return self._by_id[nid]
        except KeyError:
            raise UnknownNode(nid) from None

    def neighbors(self, nid: int) -> list[int]:
        if nid not in self._adj:
            raise UnknownNode(nid)
        return self._adj[nid]

    def link_between(self, u: int, v: int) -> Optional[Link]:
        return self._link_by_pair.get((min(u, v), max(u, v)))

    def distance_km(self, u: int, v: int) -> float:
        nu, nv = self.node(u), self.node(v)
        return math.hypot(nu.x - nv.x, nu.y - nv.y)

    def classical_latency_us(self, u: int, v: int) -> int:
        """Signal propagation delay, floored at one microsecond."""
        if u == v:
            return 0
        key = (u, v) if u < v else (v, u)
        lat = self._latency_cache.get(key)
        if lat is None:
            lat = max(1, round(self.distance_km(u, v) / self._speed_km_s * US_PER_S))
            self._latency_cache[key] = lat
        return lat

    def hop_distances_from(self, src: int) -> dict[int, int]:
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in self._adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        return dist

    def shortest_path_hops(self, src: int, dst: int) -> Optional[list[int]]:
        """One BFS shortest path (lowest-id tie-break), or None if disconnected."""
        prev: dict[int, int] = {src: src}
        frontier = [src]
        while frontier and dst not in prev:
            nxt = []
            for u in frontier:
                for v in self._adj[u]:
                    if v not in prev:
                        prev[v] = u
                        nxt.append(v)
            frontier = nxt
        if dst not in prev:
            return None
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        path.reverse()
        return path

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        return len(self.hop_distances_from(self.nodes[0].id)) == len(self.nodes)

    def center_node(self) -> int:
        """Node closest to the centroid of all node positions (lowest id wins ties)."""
        cx = sum(n.x for n in self.nodes) / len(self.nodes)
        cy = sum(n.y for n in self.nodes) / len(self.nodes)
        best = min(self.nodes, key=lambda n: (math.hypot(n.x - cx, n.y - cy), n.id))
        return best.id

    @property
    def density(self) -> float:
        n = len(self.nodes)
        if n < 2:
            return 0.0
        return len(self.links) / (n * (n - 1) / 2)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "side_km": self.side_km,
            "nodes": [{"id": n.id, "x": n.x, "y": n.y,
                       "memory_slots": n.memory_slots} for n in self.nodes],
            "links": [{"a": l.a, "b": l.b, "length_km": l.length_km}
                      for l in self.links],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NetworkGraph":
        doc = json.loads(text)
        nodes = [Node(d["id"], d["x"], d["y"], d.get("memory_slots", 5))
                 for d in doc["nodes"]]
        links = [Link(d["a"], d["b"], d["length_km"]) for d in doc["links"]]
        return cls(nodes, links, doc.get("side_km", 0.0))


def _topology_rng(seed: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=(seed & 0xFFFFFFFFFFFF, 0,
                                         zlib.crc32(b"topology")))
    return np.random.Generator(np.random.PCG64(ss))


def generate_topology(node_count: int, side_km: float, density: float,
                      seed: int, memory_slots: int = 5,
                      max_tries: int = 100) -> NetworkGraph:
    """Connected random graph hitting the target edge density within 10%."""
    if node_count < 2:
        raise ValueError("need at least two nodes")
    rng = _topology_rng(seed)
    n_pairs = node_count * (node_count - 1) // 2
    target_edges = density * n_pairs
    iu, ju = np.triu_indices(node_count, k=1)

    for _ in range(max_tries):
        xs = rng.uniform(0.0, side_km, size=node_count)
        ys = rng.uniform(0.0, side_km, size=node_count)
        dx = xs[:, None] - xs[None, :]
        dy = ys[:, None] - ys[None, :]
        dmat = np.hypot(dx, dy)
        dists = dmat[iu, ju]
        d_max = float(dists.max())
        if d_max <= 0.0:
            continue
        base = np.exp(-dists / (WAXMAN_ALPHA * d_max))

        def expected_edges(beta: float) -> float:
            return float(np.minimum(1.0, beta * base).sum())

        lo, hi = 0.0, 1.0
        while expected_edges(hi) < target_edges and hi < 1e9:
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if expected_edges(mid) < target_edges:
                lo = mid
            else:
                hi = mid
        beta = hi  # expected_edges(beta) >= target

        probs = np.minimum(1.0, beta * base)
        drawn = rng.random(len(dists)) < probs
        links = [Link(int(iu[k]), int(ju[k]), float(dists[k]))
                 for k in np.nonzero(drawn)[0]]
        realized = len(links)
        if target_edges > 0 and abs(realized - target_edges) > DENSITY_TOLERANCE * target_edges:
            continue
        nodes = [Node(i, float(xs[i]), float(ys[i]), memory_slots)
                 for i in range(node_count)]
        graph = NetworkGraph(nodes, links, side_km)
        if graph.is_connected():
            return graph

    raise DensityUnreachable(
        f"no connected graph at density {density} for n={node_count} "
        f"after {max_tries} tries")
