"""Swap decisions: which two pairs a station fuses, and when pairs expire.

Candidates at a station are pairs of available entangled pairs meeting there
whose far endpoints sit on opposite sides of the station along the request's
route, so every executed swap makes forward progress. Policies order the
candidate list; the first entry is attempted. The scoring policy instead
prices each candidate (progress urgency, liability to the planned schedule,
memory relief) and acts only on positive value.

Expiry: a pair's useful life shrinks geometrically with its depth in the
plan tree, so low-level pairs that linger are recycled before they drag the
end-to-end fidelity down.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .params import PREDISTRIBUTED, SimParams, US_PER_S
from .planner import Plan
from .registry import AVAILABLE, EpRecord

Span = tuple[int, int]

# scoring policy constants
SCORE_ALPHA = 1.0    # weight of immediacy benefit
SCORE_GAMMA = -0.5   # weight of schedule liability
SCORE_DELTA = 0.2    # weight of memory relief
SCORE_BETA1 = 0.5    # relief per spare pair at the station
SCORE_BETA2 = 0.5    # relief per unit of memory occupancy
RETRY_TIMER_US = 100  # re-evaluate this long after a non-positive score

MIN_REMAINING_S = 1e-6

POLICY_NAMES = ("fixed_tree", "swap_asap", "oldest", "youngest",
                "longest_hop", "shortest_hop", "scoring", "connectionless")


@dataclass(frozen=True, slots=True)
class SwapCandidate:
    station: int
    left: EpRecord    # far endpoint earlier on the route
    right: EpRecord   # far endpoint later on the route
    out_span: Span
    hops_spanned: int

    @property
    def tie_break(self) -> tuple[int, int]:
        return (self.left.ep_id, self.right.ep_id)


def enumerate_candidates(records: Iterable[EpRecord], station: int,
                         route: Sequence[int], request_id: str
                         ) -> list[SwapCandidate]:
    """All forward-progress fusions available to ``station`` right now."""
    positions = {node: i for i, node in enumerate(route)}
    if station not in positions:
        return []
    pos_m = positions[station]
    earlier: list[tuple[int, EpRecord]] = []
    later: list[tuple[int, EpRecord]] = []
    for rec in records:
        if rec.status != AVAILABLE or rec.request_id != request_id:
            continue
        if station not in rec.endpoints:
            continue
        other = rec.other_end(station)
        pos = positions.get(other)
        if pos is None:
            continue
        if pos < pos_m:
            earlier.append((pos, rec))
        elif pos > pos_m:
            later.append((pos, rec))
    out = []
    for pos_i, left in sorted(earlier, key=lambda pr: (pr[0], pr[1].ep_id)):
        for pos_j, right in sorted(later, key=lambda pr: (pr[0], pr[1].ep_id)):
            i = route[pos_i]
            j = route[pos_j]
            span = (i, j) if i < j else (j, i)
            out.append(SwapCandidate(station, left, right, span,
                                     pos_j - pos_i))
    return out


# ---------------------------------------------------------------------------
# route completion density


def route_completion(route: Sequence[int], spans: Iterable[Span],
                     extra_span: Optional[Span] = None) -> float:
    """Fraction of the route's links covered by the given pair spans.

    Each span whose endpoints both lie on the route covers the links between
    them; coverage is the union, counted with one bit per link.
    """
    positions = {node: i for i, node in enumerate(route)}
    hops = len(route) - 1
    if hops <= 0:
        return 0.0
    mask = 0
    all_spans = list(spans) + ([extra_span] if extra_span is not None else [])
    for a, b in all_spans:
        pa = positions.get(a)
        pb = positions.get(b)
        if pa is None or pb is None:
            continue
        lo, hi = (pa, pb) if pa < pb else (pb, pa)
        mask |= ((1 << (hi - lo)) - 1) << lo
    return mask.bit_count() / hops


def progress_density(i: int, j: int, route: Sequence[int],
                     available_spans: Iterable[Span]) -> float:
    """Route completion if a pair spanning (i, j) existed right now."""
    positions = {node: idx for idx, node in enumerate(route)}
    if i not in positions or j not in positions:
        return 0.0
    return route_completion(route, available_spans, extra_span=(i, j))


# ---------------------------------------------------------------------------
# expiry


def depth_of_span(span: Span, plan: Plan) -> int:
    """Depth of the deepest plan-tree node whose span contains this span."""
    positions = {node: i for i, node in enumerate(plan.route)}
    a, b = span
    if a not in positions or b not in positions:
        return 0
    lo, hi = sorted((positions[a], positions[b]))
    best = 0
    for node_span, depth in plan.depths.items():
        na, nb = node_span
        pa = positions.get(na)
        pb = positions.get(nb)
        if pa is None or pb is None:
            continue
        plo, phi = (pa, pb) if pa < pb else (pb, pa)
        if plo <= lo and hi <= phi:
            best = max(best, depth)
    return best


def cutoff_us(depth: int, l_target_s: float, rho: float) -> int:
    """Useful life of a pair at the given plan depth, in microseconds."""
    return int(round((rho ** depth) * l_target_s * US_PER_S))


def discard_deadline_us(rec: EpRecord, plan: Plan, params: SimParams) -> Optional[int]:
    """Absolute expiry time, or None for unbound predistributed stock."""
    if rec.request_id == PREDISTRIBUTED:
        return None
    depth = depth_of_span((rec.node_a, rec.node_b), plan)
    return rec.policy_birth + cutoff_us(depth, plan.l_target_s,
                                        params.discard_rho)


def discard_sweep(records: Iterable[EpRecord], plans: Mapping[str, Plan],
                  now: int, params: SimParams) -> list[EpRecord]:
    """Pairs past their deadline (operational helper for offline checks)."""
    out = []
    for rec in records:
        if rec.status != AVAILABLE:
            continue
        plan = plans.get(rec.request_id)
        if plan is None:
            continue
        deadline = discard_deadline_us(rec, plan, params)
        if deadline is not None and now > deadline:
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# scoring policy


@dataclass(frozen=True)
class ScoreBreakdown:
    immediacy: float
    liability: float
    relief: float
    density: float = 0.0      # route completion the fusion would reach
    remaining_s: float = 0.0  # time until the first input expires

    @property
    def value(self) -> float:
        return (SCORE_ALPHA * self.immediacy + SCORE_GAMMA * self.liability
                + SCORE_DELTA * self.relief)


def hold_expires_in_us(b: ScoreBreakdown) -> Optional[int]:
    """Microseconds from now until aging alone flips this score positive.

    Between decision triggers nothing moves but the input ages, so the
    crossing point of value(t) = 0 is exact: the urgency term grows as the
    remaining life shrinks while liability and relief stay put. None when
    waiting can never help (the fusion makes no route progress).
    """
    if b.value > 0 or b.density <= 0.0:
        return None
    hold = -(SCORE_GAMMA * b.liability + SCORE_DELTA * b.relief)
    if hold <= 0.0:
        return None
    flip_remaining_s = SCORE_ALPHA * b.density / hold
    delay_s = b.remaining_s - flip_remaining_s
    return max(int(delay_s * US_PER_S) + 1, RETRY_TIMER_US)


def score_candidate(cand: SwapCandidate, plan: Plan,
                    records_here: Sequence[EpRecord],
                    available_spans: Sequence[Span],
                    now: int, memory_slots: int,
                    occupied_slots: Optional[int] = None,
                    rho: float = 1.0) -> ScoreBreakdown:
    """Price one candidate fusion for the scoring policy.

    ``records_here`` are this request's available pairs with an endpoint at
    the station (candidate inputs included); ``available_spans`` are the
    spans of the request's available pairs network-wide, used for completion
    density. ``occupied_slots`` is the station's total memory usage when the
    caller knows it; otherwise it is approximated from ``records_here``.

    The urgency denominator is the time until the first input expires under
    the depth-aware discard rule (``rho`` per depth level, matching the
    deadlines the discard timers run on). A fresh input keeps the score
    small, so a pending planned fusion holds it; as expiry nears the score
    climbs without bound and consuming the pair in any forward fusion beats
    letting it be recycled.
    """
    i, j = cand.out_span
    density = progress_density(i, j, plan.route, available_spans)

    def time_left_s(inp: EpRecord) -> float:
        depth = depth_of_span((inp.node_a, inp.node_b), plan)
        return ((rho ** depth) * plan.l_target_s
                - (now - inp.policy_birth) / US_PER_S)

    remaining_s = max(min(time_left_s(cand.left), time_left_s(cand.right)),
                      MIN_REMAINING_S)
    immediacy = density / remaining_s

    input_ids = {cand.left.ep_id, cand.right.ep_id}
    input_spans = {(cand.left.node_a, cand.left.node_b),
                   (cand.right.node_a, cand.right.node_b)}
    avail_spans = set(available_spans)
    liability = 0.0
    # each consumed input has at most one planned fusion in the tree;
    # charge it wherever on the route it would have happened
    for station, ls, rs, out_span in plan.prescribed_swaps():
        for ours, partner in ((ls, rs), (rs, ls)):
            if ours not in input_spans or partner in input_spans:
                continue
            if partner in avail_spans:
                continue  # partner on hand: its own fusion competes directly
            alt_density = progress_density(out_span[0], out_span[1],
                                           plan.route, available_spans)
            # forfeited planned output, at the rate the plan would feed it
            liability += alt_density * plan.node_rates.get(partner, 0.0)

    spare = sum(1 for r in records_here
                if r.status == AVAILABLE and r.ep_id not in input_ids
                and (i in r.endpoints or j in r.endpoints))
    if occupied_slots is None:
        occupied_slots = sum(1 for r in records_here
                             if r.status == AVAILABLE)
    held = max(occupied_slots - 2, 0)  # fusing releases the two inputs
    load = held / memory_slots if memory_slots > 0 else 0.0
    relief = SCORE_BETA1 * spare + SCORE_BETA2 * load
    return ScoreBreakdown(immediacy, liability, relief,
                          density=density, remaining_s=remaining_s)


# ---------------------------------------------------------------------------
# ranking policies


def _rank_fixed_tree(cands: list[SwapCandidate], plan: Plan,
                     ) -> list[SwapCandidate]:
    order: dict[frozenset, int] = {}
    for idx, (station, ls, rs, _) in enumerate(plan.prescribed_swaps()):
        order[frozenset((station, ls, rs))] = idx
    keyed = []
    for c in cands:
        ls = (c.left.node_a, c.left.node_b)
        rs = (c.right.node_a, c.right.node_b)
        idx = order.get(frozenset((c.station, ls, rs)))
        if idx is not None:
            keyed.append((idx, c.tie_break, c))
    return [c for _, _, c in sorted(keyed, key=lambda k: k[:2])]


def rank_candidates(policy: str, cands: list[SwapCandidate], now: int,
                    plan: Optional[Plan] = None) -> list[SwapCandidate]:
    """Order candidates by the policy's preference; first is attempted.

    The scoring policy is not a ranking; see ``score_candidate``.
    """
    if policy == "fixed_tree":
        if plan is None:
            raise ValueError("fixed_tree ranking needs the plan")
        return _rank_fixed_tree(cands, plan)
    if policy == "swap_asap":
        key: Callable[[SwapCandidate], tuple] = lambda c: c.tie_break
    elif policy == "oldest":
        key = lambda c: (min(c.left.policy_birth, c.right.policy_birth),
                         c.tie_break)
    elif policy == "youngest":
        key = lambda c: (-max(c.left.policy_birth, c.right.policy_birth),
                         c.tie_break)
    elif policy == "longest_hop":
        key = lambda c: (-c.hops_spanned, c.tie_break)
    elif policy == "shortest_hop":
        key = lambda c: (c.hops_spanned, c.tie_break)
    else:
        raise ValueError(f"unknown ranking policy {policy!r}")
    return sorted(cands, key=key)
