"""Event-driven execution of the full protocol stack on one network.

The :class:`Simulation` owns the clock, the physical truth about every
entangled pair (the canonical record store and per-node memory slots), and
the knowledge plane (a shared or replicated directory read through
propagation-delay views).  Requests arrive, get planned, and then progress
through link-level generation, swap and purification protocols with explicit
classical messaging, per-pair discard deadlines, transport monitoring, and
optional stock predistribution over superlinks.

Decisions always read a node's delayed view; execution re-checks the
canonical store, so stale knowledge costs wasted decision cycles rather than
physically impossible operations.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

from .engine import Engine
from .linklayer import LinkGenTask, LinkRuntime
from .params import PREDISTRIBUTED, US_PER_S, SimParams
from .planner import (
    InfeasibleFidelity,
    Leaf,
    NoFeasiblePath,
    Plan,
    Purify,
    ResourceLedger,
    Swap,
    augment_with_purification,
    estimate_tree,
    link_rate_map,
    plan_for_request,
    select_superlinks,
)
from .registry import (
    AVAILABLE,
    CENTRALIZED,
    CONSUMED,
    CONSUMED_K,
    CREATED,
    DISCARDED,
    DISCARDED_K,
    DISTRIBUTED,
    EpRecord,
    LOCKED_PURIFY,
    LOCKED_SWAP,
    PURIFIED,
    ReplicatedDirectory,
    SWAPPED,
    SharedDirectory,
)
from .swapping import (
    RETRY_TIMER_US,
    SwapCandidate,
    discard_deadline_us,
    enumerate_candidates,
    hold_expires_in_us,
    rank_candidates,
    score_candidate,
)
from .topology import NetworkGraph, link_budget
from .transport import (
    ADJUST_FIDELITY,
    ADJUST_RATE,
    DAMP,
    MonitorConfig,
    MonitorState,
    REPLAN,
    SUSPEND,
    TERMINATE,
    WindowStats,
    build_window_stats,
    monitor_step,
    predist_controller_step,
)
from .werner import (
    WernerState,
    fidelity_at,
    fidelity_to_weight,
    purify_output_fidelity,
    purify_success_probability,
    weight_at,
)
from .workload import FIXED_COUNT, EntanglementRequest, PredistConfig

log = logging.getLogger("qnetsim.sim")

CONNECTIONLESS = "connectionless"

Span = tuple[int, int]

_TERMINAL = ("done", "terminated")


def _span(u: int, v: int) -> Span:
    return (u, v) if u < v else (v, u)


def _strip_purify(tree):
    """Return the tree with every purification wrapper removed."""
    if isinstance(tree, Purify):
        return _strip_purify(tree.child)
    if isinstance(tree, Swap):
        return Swap(tree.at, _strip_purify(tree.left), _strip_purify(tree.right),
                    tree.u, tree.v)
    return tree


@dataclass
class _LinkBox:
    """A link's generation runtime plus its scheduling status."""

    runtime: LinkRuntime
    armed: bool = False     # a success event is on the queue
    sleeping: bool = False  # success banked, waiting for capacity


@dataclass
class _Walker:
    """Hop-by-hop forwarding state for a connectionless request."""

    head_id: Optional[int] = None
    head_node: int = 0
    visited: set = field(default_factory=set)


class RequestRuntime:
    """Mutable per-request state: plan, tasks, monitor, and counters."""

    is_predist = False

    def __init__(self, request: EntanglementRequest, policy: str):
        self.request = request
        self.request_id = request.request_id
        self.policy = policy
        self.state = "pending"
        self.span = _span(request.src, request.dst)
        self.plan: Optional[Plan] = None
        self.base_tree = None
        self.plan_seq = 0
        self.monitor = MonitorState()
        self.tasks: dict[Span, str] = {}
        self.dispatch_us: dict[int, int] = {}
        self.deliveries: list[tuple[float, float]] = []  # monitor window
        self.delivered = 0
        self.fid_sum = 0.0
        self.lat_sum_us = 0
        self.arrival_us = 0
        self.started_s = 0.0
        self.last_delivery_us: Optional[int] = None
        self.replans = 0
        self.ledger_claimed = False
        self.walker: Optional[_Walker] = None
        self.hops = 0


class PredistRuntime:
    """One superlink's stock pipeline: a standing internal request."""

    is_predist = True
    policy = "swap_asap"
    walker = None

    def __init__(self, request_id: str, span: Span, plan: Plan):
        self.request_id = request_id
        self.span = span
        self.plan = plan
        self.state = "active"
        self.tasks: dict[Span, str] = {}
        self.active = True
        self.done = False
        self.plan_seq = 0


@dataclass
class RequestSummary:
    """Immutable per-request outcome for results tables."""

    request_id: str
    src: int
    dst: int
    kind: str
    arrival_s: float
    hops: int
    delivered: int
    rate_per_s: float
    mean_fidelity: Optional[float]
    mean_latency_s: Optional[float]
    final_state: str
    replans: int


@dataclass
class SimResult:
    """Outcome of one simulation run."""

    policy: str
    gem_mode: str
    predist_mode: str
    carrier: str
    master_seed: int
    duration_s: float
    requests: list[RequestSummary]
    counters: dict[str, int]
    message_counts: dict[str, int]
    directory_updates: int

    @property
    def total_delivered(self) -> int:
        return sum(r.delivered for r in self.requests)

    @property
    def delivered_per_s(self) -> float:
        return self.total_delivered / self.duration_s if self.duration_s else 0.0

    @property
    def mean_fidelity(self) -> Optional[float]:
        n = self.total_delivered
        if n == 0:
            return None
        s = sum(r.mean_fidelity * r.delivered for r in self.requests
                if r.delivered)
        return s / n

    @property
    def mean_latency_s(self) -> Optional[float]:
        n = self.total_delivered
        if n == 0:
            return None
        s = sum(r.mean_latency_s * r.delivered for r in self.requests
                if r.delivered)
        return s / n


class Simulation:
    """Run a workload over one network under a chosen swap policy.

    ``carrier`` selects how the entanglement directory is materialized:
    ``"shared"`` answers reads with per-reader propagation delays from one
    version table; ``"replicated"`` keeps an explicit replica per node fed by
    scheduled update deliveries.  ``gem_mode`` chooses between local decision
    reads and query round-trips to the network's center node.
    """

    def __init__(self, graph: NetworkGraph, requests: list[EntanglementRequest],
                 params: SimParams, *, policy: str = "scoring",
                 gem_mode: str = DISTRIBUTED, carrier: str = "shared",
                 predist: Optional[PredistConfig] = None,
                 superlink_spans: Optional[list[Span]] = None,
                 monitor_cfg: Optional[MonitorConfig] = None,
                 master_seed: int = 0):
        if carrier not in ("shared", "replicated"):
            raise ValueError(f"unknown directory carrier: {carrier!r}")
        if gem_mode not in (DISTRIBUTED, CENTRALIZED):
            raise ValueError(f"unknown gem mode: {gem_mode!r}")
        self._graph = graph
        self._params = params
        self._policy = policy
        self._gem_mode = gem_mode
        self._carrier = carrier
        self._predist_cfg = predist or PredistConfig()
        self._superlink_spans = superlink_spans
        self._monitor_cfg = monitor_cfg or MonitorConfig()
        self._master_seed = master_seed

        self._engine = Engine(master_seed, latency_us=graph.classical_latency_us)
        self._latency = graph.classical_latency_us
        self._center = graph.center_node()
        node_ids = [n.id for n in graph.nodes]
        diag_s = graph.side_km * math.sqrt(2.0) / graph.classical_speed_km_s
        max_prop = int(math.ceil(diag_s * US_PER_S)) + 1
        if carrier == "shared":
            self._directory = SharedDirectory(
                node_ids, lambda: self._engine.now, graph.classical_latency_us,
                max_prop, mode=gem_mode, center=self._center)
        else:
            self._directory = ReplicatedDirectory(
                node_ids, lambda: self._engine.now, mode=gem_mode,
                center=self._center)

        self._link_rates = link_rate_map(graph, params)
        self._ledger = ResourceLedger(graph)
        self._coords = {n.id: (n.x, n.y) for n in graph.nodes}
        self._memory_slots = {n.id: n.memory_slots for n in graph.nodes}
        self.free_slots = dict(self._memory_slots)

        self._requests: dict[str, RequestRuntime] = {
            r.request_id: RequestRuntime(r, policy) for r in requests}
        self._predist: list[PredistRuntime] = []
        self._predist_by_rid: dict[str, PredistRuntime] = {}
        self._stock: dict[Span, list[int]] = {}

        self._canonical: dict[int, EpRecord] = {}
        self._live_by_req: dict[str, set[int]] = {}
        self._rid_of: dict[int, str] = {}
        self._links: dict[Span, _LinkBox] = {}
        self._sleep_by_node: dict[int, set[Span]] = {}
        self._ep_task: dict[int, tuple[Span, str]] = {}
        self._armed: set[tuple[int, str]] = set()
        self._retry_at: dict[tuple[int, str], int] = {}
        self._improvised: set[int] = set()
        self._central: dict[tuple[int, str], str] = {}
        self._next_ep_id = 0
        self.counters: Counter = Counter()

        eng = self._engine
        eng.on("arrival", self._on_arrival)
        eng.on("dispatch", self._on_dispatch)
        eng.on("link_success", self._on_link_success)
        eng.on("ep_known", self._on_ep_known)
        eng.on("decision", self._on_decision)
        eng.on("retry", self._on_retry)
        eng.on("swap_bsm", self._on_swap_bsm)
        eng.on("swap_correction", self._on_swap_correction)
        eng.on("swap_ack", self._on_swap_ack)
        eng.on("swap_fail", self._on_swap_fail)
        eng.on("purify_go", self._on_purify_go)
        eng.on("purify_result", self._on_purify_result)
        eng.on("purify_done", self._on_purify_done)
        eng.on("ep_discard", self._on_ep_discard)
        eng.on("monitor_tick", self._on_monitor_tick)
        eng.on("resume", self._on_resume)
        eng.on("predist_tick", self._on_predist_tick)
        eng.on("central_query", self._on_central_query)
        eng.on("central_reply", self._on_central_reply)
        eng.on("registry_update", self._on_registry_update)
        eng.on("walker_head", self._on_walker_head)
        eng.on("stock_out", self._on_stock_out)
        eng.on("stock_in", self._on_stock_in)
        eng.on("gc_tick", self._on_gc_tick)

    # ------------------------------------------------------------- lifecycle

    def run(self, duration_s: Optional[float] = None) -> SimResult:
        dur = self._params.duration_s if duration_s is None else duration_s
        t_end = int(round(dur * US_PER_S))
        self._t_end = t_end
        if self._predist_cfg.mode != "none":
            self._init_predist()
        for rid, rr in self._requests.items():
            self._engine.schedule(int(round(rr.request.arrival_s * US_PER_S)),
                                  "arrival", payload=rid)
        self._engine.schedule(2 * US_PER_S, "gc_tick")
        self._engine.run_until(t_end)
        return self._collect(dur)

    def _collect(self, dur: float) -> SimResult:
        rows = []
        for rr in self._requests.values():
            n = rr.delivered
            window = max(dur - rr.request.arrival_s, 1e-9)
            rows.append(RequestSummary(
                request_id=rr.request_id, src=rr.request.src,
                dst=rr.request.dst, kind=rr.request.kind,
                arrival_s=rr.request.arrival_s, hops=rr.hops, delivered=n,
                rate_per_s=n / window,
                mean_fidelity=(rr.fid_sum / n) if n else None,
                mean_latency_s=(rr.lat_sum_us / n / US_PER_S) if n else None,
                final_state=rr.state, replans=rr.replans))
        return SimResult(
            policy=self._policy, gem_mode=self._gem_mode,
            predist_mode=self._predist_cfg.mode, carrier=self._carrier,
            master_seed=self._master_seed, duration_s=dur, requests=rows,
            counters=dict(sorted(self.counters.items())),
            message_counts=dict(sorted(self._engine.message_counts.items())),
            directory_updates=self._directory.update_messages)

    # ------------------------------------------------------- record plumbing

    def _publish(self, origin: int, rec: EpRecord, kind: str) -> None:
        self._canonical[rec.ep_id] = rec
        if rec.status == AVAILABLE:
            old = self._rid_of.get(rec.ep_id)
            if old is not None and old != rec.request_id:
                self._live_by_req[old].discard(rec.ep_id)
            self._rid_of[rec.ep_id] = rec.request_id
            self._live_by_req.setdefault(rec.request_id, set()).add(rec.ep_id)
        else:
            old = self._rid_of.pop(rec.ep_id, None)
            if old is not None:
                self._live_by_req[old].discard(rec.ep_id)
        deliveries = self._directory.publish(origin, rec, kind)
        if deliveries:
            now = self._engine.now
            for dst, upd in deliveries:
                self._engine.schedule(now + self._latency(origin, dst),
                                      "registry_update", target=dst,
                                      payload=upd)

    def _on_registry_update(self, ev) -> None:
        self._directory.deliver(ev.target, ev.payload)

    def _view_records(self, reader: int, rid: str) -> list[EpRecord]:
        if self._carrier == "shared":
            return self._directory.query_available(reader, request_id=rid)
        return self._directory.view(reader).query_available(request_id=rid)

    def _lock(self, rec: EpRecord, status: str, origin: int) -> EpRecord:
        new = replace(rec, status=status, version=(self._engine.now, origin))
        self._publish(origin, new, "locked")
        return new

    def _finish(self, rec: EpRecord, status: str, *, origin: int,
                free_at: Optional[tuple] = None) -> None:
        """Retire a pair: publish its final status and release resources."""
        now = self._engine.now
        new = replace(rec, status=status, version=(now, origin))
        kind = CONSUMED_K if status == CONSUMED else DISCARDED_K
        self._publish(origin, new, kind)
        self._canonical.pop(rec.ep_id, None)
        if free_at is None:
            free_at = new.endpoints
        for n in free_at:
            self._free_slot(n)
        self._release_ep_task(rec.ep_id)
        if rec.request_id == PREDISTRIBUTED:
            ids = self._stock.get(rec.endpoints)
            if ids and rec.ep_id in ids:
                ids.remove(rec.ep_id)
            return
        rr = self._requests.get(rec.request_id)
        if rr is None:
            return
        if rec.cached and rr.state == "active" and rr.plan is not None \
                and rec.endpoints in rr.plan.cached_spans:
            if not self._claim_stock(rr, rec.endpoints):
                # stock ran dry under this plan; replan outside this handler
                self._engine.schedule(now, "stock_out", payload=rr.request_id)
        w = rr.walker
        if w is not None and w.head_id == rec.ep_id:
            if status == DISCARDED:
                self._walker_reset(rr)
            else:
                w.head_id = None  # swapped forward or delivered

    def _next_ep(self) -> int:
        self._next_ep_id += 1
        return self._next_ep_id

    # --------------------------------------------------------- memory slots

    def _take_slot(self, node: int) -> None:
        self.free_slots[node] -= 1

    def _free_slot(self, node: int) -> None:
        self.free_slots[node] += 1
        spans = self._sleep_by_node.get(node)
        if spans:
            for span in sorted(spans):
                self._wake_link(span)

    # ----------------------------------------------------------- link layer

    def _link_box(self, span: Span) -> _LinkBox:
        box = self._links.get(span)
        if box is None:
            link = self._graph.link_between(*span)
            budget = link_budget(link, self._params)
            rng = self._engine.rng(span[0], f"link:{span[0]}:{span[1]}")
            box = _LinkBox(LinkRuntime(span, budget.p_success,
                                       budget.attempt_period_us, rng,
                                       self._params.outstanding_cap))
            self._links[span] = box
        return box

    def _ensure_task(self, rr, span: Span, *, predist: bool = False) -> None:
        if span in rr.tasks:
            return
        task_id = f"{rr.request_id}|{span[0]}-{span[1]}"
        weight = 1.0 if rr.is_predist else rr.monitor.rate_knob
        box = self._link_box(span)
        box.runtime.add_task(LinkGenTask(task_id, rr.request_id,
                                         predist=predist, weight=weight))
        rr.tasks[span] = task_id
        self._wake_or_arm(span)

    def _remove_task(self, rr, span: Span) -> None:
        task_id = rr.tasks.pop(span, None)
        if task_id is None:
            return
        box = self._links.get(span)
        if box is not None:
            box.runtime.remove_task(task_id)

    def _teardown_tasks(self, rr) -> None:
        for span in list(rr.tasks):
            self._remove_task(rr, span)

    def _set_paused(self, rr, paused: bool) -> None:
        for span, task_id in rr.tasks.items():
            box = self._links.get(span)
            task = box.runtime.tasks.get(task_id) if box else None
            if task is not None:
                task.paused = paused
            if not paused:
                self._wake_or_arm(span)

    def _wake_or_arm(self, span: Span) -> None:
        box = self._links.get(span)
        if box is None or not box.runtime.active:
            return
        if box.sleeping:
            self._wake_link(span)
        elif not box.armed:
            box.armed = True
            self._engine.schedule(self._engine.now + box.runtime.next_gap_us(),
                                  "link_success", payload=span)

    def _wake_link(self, span: Span) -> None:
        box = self._links.get(span)
        if box is None or not box.sleeping:
            return
        box.sleeping = False
        for n in span:
            spans = self._sleep_by_node.get(n)
            if spans:
                spans.discard(span)
        # the banked success retries after one attempt period, no fresh draw
        box.armed = True
        self._engine.schedule(self._engine.now + box.runtime.defer_gap_us(),
                              "link_success", payload=span)

    def _sleep_link(self, span: Span, box: _LinkBox) -> None:
        box.sleeping = True
        for n in span:
            self._sleep_by_node.setdefault(n, set()).add(span)
        self.counters["link_deferrals"] += 1

    def _release_ep_task(self, ep_id: int) -> None:
        entry = self._ep_task.pop(ep_id, None)
        if entry is None:
            return
        span, task_id = entry
        box = self._links.get(span)
        if box is None:
            return
        box.runtime.note_released(task_id)
        if box.sleeping:
            self._wake_link(span)

    def _on_link_success(self, ev) -> None:
        span = ev.payload
        box = self._links[span]
        box.armed = False
        rt = box.runtime
        if not rt.active:
            return  # dormant; a later task add re-arms
        a, b = span
        if self.free_slots[a] < 1 or self.free_slots[b] < 1:
            self._sleep_link(span, box)
            return
        task = rt.assign_success()
        if task is None:
            self._sleep_link(span, box)
            return
        now = self._engine.now
        self.counters["link_successes"] += 1
        ep_id = self._next_ep()
        state = WernerState(fidelity_to_weight(self._params.link_fidelity), now)
        rec = EpRecord(ep_id, a, b, task.request_id, created_at=now,
                       policy_birth=now, state=state, status=AVAILABLE,
                       version=(now, a))
        self._take_slot(a)
        self._take_slot(b)
        self._ep_task[ep_id] = (span, task.task_id)
        self._publish(a, rec, CREATED)
        rr = self._runtime(task.request_id)
        if rr is not None:
            self._schedule_discard(rec, rr.plan)
        self._trigger(a, task.request_id)
        self._engine.schedule(now + self._latency(a, b), "ep_known", target=b,
                              payload=task.request_id)
        box.armed = True
        self._engine.schedule(now + rt.next_gap_us(), "link_success",
                              payload=span)

    # ------------------------------------------------------------- requests

    def _runtime(self, rid: str):
        rr = self._requests.get(rid)
        if rr is not None:
            return rr
        return self._predist_by_rid.get(rid)

    def _dispatched(self, rr, node: int) -> bool:
        if rr.is_predist or rr.policy == CONNECTIONLESS:
            return True
        t = rr.dispatch_us.get(node)
        return t is not None and self._engine.now >= t

    def _effective_floor(self, rr: RequestRuntime) -> Optional[float]:
        floor = rr.request.plan_min_fidelity
        if floor is None:
            return None
        # the knob may not push the floor above what any tree can reach
        return min(0.995, floor * rr.monitor.fidelity_knob)

    def _stock_offer(self) -> Optional[dict[Span, int]]:
        if not self._stock:
            return None
        claims = self._ledger.cached_claims
        return {s: len(ids) + claims.get(s, 0)
                for s, ids in self._stock.items()}

    def _plan_request(self, rr: RequestRuntime,
                      exclude_links: tuple = ()) -> Optional[Plan]:
        req = rr.request
        connectionless = rr.policy == CONNECTIONLESS
        ledger = None if connectionless else self._ledger
        stock = None if connectionless else self._stock_offer()
        floor = None if connectionless else self._effective_floor(rr)
        try:
            try:
                plan = plan_for_request(
                    self._graph, req.src, req.dst, self._params,
                    request_id=rr.request_id, ledger=ledger,
                    link_rates=self._link_rates, cached_stock=stock,
                    min_fidelity=floor, exclude_links=exclude_links)
            except InfeasibleFidelity:
                self.counters["floor_unreachable"] += 1
                plan = plan_for_request(
                    self._graph, req.src, req.dst, self._params,
                    request_id=rr.request_id, ledger=ledger,
                    link_rates=self._link_rates, cached_stock=stock,
                    min_fidelity=None, exclude_links=exclude_links)
        except NoFeasiblePath:
            if exclude_links:
                return self._plan_request(rr)
            self.counters["plans_failed"] += 1
            self._terminate(rr)
            return None
        rr.ledger_claimed = ledger is not None
        return plan

    def _activate_plan(self, rr: RequestRuntime, plan: Plan) -> None:
        now = self._engine.now
        rr.plan = plan
        rr.base_tree = _strip_purify(plan.tree)
        rr.plan_seq += 1
        rr.hops = len(plan.route) - 1
        src = rr.request.src
        rr.dispatch_us = {n: now + self._latency(src, n) for n in plan.route}
        for span in plan.cached_spans:
            if not self._claim_stock(rr, span):
                self.counters["claims_missed"] += 1
        if rr.policy == CONNECTIONLESS:
            rr.walker = _Walker(head_node=src, visited={src})
            self._walker_retask(rr)
            self._trigger(src, rr.request_id)
            return
        for node in plan.route:
            if node == src:
                self._plan_ready_at(rr, node)
            else:
                self._engine.send_classical(src, node, "dispatch",
                                            (rr.request_id, rr.plan_seq))

    def _plan_ready_at(self, rr: RequestRuntime, node: int) -> None:
        for span in rr.plan.leaf_spans:
            if span[0] == node:
                self._ensure_task(rr, span)
        self._trigger(node, rr.request_id)

    def _on_dispatch(self, ev) -> None:
        rid, seq = ev.payload
        rr = self._requests.get(rid)
        if rr is None or rr.state in _TERMINAL or rr.plan is None \
                or rr.plan_seq != seq:
            return
        self._plan_ready_at(rr, ev.target)

    def _on_arrival(self, ev) -> None:
        rr = self._requests[ev.payload]
        now = self._engine.now
        rr.state = "active"
        rr.arrival_us = now
        rr.started_s = now / US_PER_S
        plan = self._plan_request(rr)
        if plan is None:
            return
        log.info("request %s planned: route %s latency %.4fs fidelity %.4f",
                 rr.request_id, plan.route, plan.root_latency_s,
                 plan.root_fidelity)
        self._activate_plan(rr, plan)
        tick = int(round(self._monitor_cfg.tick_s * US_PER_S))
        self._engine.schedule(now + tick, "monitor_tick", payload=rr.request_id)

    def _complete(self, rr: RequestRuntime) -> None:
        rr.state = "done"
        self._finish_request(rr)
        self.counters["completions"] += 1

    def _terminate(self, rr: RequestRuntime) -> None:
        rr.state = "terminated"
        rr.monitor.terminated = True
        self._finish_request(rr)
        self.counters["terminations"] += 1
        log.info("request %s terminated", rr.request_id)

    def _finish_request(self, rr: RequestRuntime) -> None:
        self._teardown_tasks(rr)
        if rr.ledger_claimed and rr.plan is not None:
            self._ledger.release_plan(rr.plan)
            rr.ledger_claimed = False
        for ep_id in sorted(self._live_by_req.get(rr.request_id, set())):
            rec = self._canonical.get(ep_id)
            if rec is not None and rec.status == AVAILABLE:
                self._finish(rec, DISCARDED, origin=rec.node_a)

    def _replan(self, rr: RequestRuntime, exclude_old: bool) -> None:
        old = rr.plan
        if rr.ledger_claimed and old is not None:
            self._ledger.release_plan(old)
            rr.ledger_claimed = False
        self._teardown_tasks(rr)
        exclude = tuple(old.leaf_spans) if (exclude_old and old) else ()
        plan = self._plan_request(rr, exclude)
        if plan is None:
            return
        rr.replans += 1
        self.counters["replans"] += 1
        self._activate_plan(rr, plan)

    def _on_stock_out(self, ev) -> None:
        rr = self._requests.get(ev.payload)
        if rr is None or rr.state != "active" or rr.plan is None:
            return
        if not rr.plan.cached_spans:
            return
        self._replan(rr, exclude_old=False)

    # ------------------------------------------------------------- delivery

    def _deliver(self, rr: RequestRuntime, rec: EpRecord, node: int) -> None:
        now = self._engine.now
        fid = fidelity_at(rec.state, now, self._params.noise)
        self._finish(rec, CONSUMED, origin=node)
        base = rr.last_delivery_us
        if base is None:
            base = rr.arrival_us
        lat_us = now - max(rr.arrival_us, base)
        rr.last_delivery_us = now
        rr.delivered += 1
        rr.fid_sum += fid
        rr.lat_sum_us += lat_us
        rr.deliveries.append((now / US_PER_S, fid))
        self.counters["deliveries"] += 1
        if rec.ep_id in self._improvised:
            self.counters["deliveries_improvised"] += 1
        if rr.walker is not None:
            self._walker_reset(rr)
        req = rr.request
        if req.kind == FIXED_COUNT and req.count is not None \
                and rr.delivered >= req.count:
            self._complete(rr)

    # ------------------------------------------------------------ decisions

    def _trigger(self, node: int, rid: str) -> None:
        rr = self._runtime(rid)
        if rr is None or rr.state != "active":
            return
        if not self._dispatched(rr, node):
            return
        key = (node, rid)
        if key in self._armed:
            return
        self._armed.add(key)
        self._engine.schedule(self._engine.now, "decision", target=node,
                              payload=rid)

    def _on_ep_known(self, ev) -> None:
        self._trigger(ev.target, ev.payload)

    def _arm_retry(self, node: int, rid: str,
                   delay_us: int = RETRY_TIMER_US) -> None:
        # keep only the earliest pending wake-up per (station, request);
        # a later duplicate firing is a harmless extra trigger
        key = (node, rid)
        fire_at = self._engine.now + delay_us
        pending = self._retry_at.get(key)
        if pending is not None and pending <= fire_at:
            return
        self._retry_at[key] = fire_at
        self.counters["retries"] += 1
        self._engine.schedule(fire_at, "retry", target=node, payload=rid)

    def _on_retry(self, ev) -> None:
        self._retry_at.pop((ev.target, ev.payload), None)
        self._trigger(ev.target, ev.payload)

    def _on_decision(self, ev) -> None:
        node, rid = ev.target, ev.payload
        self._armed.discard((node, rid))
        rr = self._runtime(rid)
        if rr is None or rr.state != "active" or rr.plan is None:
            return
        if self._gem_mode == CENTRALIZED and node != self._center:
            key = (node, rid)
            state = self._central.get(key, "idle")
            if state != "idle":
                self._central[key] = "dirty"
                return
            self._central[key] = "pending"
            self.counters["central_queries"] += 1
            self._engine.send_classical(node, self._center, "central_query",
                                        (node, rid))
            return
        self._run_decision(node, rid, self._view_records(node, rid))

    def _on_central_query(self, ev) -> None:
        node, rid = ev.payload
        records = self._view_records(self._center, rid)
        self._engine.send_classical(self._center, node, "central_reply",
                                    (node, rid, records))

    def _on_central_reply(self, ev) -> None:
        node, rid, records = ev.payload
        key = (node, rid)
        dirty = self._central.get(key) == "dirty"
        self._central[key] = "idle"
        self._run_decision(node, rid, records)
        if dirty:
            self._trigger(node, rid)

    def _ready(self, rec: EpRecord, plan: Optional[Plan]) -> bool:
        if plan is None:
            return True
        need = plan.purify_rounds.get(rec.endpoints, 0)
        return rec.purify_rounds_done >= need

    def _run_decision(self, node: int, rid: str,
                      records: list[EpRecord]) -> None:
        rr = self._runtime(rid)
        if rr is None or rr.state != "active" or rr.plan is None:
            return
        if not self._dispatched(rr, node):
            return
        self.counters["decisions"] += 1
        plan = rr.plan
        recs_here = [r for r in records
                     if r.request_id == rid and node in r.endpoints]
        span_goal = (rr.span if not rr.is_predist
                     else _span(plan.src, plan.dst))
        for r in recs_here:
            if r.endpoints == span_goal and self._ready(r, plan):
                cur = self._canonical.get(r.ep_id)
                if cur is not None and cur.status == AVAILABLE:
                    if rr.is_predist:
                        self._bank_stock(rr, cur, node)
                    else:
                        self._deliver(rr, cur, node)
                    if rr.state != "active":
                        return
        if rr.policy == CONNECTIONLESS:
            self._walker_step(rr, node, recs_here)
            return
        if plan.purify_rounds and self._maybe_purify(rr, node, recs_here):
            return
        ready = [r for r in recs_here if self._ready(r, plan)]
        cands = enumerate_candidates(ready, node, plan.route, rid)
        if not cands:
            return
        now = self._engine.now
        if rr.policy == "scoring":
            spans_avail = [r.endpoints for r in records]
            slots = self._memory_slots[node]
            used = slots - self.free_slots[node]
            best = None
            best_value = 0.0
            wake_us = None
            for cand in sorted(cands, key=lambda c: c.tie_break):
                breakdown = score_candidate(cand, plan, recs_here, spans_avail,
                                            now, slots, occupied_slots=used,
                                            rho=self._params.discard_rho)
                if breakdown.value > best_value:
                    best, best_value = cand, breakdown.value
                else:
                    delay = hold_expires_in_us(breakdown)
                    if delay is not None and (wake_us is None
                                              or delay < wake_us):
                        wake_us = delay
            if best is not None:
                planned = {(s, frozenset((a, b)))
                           for s, a, b, _ in plan.prescribed_swaps()}
                key = (best.station, frozenset((best.left.endpoints,
                                                best.right.endpoints)))
                if key in planned:
                    self.counters["swaps_planned"] += 1
                else:
                    self.counters["swaps_improvised"] += 1
                    self._improvised.add(best.left.ep_id)
                    self._improvised.add(best.right.ep_id)
                if not self._begin_swap(best, rr):
                    self._arm_retry(node, rid)
            elif wake_us is not None:
                # all candidates held: wake when the first hold would flip
                self.counters["decision_holds"] += 1
                self._arm_retry(node, rid, delay_us=wake_us)
            return
        # ranking policies are purely event-driven: every change that could
        # create a candidate (new pair, ack, failure, purify outcome) fires
        # a trigger, so an inactionable set needs no timer
        for cand in rank_candidates(rr.policy, cands, now, plan):
            if self._begin_swap(cand, rr):
                return

    # ----------------------------------------------------------------- swap

    def _begin_swap(self, cand: SwapCandidate, rr) -> bool:
        left = self._canonical.get(cand.left.ep_id)
        right = self._canonical.get(cand.right.ep_id)
        if left is None or right is None or left.status != AVAILABLE \
                or right.status != AVAILABLE:
            self.counters["lock_conflicts"] += 1
            return False
        station = cand.station
        self._lock(left, LOCKED_SWAP, station)
        self._lock(right, LOCKED_SWAP, station)
        i = left.other_end(station)
        j = right.other_end(station)
        self.counters["swap_attempts"] += 1
        self._engine.schedule(self._engine.now + self._params.swap_op_us,
                              "swap_bsm", target=station,
                              payload=(rr.request_id, left.ep_id, right.ep_id,
                                       i, j))
        return True

    def _on_swap_bsm(self, ev) -> None:
        rid, left_id, right_id, i, j = ev.payload
        station = ev.target
        now = self._engine.now
        left = self._canonical[left_id]
        right = self._canonical[right_id]
        ok = (self._engine.rng(station, "swap").random()
              < self._params.swap_success)
        # the station measured both of its qubits either way
        self._free_slot(station)
        self._free_slot(station)
        noise = self._params.noise
        if ok:
            self.counters["swap_successes"] += 1
            weight = weight_at(left.state, now, noise) \
                * weight_at(right.state, now, noise)
            self._finish(left, CONSUMED, origin=station, free_at=())
            self._finish(right, CONSUMED, origin=station, free_at=())
            ep_id = self._next_ep()
            if left_id in self._improvised or right_id in self._improvised:
                self._improvised.add(ep_id)
            self._engine.send_classical(station, j, "swap_correction",
                                        (rid, ep_id, i, j, weight, now))
        else:
            self.counters["swap_failures"] += 1
            self._finish(left, DISCARDED, origin=station, free_at=())
            self._finish(right, DISCARDED, origin=station, free_at=())
            self._engine.send_classical(station, i, "swap_fail",
                                        (rid, left_id))
            self._engine.send_classical(station, j, "swap_fail",
                                        (rid, right_id))
            self._trigger(station, rid)

    def _on_swap_correction(self, ev) -> None:
        rid, ep_id, i, j, weight, t_bsm = ev.payload
        now = self._engine.now
        a, b = _span(i, j)
        rec = EpRecord(ep_id, a, b, rid, created_at=t_bsm, policy_birth=t_bsm,
                       state=WernerState(weight, t_bsm), status=AVAILABLE,
                       version=(now, j))
        rr = self._runtime(rid)
        if rr is None or rr.state in _TERMINAL:
            # nobody left to own the pair; release both memories
            self._publish(j, rec, SWAPPED)
            self._finish(rec, DISCARDED, origin=j)
            return
        self._publish(j, rec, SWAPPED)
        self._schedule_discard(rec, rr.plan)
        walker = rr.walker
        if walker is not None and rr.state == "active":
            walker.head_id = ep_id
            walker.head_node = j
            walker.visited.add(j)
            self._walker_retask(rr)
        self._engine.send_classical(j, i, "swap_ack", (rid, ep_id))
        self._trigger(j, rid)

    def _on_swap_ack(self, ev) -> None:
        rid, _ep_id = ev.payload
        self._trigger(ev.target, rid)

    def _on_swap_fail(self, ev) -> None:
        rid, _ep_id = ev.payload
        self._free_slot(ev.target)
        self._trigger(ev.target, rid)

    # --------------------------------------------------------- purification

    def _maybe_purify(self, rr, node: int,
                      recs_here: list[EpRecord]) -> bool:
        plan = rr.plan
        for span in sorted(plan.purify_rounds):
            need = plan.purify_rounds[span]
            if need <= 0 or span[0] != node:
                continue  # the lower endpoint runs the protocol
            group = []
            for r in recs_here:
                if r.endpoints == span and r.purify_rounds_done < need:
                    cur = self._canonical.get(r.ep_id)
                    if cur is not None and cur.status == AVAILABLE:
                        group.append(cur)
            if len(group) < 2:
                continue
            kept = max(group,
                       key=lambda r: (r.purify_rounds_done, -r.ep_id))
            fresh = min((r for r in group if r.ep_id != kept.ep_id),
                        key=lambda r: (r.purify_rounds_done, r.ep_id))
            u, v = span
            self._lock(kept, LOCKED_PURIFY, u)
            self._lock(fresh, LOCKED_PURIFY, u)
            self._free_slot(u)  # the sacrificed qubit at u is measured now
            self.counters["purify_attempts"] += 1
            self._engine.send_classical(u, v, "purify_go",
                                        (rr.request_id, kept.ep_id,
                                         fresh.ep_id))
            return True
        return False

    def _on_purify_go(self, ev) -> None:
        rid, kept_id, fresh_id = ev.payload
        v = ev.target
        self._free_slot(v)  # far half of the sacrificed pair is measured
        kept = self._canonical[kept_id]
        u = kept.other_end(v)
        self._engine.send_classical(v, u, "purify_result",
                                    (rid, kept_id, fresh_id))

    def _on_purify_result(self, ev) -> None:
        rid, kept_id, fresh_id = ev.payload
        u = ev.target
        now = self._engine.now
        noise = self._params.noise
        kept = self._canonical[kept_id]
        fresh = self._canonical[fresh_id]
        v = kept.other_end(u)
        f_kept = fidelity_at(kept.state, now, noise)
        f_fresh = fidelity_at(fresh.state, now, noise)
        p = purify_success_probability(f_kept, f_fresh)
        ok = self._engine.rng(u, "purify").random() < p
        if ok:
            self.counters["purify_successes"] += 1
            f_out = purify_output_fidelity(f_kept, f_fresh)
            new = replace(kept, state=WernerState(fidelity_to_weight(f_out),
                                                  now),
                          purify_rounds_done=kept.purify_rounds_done + 1,
                          status=AVAILABLE, version=(now, u))
            self._publish(u, new, PURIFIED)
            self._finish(fresh, CONSUMED, origin=u, free_at=())
            rr = self._runtime(rid)
            if rr is not None:
                self._schedule_discard(new, rr.plan)
        else:
            self.counters["purify_failures"] += 1
            self._finish(fresh, DISCARDED, origin=u, free_at=())
            self._finish(kept, DISCARDED, origin=u, free_at=(u,))
        self._engine.send_classical(u, v, "purify_done", (rid, kept_id, ok))
        self._trigger(u, rid)

    def _on_purify_done(self, ev) -> None:
        rid, _kept_id, ok = ev.payload
        if not ok:
            self._free_slot(ev.target)  # far half of the failed survivor
        self._trigger(ev.target, rid)

    # -------------------------------------------------------------- discard

    def _schedule_discard(self, rec: EpRecord, plan: Optional[Plan]) -> None:
        if plan is None:
            return
        deadline = discard_deadline_us(rec, plan, self._params)
        if deadline is None:
            return
        self._engine.schedule(max(deadline, self._engine.now), "ep_discard",
                              payload=(rec.ep_id, rec.policy_birth))

    def _on_ep_discard(self, ev) -> None:
        ep_id, policy_birth = ev.payload
        rec = self._canonical.get(ep_id)
        if rec is None or rec.status != AVAILABLE \
                or rec.policy_birth != policy_birth:
            return
        self.counters["discards"] += 1
        self._finish(rec, DISCARDED, origin=rec.node_a)

    # -------------------------------------------------------------- monitor

    def _on_monitor_tick(self, ev) -> None:
        rr = self._requests.get(ev.payload)
        if rr is None or rr.state in _TERMINAL:
            return
        cfg = self._monitor_cfg
        now = self._engine.now
        now_s = now / US_PER_S
        horizon = now_s - cfg.window_s - 1.0
        dels = rr.deliveries
        while dels and dels[0][0] < horizon:
            dels.pop(0)
        window = build_window_stats(dels, now_s, cfg.window_s)
        stats = WindowStats(rr.delivered, window.window_count,
                            window.window_mean_fidelity)
        req = rr.request
        action = monitor_step(cfg, rr.monitor, now_s, rr.started_s, stats,
                              req.monitor_rate_target,
                              req.monitor_min_fidelity)
        if action.kind in (DAMP, ADJUST_RATE):
            self._apply_rate_knob(rr)
        elif action.kind == ADJUST_FIDELITY:
            self._apply_fidelity_knob(rr)
        elif action.kind == SUSPEND:
            rr.state = "suspended"
            self._set_paused(rr, True)
            self.counters["suspensions"] += 1
            self._engine.schedule(int(round(action.until_s * US_PER_S)),
                                  "resume", payload=rr.request_id)
        elif action.kind == REPLAN:
            self._replan(rr, action.exclude_old_links)
        elif action.kind == TERMINATE:
            self._terminate(rr)
            return
        tick = int(round(cfg.tick_s * US_PER_S))
        self._engine.schedule(now + tick, "monitor_tick",
                              payload=rr.request_id)

    def _on_resume(self, ev) -> None:
        rr = self._requests.get(ev.payload)
        if rr is None or rr.state != "suspended":
            return
        rr.state = "active"
        self._set_paused(rr, False)
        if rr.plan is not None:
            for node in rr.plan.route:
                self._trigger(node, rr.request_id)

    def _apply_rate_knob(self, rr: RequestRuntime) -> None:
        knob = rr.monitor.rate_knob
        for span, task_id in rr.tasks.items():
            box = self._links.get(span)
            task = box.runtime.tasks.get(task_id) if box else None
            if task is not None:
                task.weight = knob

    def _apply_fidelity_knob(self, rr: RequestRuntime) -> None:
        floor = self._effective_floor(rr)
        if floor is None or rr.base_tree is None:
            return
        rate_fn = self._link_rates.__getitem__
        lat_fn = self._latency
        try:
            tree = augment_with_purification(rr.base_tree, floor, self._params,
                                             rate_fn, lat_fn)
        except InfeasibleFidelity:
            self.counters["floor_unreachable"] += 1
            return
        est = estimate_tree(tree, self._params, rate_fn, lat_fn)
        rr.plan = replace(rr.plan, tree=tree, node_rates=est.node_rates,
                          depths=est.depths,
                          purify_rounds=dict(est.purify_rounds),
                          root_latency_s=est.latency_s,
                          root_fidelity=est.fidelity,
                          l_target_s=2.0 * est.latency_s)

    # ------------------------------------------------------ predistribution

    def _init_predist(self) -> None:
        cfg = self._predist_cfg
        spans = self._superlink_spans
        if spans is None:
            routes = []
            for rr in self._requests.values():
                route = self._graph.shortest_path_hops(rr.request.src,
                                                       rr.request.dst)
                if route is not None and len(route) > 2:
                    routes.append(route)
            spans = select_superlinks(routes, cfg.superlinks, self._graph,
                                      self._params,
                                      link_rates=self._link_rates)
        for k, span in enumerate(spans):
            rid = f"predist-{k}"
            try:
                plan = plan_for_request(self._graph, span[0], span[1],
                                        self._params, request_id=rid,
                                        link_rates=self._link_rates)
            except NoFeasiblePath:  # pragma: no cover - spans come from routes
                continue
            pr = PredistRuntime(rid, span, plan)
            self._predist.append(pr)
            self._predist_by_rid[rid] = pr
            for leaf in plan.leaf_spans:
                self._ensure_task(pr, leaf, predist=True)
            self._stock.setdefault(span, [])
            log.info("superlink %s over %s, stock target %d", span,
                     plan.route, cfg.stock_target)
        if self._predist:
            tick = int(round(cfg.tick_s * US_PER_S))
            for k in range(len(self._predist)):
                self._engine.schedule(tick, "predist_tick", payload=k)

    def _on_predist_tick(self, ev) -> None:
        pr = self._predist[ev.payload]
        if pr.done:
            return
        cfg = self._predist_cfg
        stock = len(self._stock.get(pr.span, ()))
        if cfg.mode == "once":
            if stock >= cfg.stock_target:
                self._set_predist_active(pr, False)
                pr.done = True
                return
        else:
            want = predist_controller_step(stock, pr.active, cfg.low_water,
                                           cfg.stock_target)
            if want != pr.active:
                self._set_predist_active(pr, want)
        tick = int(round(cfg.tick_s * US_PER_S))
        self._engine.schedule(self._engine.now + tick, "predist_tick",
                              payload=ev.payload)

    def _set_predist_active(self, pr: PredistRuntime, active: bool) -> None:
        pr.active = active
        self._set_paused(pr, not active)
        log.info("superlink %s generation %s", pr.span,
                 "on" if active else "off")

    def _bank_stock(self, pr: PredistRuntime, rec: EpRecord,
                    node: int) -> None:
        now = self._engine.now
        # fresh policy birth: any deadline armed while the pair was being
        # assembled dies on its birth check, so stock outlives plan budgets
        new = replace(rec, request_id=PREDISTRIBUTED, cached=False,
                      policy_birth=now, version=(now, node))
        self._publish(node, new, "stocked")
        self._release_ep_task(rec.ep_id)
        self._stock.setdefault(rec.endpoints, []).append(rec.ep_id)
        self.counters["stocked"] += 1
        max_age = self._predist_cfg.max_age_s
        if max_age is not None:
            deadline = now + int(round(max_age * US_PER_S))
            self._engine.schedule(deadline, "ep_discard",
                                  payload=(rec.ep_id, now))
        self._engine.schedule(now, "stock_in", payload=rec.endpoints)

    def _on_stock_in(self, ev) -> None:
        """Fresh stock: offer the span to plans that lost or never had it."""
        span = ev.payload
        for rid in sorted(self._requests):
            if not self._stock.get(span):
                return
            rr = self._requests[rid]
            if rr.state != "active" or rr.plan is None \
                    or rr.walker is not None:
                continue
            if span in rr.plan.cached_spans:
                continue
            pos = {node: i for i, node in enumerate(rr.plan.route)}
            if span[0] not in pos or span[1] not in pos:
                continue
            self._replan(rr, exclude_old=False)

    def _claim_stock(self, rr: RequestRuntime, span: Span) -> bool:
        ids = self._stock.get(span)
        while ids:
            ep_id = ids.pop(0)
            rec = self._canonical.get(ep_id)
            if rec is None or rec.status != AVAILABLE \
                    or rec.request_id != PREDISTRIBUTED:
                continue  # stale entry
            now = self._engine.now
            origin = span[0]
            new = replace(rec, request_id=rr.request_id, policy_birth=now,
                          cached=True, version=(now, origin))
            self._publish(origin, new, "claimed")
            self._schedule_discard(new, rr.plan)
            self.counters["claims"] += 1
            for node in span:
                delay = 0 if node == origin else self._latency(origin, node)
                self._engine.schedule(now + delay, "ep_known", target=node,
                                      payload=rr.request_id)
            return True
        return False

    # ---------------------------------------------------------- walker mode

    def _euclid(self, a: int, b: int) -> float:
        xa, ya = self._coords[a]
        xb, yb = self._coords[b]
        return math.hypot(xa - xb, ya - yb)

    def _walker_retask(self, rr: RequestRuntime) -> None:
        w = rr.walker
        h = w.head_node
        desired = {_span(h, nb) for nb in self._graph.neighbors(h)
                   if nb not in w.visited}
        for span in list(rr.tasks):
            if span not in desired:
                self._remove_task(rr, span)
        for span in sorted(desired):
            self._ensure_task(rr, span)

    def _walker_reset(self, rr: RequestRuntime) -> None:
        w = rr.walker
        src = rr.request.src
        w.head_id = None
        w.head_node = src
        w.visited = {src}
        if rr.state == "active":
            self._walker_retask(rr)
            self._trigger(src, rr.request_id)

    def _on_walker_head(self, ev) -> None:
        self._trigger(ev.target, ev.payload)

    def _walker_step(self, rr: RequestRuntime, node: int,
                     recs_here: list[EpRecord]) -> None:
        w = rr.walker
        req = rr.request
        dst = req.dst
        if w.head_id is None:
            if node != req.src or w.head_node != req.src:
                return
            best = None
            for r in recs_here:
                other = r.other_end(node)
                if other in w.visited:
                    continue
                cur = self._canonical.get(r.ep_id)
                if cur is None or cur.status != AVAILABLE:
                    continue
                key = (self._euclid(other, dst), r.ep_id)
                if best is None or key < best[0]:
                    best = (key, cur, other)
            if best is None:
                return
            _, rec, other = best
            w.head_id = rec.ep_id
            w.head_node = other
            w.visited.add(other)
            self._walker_retask(rr)
            self._engine.send_classical(node, other, "walker_head",
                                        rr.request_id)
            return
        if node != w.head_node:
            return
        head = self._canonical.get(w.head_id)
        if head is None or head.status != AVAILABLE:
            return  # mid-swap or about to be reaped
        best = None
        for r in recs_here:
            if r.ep_id == w.head_id:
                continue
            other = r.other_end(node)
            if other in w.visited or other == req.src:
                continue
            cur = self._canonical.get(r.ep_id)
            if cur is None or cur.status != AVAILABLE:
                continue
            key = (self._euclid(other, dst), r.ep_id)
            if best is None or key < best[0]:
                best = (key, cur, other)
        if best is None:
            return
        _, rec, other = best
        cand = SwapCandidate(station=node, left=head, right=rec,
                             out_span=_span(req.src, other), hops_spanned=0)
        self._begin_swap(cand, rr)

    # ------------------------------------------------------------------ gc

    def _on_gc_tick(self, ev) -> None:
        gc = getattr(self._directory, "gc", None)
        if gc is not None:
            gc(self._engine.now)
        nxt = self._engine.now + 2 * US_PER_S
        if nxt <= self._t_end:
            self._engine.schedule(nxt, "gc_tick")
