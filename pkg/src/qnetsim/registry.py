"""Replicated entanglement-pair metadata.

Every node keeps a map ep_id -> record describing the pairs it has heard of.
Each state change is stamped with a (time, origin-node) version and announced;
receivers keep the highest version per pair (last writer wins, origin id
breaking ties). Two interchangeable carriers exist:

* ``ReplicatedDirectory``: the literal protocol. Each change fans out one
  update message per peer through the event engine; replicas apply them on
  delivery. Used for protocol-level tests and small consistency runs.

* ``SharedDirectory``: an equivalence-preserving shortcut for large runs.
  Version histories live in one shared table and a read by node r at time t
  returns exactly the versions whose announce time plus propagation delay to
  r has elapsed - the same answer the message-driven path would give, without
  materializing (n-1) deliveries per update. Broadcast message counts are
  still tallied.

Records here are metadata only; qubit/slot bookkeeping lives with the
simulation's physical layer.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional

from .params import PREDISTRIBUTED
from .werner import WernerState

# pair lifecycle
AVAILABLE = "available"
LOCKED_SWAP = "locked_swap"
LOCKED_PURIFY = "locked_purify"
CONSUMED = "consumed"
DISCARDED = "discarded"

LIVE_STATUSES = (AVAILABLE, LOCKED_SWAP, LOCKED_PURIFY)

# update kinds
CREATED = "created"
CONSUMED_K = "consumed"
PURIFIED = "purified"
SWAPPED = "swapped"
DISCARDED_K = "discarded"

TOMBSTONE_US = 1_000_000  # finished records linger this long before GC

DISTRIBUTED = "distributed"
CENTRALIZED = "centralized"


@dataclass(frozen=True, slots=True)
class EpRecord:
    """Snapshot of one entangled pair's metadata."""
    ep_id: int
    node_a: int            # lower endpoint id
    node_b: int
    request_id: str        # owning request, or the predistributed wildcard
    created_at: int
    policy_birth: int      # scheduling clock start (rebased when cache pairs bind)
    state: WernerState
    status: str
    purify_rounds_done: int = 0
    cached: bool = False   # True if this pair was claimed from predistributed stock
    version: tuple[int, int] = (0, -1)  # (time, origin node)

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.node_a, self.node_b)

    def other_end(self, node: int) -> int:
        return self.node_b if node == self.node_a else self.node_a


@dataclass(frozen=True, slots=True)
class RegistryUpdate:
    kind: str
    record: EpRecord
    t_send: int
    origin: int

    @property
    def version(self) -> tuple[int, int]:
        return self.record.version


def lww_accepts(stored: Optional[EpRecord], upd: RegistryUpdate) -> bool:
    """Keep the update? Higher version wins; equal version re-applies only
    when it comes from the same origin (per-channel FIFO makes that safe)."""
    if stored is None:
        return True
    if upd.record.version > stored.version:
        return True
    return upd.record.version == stored.version and upd.origin == stored.version[1]


def _match(rec: EpRecord, request_id: Optional[str],
           endpoints: Optional[tuple[int, int]],
           node: Optional[int]) -> bool:
    if request_id is not None and rec.request_id != request_id \
            and rec.request_id != PREDISTRIBUTED:
        return False
    if endpoints is not None and rec.endpoints != endpoints:
        return False
    if node is not None and node not in rec.endpoints:
        return False
    return True


class NodeReplica:
    """Message-driven replica: the map one node actually holds."""

    def __init__(self, owner: int, clock: Callable[[], int]):
        self.owner = owner
        self._clock = clock
        self.records: dict[int, EpRecord] = {}

    def apply_update(self, upd: RegistryUpdate) -> bool:
        stored = self.records.get(upd.record.ep_id)
        if not lww_accepts(stored, upd):
            return False
        self.records[upd.record.ep_id] = upd.record
        return True

    def gc(self, now: int) -> int:
        dead = [eid for eid, r in self.records.items()
                if r.status in (CONSUMED, DISCARDED)
                and now - r.version[0] > TOMBSTONE_US]
        for eid in dead:
            del self.records[eid]
        return len(dead)

    def query_available(self, request_id: Optional[str] = None,
                        endpoints: Optional[tuple[int, int]] = None,
                        node: Optional[int] = None) -> list[EpRecord]:
        self.gc(self._clock())
        out = [r for r in self.records.values()
               if r.status == AVAILABLE and _match(r, request_id, endpoints, node)]
        out.sort(key=lambda r: r.ep_id)
        return out


class ReplicatedDirectory:
    """Directory backed by per-node replicas and real update messages.

    ``publish`` returns the list of (dst, update) deliveries the caller must
    route through the engine (the origin's replica is updated in place).
    Centralized mode sends a single update to the center node.
    """

    def __init__(self, node_ids: Iterable[int], clock: Callable[[], int],
                 mode: str = DISTRIBUTED, center: Optional[int] = None):
        self.mode = mode
        self.center = center
        self._clock = clock
        self.replicas = {nid: NodeReplica(nid, clock) for nid in node_ids}
        self.updates_published = 0
        self.update_messages = 0

    def publish(self, origin: int, record: EpRecord, kind: str
                ) -> list[tuple[int, RegistryUpdate]]:
        upd = RegistryUpdate(kind, record, self._clock(), origin)
        self.replicas[origin].apply_update(upd)
        self.updates_published += 1
        if self.mode == CENTRALIZED:
            targets = [] if origin == self.center else [self.center]
        else:
            targets = [nid for nid in self.replicas if nid != origin]
        self.update_messages += len(targets)
        return [(dst, upd) for dst in targets]

    def deliver(self, dst: int, upd: RegistryUpdate) -> bool:
        return self.replicas[dst].apply_update(upd)

    def view(self, node: int) -> NodeReplica:
        return self.replicas[node]

    def snapshot_maps(self) -> dict[int, dict[int, EpRecord]]:
        return {nid: dict(rep.records) for nid, rep in self.replicas.items()}


class SharedDirectory:
    """Version-history table answering reads with propagation-delay semantics.

    ``max_prop_us`` bounds the network's classical propagation delay; a record
    whose latest version left the available state more than that long ago can
    no longer appear available to any reader, which keeps query scans bounded
    by live churn instead of total history size.
    """

    def __init__(self, node_ids: Iterable[int], clock: Callable[[], int],
                 latency_us: Callable[[int, int], int], max_prop_us: int,
                 mode: str = DISTRIBUTED, center: Optional[int] = None):
        self.mode = mode
        self.center = center
        self._clock = clock
        self._latency = latency_us
        self._max_prop = max_prop_us
        self._node_ids = list(node_ids)
        self._histories: dict[int, list[RegistryUpdate]] = {}
        self._live: dict[int, EpRecord] = {}      # ep_id -> latest available version
        self._live_req: dict[str, set[int]] = {}  # request -> live ep ids
        self._req_of: dict[int, str] = {}
        self._recent: list[tuple[int, int]] = []  # (t_send, ep_id) of departures
        self.updates_published = 0
        self.update_messages = 0
        self._views: dict[int, "DirectoryView"] = {}

    def _drop_live(self, ep_id: int) -> None:
        if ep_id in self._live:
            del self._live[ep_id]
            rid = self._req_of.pop(ep_id)
            bucket = self._live_req.get(rid)
            bucket.discard(ep_id)
            if not bucket:
                del self._live_req[rid]

    def publish(self, origin: int, record: EpRecord, kind: str) -> list:
        now = self._clock()
        upd = RegistryUpdate(kind, record, now, origin)
        hist = self._histories.setdefault(record.ep_id, [])
        hist.append(upd)
        if len(hist) > 8:
            # drop versions no reader can still observe; keep one older anchor
            horizon = now - 2 * TOMBSTONE_US
            while len(hist) > 1 and hist[1].t_send < horizon:
                hist.pop(0)
        if record.status == AVAILABLE:
            old_rid = self._req_of.get(record.ep_id)
            if old_rid is not None and old_rid != record.request_id:
                self._drop_live(record.ep_id)  # rebound to another request
            self._live[record.ep_id] = record
            if record.ep_id not in self._req_of:
                self._req_of[record.ep_id] = record.request_id
                self._live_req.setdefault(record.request_id,
                                          set()).add(record.ep_id)
            # a reader may briefly still see the pre-rebind version
            if old_rid is not None and old_rid != record.request_id:
                self._recent.append((now, record.ep_id))
        else:
            if record.ep_id in self._live:
                self._drop_live(record.ep_id)
                self._recent.append((now, record.ep_id))
        self.updates_published += 1
        if self.mode == CENTRALIZED:
            self.update_messages += 0 if origin == self.center else 1
        else:
            self.update_messages += len(self._node_ids) - 1
        return []

    def deliver(self, dst: int, upd: RegistryUpdate) -> bool:  # pragma: no cover
        raise RuntimeError("shared directory has no explicit deliveries")

    def visible_record(self, reader: int, ep_id: int,
                       now: Optional[int] = None) -> Optional[EpRecord]:
        hist = self._histories.get(ep_id)
        if not hist:
            return None
        if now is None:
            now = self._clock()
        best: Optional[EpRecord] = None
        for upd in hist:
            delay = 0 if upd.origin == reader else self._latency(upd.origin, reader)
            if upd.t_send + delay <= now:
                if best is None or upd.record.version >= best.version:
                    best = upd.record
        return best

    def _queryable_ids(self, now: int,
                       request_id: Optional[str] = None) -> list[int]:
        recent = self._recent
        if recent and recent[0][0] < now - self._max_prop:
            cutoff = now - self._max_prop
            self._recent = recent = [(t, e) for (t, e) in recent if t >= cutoff]
        if request_id is None:
            ids = list(self._live.keys())
        else:
            ids = sorted(self._live_req.get(request_id, ()))
            if request_id != PREDISTRIBUTED:
                ids.extend(sorted(self._live_req.get(PREDISTRIBUTED, ())))
        ids.extend(e for _, e in recent)
        return ids

    def query_available(self, reader: int, request_id: Optional[str] = None,
                        endpoints: Optional[tuple[int, int]] = None,
                        node: Optional[int] = None,
                        now: Optional[int] = None) -> list[EpRecord]:
        if now is None:
            now = self._clock()
        out = []
        seen = set()
        for ep_id in self._queryable_ids(now, request_id):
            if ep_id in seen:
                continue
            seen.add(ep_id)
            rec = self.visible_record(reader, ep_id, now)
            if rec is not None and rec.status == AVAILABLE \
                    and _match(rec, request_id, endpoints, node):
                out.append(rec)
        out.sort(key=lambda r: r.ep_id)
        return out

    def gc(self, now: int) -> int:
        dead = []
        for ep_id, hist in self._histories.items():
            last = hist[-1]
            if last.record.status in (CONSUMED, DISCARDED) \
                    and now - last.t_send > 2 * TOMBSTONE_US:
                dead.append(ep_id)
        for ep_id in dead:
            del self._histories[ep_id]
        return len(dead)

    def view(self, node: int) -> "DirectoryView":
        v = self._views.get(node)
        if v is None:
            v = DirectoryView(self, node)
            self._views[node] = v
        return v

    def snapshot_maps(self) -> dict[int, dict[int, EpRecord]]:
        now = self._clock()
        out: dict[int, dict[int, EpRecord]] = {}
        for nid in self._node_ids:
            m: dict[int, EpRecord] = {}
            for ep_id in self._histories:
                rec = self.visible_record(nid, ep_id, now)
                if rec is not None and not (
                        rec.status in (CONSUMED, DISCARDED)
                        and now - rec.version[0] > TOMBSTONE_US):
                    m[ep_id] = rec
            out[nid] = m
        return out


class DirectoryView:
    """Read facade bound to one node, mirroring NodeReplica's query surface."""

    def __init__(self, directory: SharedDirectory, owner: int):
        self._dir = directory
        self.owner = owner

    def query_available(self, request_id: Optional[str] = None,
                        endpoints: Optional[tuple[int, int]] = None,
                        node: Optional[int] = None) -> list[EpRecord]:
        return self._dir.query_available(self.owner, request_id=request_id,
                                         endpoints=endpoints, node=node)
