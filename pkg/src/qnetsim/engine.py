"""Discrete-event core: integer-microsecond clock, deterministic event order,
named random streams.

Events fire in (time, insertion sequence) order, so two runs that schedule the
same events in the same order replay identically. All randomness is drawn from
streams keyed by (node, purpose tag), never from a shared global generator, so
adding a consumer in one place cannot shift draws elsewhere.
"""
from __future__ import annotations

import heapq
import zlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

US_PER_S = 1_000_000

SimTime = int  # microseconds


class SchedulingInPast(Exception):
    pass


class UnknownNode(Exception):
    pass


@dataclass(slots=True)
class Event:
    fire_at: int
    seq: int
    kind: str
    target: object
    payload: object


@dataclass
class SimSummary:
    end_time: int
    processed: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.processed.values())


def _stream_seed(master_seed: int, node_key: int, tag: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        entropy=(master_seed & 0xFFFFFFFFFFFF, node_key + 1, zlib.crc32(tag.encode()))
    )


class Engine:
    """Event loop with classical-message helper.

    latency_us(src, dst) supplies message delays; it must raise UnknownNode for
    ids outside the network.
    """

    def __init__(self, master_seed: int = 0,
                 latency_us: Optional[Callable[[int, int], int]] = None):
        self.now: int = 0
        self.master_seed = master_seed
        self.latency_us = latency_us
        self._seq = 0
        self._queue: list[tuple[int, int, Event]] = []
        self._handlers: dict[str, Callable[[Event], None]] = {}
        self._streams: dict[tuple[int, str], np.random.Generator] = {}
        self.message_counts: Counter = Counter()

    # -- scheduling ---------------------------------------------------------

    def schedule(self, fire_at: int, kind: str, target: object = None,
                 payload: object = None) -> Event:
        if fire_at < self.now:
            raise SchedulingInPast(f"t={fire_at} < now={self.now}")
        ev = Event(fire_at, self._seq, kind, target, payload)
        self._seq += 1
        heapq.heappush(self._queue, (fire_at, ev.seq, ev))
        return ev

    def send_classical(self, src: int, dst: int, kind: str,
                       payload: object = None) -> int:
        """Schedule delivery of a classical message; returns the delivery time."""
        if src == dst:
            raise ValueError("classical message to self")
        if self.latency_us is None:
            raise RuntimeError("engine has no latency function")
        arrive = self.now + self.latency_us(src, dst)
        self.schedule(arrive, kind, target=dst, payload=payload)
        self.message_counts[kind] += 1
        return arrive

    def on(self, kind: str, handler: Callable[[Event], None]) -> None:
        self._handlers[kind] = handler

    # -- execution ----------------------------------------------------------

    def run_until(self, t_end: int) -> SimSummary:
        if t_end < self.now:
            raise SchedulingInPast(f"run_until({t_end}) with now={self.now}")
        summary = SimSummary(end_time=t_end)
        queue = self._queue
        handlers = self._handlers
        while queue and queue[0][0] <= t_end:
            _, _, ev = heapq.heappop(queue)
            self.now = ev.fire_at
            summary.processed[ev.kind] += 1
            handler = handlers.get(ev.kind)
            if handler is None:
                raise KeyError(f"no handler for event kind {ev.kind!r}")
            handler(ev)
        self.now = t_end
        return summary

    @property
    def pending(self) -> int:
        return len(self._queue)

    # -- randomness ---------------------------------------------------------

    def rng(self, node_key: int, tag: str) -> np.random.Generator:
        """Named stream, created on first use; (node, tag) fully determines it."""
        key = (node_key, tag)
        gen = self._streams.get(key)
        if gen is None:
            gen = np.random.Generator(np.random.PCG64(
                _stream_seed(self.master_seed, node_key, tag)))
            self._streams[key] = gen
        return gen
