"""Elementary pair generation on links.

A link runs heralded attempts every ``attempt_period_us``; each succeeds with
the link budget's ``p_success``. Rather than simulating every attempt, the
runtime draws the geometric number of attempts until the next success, so the
event queue sees one event per delivered pair (tens of attempts collapse into
one draw with the exact same success-time distribution).

Several generation tasks can share a link. Demand tasks (driven by an active
request) split successes through smooth weighted round robin; predistribution
tasks are strictly lower priority and absorb only the successes no demand
task can take, either because none is registered or because all are at their
outstanding cap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

Span = tuple[int, int]


@dataclass
class LinkGenTask:
    """One consumer of a link's successes."""

    task_id: str
    request_id: str
    predist: bool = False
    weight: float = 1.0
    outstanding: int = 0
    paused: bool = False
    produced: int = 0


class SmoothWrr:
    """Smooth weighted round robin over a changing task set.

    Every pick advances each competing task's credit by its weight and takes
    the highest credit (lowest id on ties), then charges the winner the total
    weight. A 2:1 split comes out A B A A B A, never A A B repeated.
    """

    def __init__(self):
        self._credit: dict[str, float] = {}

    def forget(self, task_id: str) -> None:
        self._credit.pop(task_id, None)

    def pick(self, tasks: list[LinkGenTask]) -> Optional[LinkGenTask]:
        if not tasks:
            return None
        total = sum(t.weight for t in tasks)
        if total <= 0.0:
            return None
        best: Optional[LinkGenTask] = None
        for t in tasks:
            credit = self._credit.get(t.task_id, 0.0) + t.weight
            self._credit[t.task_id] = credit
            if best is None or credit > self._credit[best.task_id] \
                    or (credit == self._credit[best.task_id]
                        and t.task_id < best.task_id):
                best = t
        self._credit[best.task_id] -= total
        return best


class LinkRuntime:
    """Success sampling and task arbitration for one link."""

    def __init__(self, span: Span, p_success: float, attempt_period_us: int,
                 rng: np.random.Generator, outstanding_cap: int):
        self.span = span
        self.p_success = p_success
        self.attempt_period_us = attempt_period_us
        self.outstanding_cap = outstanding_cap
        self._rng = rng
        self.tasks: dict[str, LinkGenTask] = {}
        self._demand_wrr = SmoothWrr()
        self._predist_wrr = SmoothWrr()
        self.successes = 0
        self.deferrals = 0

    # -- task management ------------------------------------------------

    def add_task(self, task: LinkGenTask) -> None:
        self.tasks[task.task_id] = task

    def remove_task(self, task_id: str) -> Optional[LinkGenTask]:
        task = self.tasks.pop(task_id, None)
        if task is not None:
            self._demand_wrr.forget(task_id)
            self._predist_wrr.forget(task_id)
        return task

    def task_for_request(self, request_id: str) -> Optional[LinkGenTask]:
        for t in self.tasks.values():
            if t.request_id == request_id:
                return t
        return None

    @property
    def active(self) -> bool:
        return bool(self.tasks)

    # -- sampling ---------------------------------------------------------

    def next_gap_us(self) -> int:
        """Microseconds until the next heralded success."""
        attempts = int(self._rng.geometric(self.p_success))
        return attempts * self.attempt_period_us

    def defer_gap_us(self) -> int:
        """Back off one attempt period without consuming randomness."""
        self.deferrals += 1
        return self.attempt_period_us

    # -- arbitration ------------------------------------------------------

    def _eligible(self, predist: bool) -> list[LinkGenTask]:
        return [t for t in self.tasks.values()
                if t.predist == predist and not t.paused
                and t.outstanding < self.outstanding_cap]

    def assign_success(self) -> Optional[LinkGenTask]:
        """Pick the task that takes this success; None means defer."""
        task = self._demand_wrr.pick(sorted(
            self._eligible(False), key=lambda t: t.task_id))
        if task is None:
            task = self._predist_wrr.pick(sorted(
                self._eligible(True), key=lambda t: t.task_id))
        if task is not None:
            task.outstanding += 1
            task.produced += 1
            self.successes += 1
        return task

    def note_released(self, task_id: str) -> None:
        task = self.tasks.get(task_id)
        if task is not None and task.outstanding > 0:
            task.outstanding -= 1
