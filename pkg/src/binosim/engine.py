"""Virtual-time discrete-event core.

Time is an integer number of milliseconds. Events are totally ordered by
``(fire_at, sequence)``; the sequence is assigned at insertion, so two events
scheduled for the same instant fire in the order they were scheduled.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

HEARTBEAT = "heartbeat"
PROGRESS = "task-progress-quantum"
FAULT = "fault-activation"
WAKEUP = "speculator-wakeup"
FETCH = "shuffle-fetch"
ARRIVAL = "job-arrival"
COMPLETE = "attempt-complete"


class SimulationError(RuntimeError):
    pass


@dataclass(eq=False)
class SimEvent:
    fire_at: int
    sequence: int
    kind: str
    payload: str
    handler: Optional[Callable[[], Any]] = field(default=None, repr=False)
    pending: bool = True

    def sort_key(self) -> tuple[int, int]:
        return (self.fire_at, self.sequence)

    def __lt__(self, other: "SimEvent") -> bool:
        return (self.fire_at, self.sequence) < (other.fire_at, other.sequence)


@dataclass
class SimSummary:
    events_processed: int
    final_time: int
    queue_empty: bool


class RngStreams:
    """Independent named random streams derived from one 64-bit seed.

    Each stream is seeded from a digest of ``(seed, name)`` so adding a new
    consumer never shifts the draws seen by existing ones.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._streams: dict[str, random.Random] = {}

    def stream(self, name: str) -> random.Random:
        rng = self._streams.get(name)
        if rng is None:
            digest = hashlib.sha256(f"{self.seed}:{name}".encode()).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            self._streams[name] = rng
        return rng


class Simulator:
    def __init__(self, max_events: int = 5_000_000, record_trace: bool = False):
        self.now = 0
        self.max_events = max_events
        self._queue: list[SimEvent] = []
        self._sequence = 0
        self._processed = 0
        self.record_trace = record_trace
        self.trace: list[str] = []
        self.dequeued: list[tuple[int, int]] = []

    def schedule(
        self,
        fire_at: int,
        kind: str,
        handler: Optional[Callable[[], Any]] = None,
        payload: str = "",
    ) -> SimEvent:
        fire_at = int(fire_at)
        if fire_at < self.now:
            raise SimulationError(
                f"cannot schedule {kind!r} at t={fire_at}, current time is {self.now}"
            )
        event = SimEvent(fire_at, self._sequence, kind, payload, handler)
        self._sequence += 1
        heapq.heappush(self._queue, event)
        return event

    def schedule_in(self, delay: int, kind: str, handler=None, payload: str = "") -> SimEvent:
        return self.schedule(self.now + int(delay), kind, handler, payload)

    def cancel(self, handle: Optional[SimEvent]) -> bool:
        if handle is None or not handle.pending:
            return False
        handle.pending = False
        return True

    def pending_count(self) -> int:
        return sum(1 for e in self._queue if e.pending)

    def note(self, kind: str, payload: str) -> None:
        """Append a non-event record (warnings, decisions) to the trace."""
        if self.record_trace:
            self.trace.append(f"{self.now},-,{kind},{payload}")

    def run(
        self,
        until: Optional[int] = None,
        keep_order: bool = False,
        post_event: Optional[Callable[[], Any]] = None,
        stop: Optional[Callable[[], bool]] = None,
    ) -> SimSummary:
        processed = 0
        while self._queue:
            if stop is not None and stop():
                break
            head = self._queue[0]
            if not head.pending:
                heapq.heappop(self._queue)
                continue
            if until is not None and head.fire_at > until:
                break
            heapq.heappop(self._queue)
            head.pending = False
            self.now = head.fire_at
            processed += 1
            self._processed += 1
            if self._processed > self.max_events:
                raise SimulationError(
                    f"event limit {self.max_events} exceeded at t={self.now} "
                    f"(last event {head.kind} {head.payload})"
                )
            if keep_order:
                self.dequeued.append(head.sort_key())
            if self.record_trace:
                self.trace.append(f"{head.fire_at},{head.sequence},{head.kind},{head.payload}")
            if head.handler is not None:
                head.handler()
            if post_event is not None:
                post_event()
        return SimSummary(processed, self.now, not any(e.pending for e in self._queue))

    def dump_trace(self) -> str:
        return "".join(line + "\n" for line in self.trace)
