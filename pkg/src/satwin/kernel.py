"""Deterministic discrete-event kernel.

Time is integer microseconds throughout the simulator: event ordering is
exact on every platform, with no floating-point drift. Simultaneous events
fire in insertion order (FIFO tie-break via a monotonic sequence counter).
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Callable

USEC = 1
MSEC = 1_000
SEC = 1_000_000


def fmt_time(t_us: int) -> str:
    """Render microseconds as decimal seconds with fixed 6-digit precision."""
    sign = "-" if t_us < 0 else ""
    t_us = abs(t_us)
    return f"{sign}{t_us // SEC}.{t_us % SEC:06d}"


class SimError(Exception):
    """Internal invariant violation; maps to exit code 3 in the CLI."""


class SchedulingError(SimError):
    """Raised when a handler schedules an event in the past (a logic bug)."""


@dataclass(frozen=True, slots=True)
class Event:
    id: int
    fire_at: int
    seqno: int
    kind: str
    fn: Callable[[], None]


class Kernel:
    """Virtual clock plus an ordered, cancellable event queue.

    Single-threaded by design: one kernel per simulation instance, no shared
    mutable state. One seeded PRNG is owned here; the core model draws
    nothing from it, but extensions (jitter etc.) must use this instance so
    that a (scenario, seed) pair stays reproducible.
    """

    def __init__(self, seed: int = 0):
        self.now: int = 0
        self.rng = random.Random(seed)
        self._heap: list[tuple[int, int, int]] = []  # (fire_at, seqno, id)
        self._pending: dict[int, Event] = {}
        self._next_seq = 0
        self._next_id = 1

    def schedule(self, at: int, fn: Callable[[], None], kind: str = "event") -> int:
        if at < self.now:
            raise SchedulingError(
                f"event {kind!r} scheduled at {fmt_time(at)} before clock {fmt_time(self.now)}"
            )
        eid = self._next_id
        self._next_id += 1
        ev = Event(eid, at, self._next_seq, kind, fn)
        self._next_seq += 1
        self._pending[eid] = ev
        heapq.heappush(self._heap, (at, ev.seqno, eid))
        return eid

    def schedule_in(self, delay: int, fn: Callable[[], None], kind: str = "event") -> int:
        return self.schedule(self.now + delay, fn, kind)

    def cancel(self, eid: int) -> bool:
        """True if the event was still pending; cancelled events never fire."""
        return self._pending.pop(eid, None) is not None

    def pending(self) -> int:
        return len(self._pending)

    def run_until(self, t_end: int) -> int:
        """Process every event with fire_at <= t_end, in (time, seqno) order.

        Handlers may enqueue further events at or before t_end; those are
        processed in this run too. Returns the number of events executed.
        On return the clock sits at t_end.
        """
        steps = 0
        heap = self._heap
        pending = self._pending
        while heap and heap[0][0] <= t_end:
            fire_at, _, eid = heapq.heappop(heap)
            ev = pending.pop(eid, None)
            if ev is None:
                continue  # cancelled
            assert fire_at >= self.now, "event queue broke monotonicity"
            self.now = fire_at
            ev.fn()
            steps += 1
        if t_end > self.now:
            self.now = t_end
        return steps
