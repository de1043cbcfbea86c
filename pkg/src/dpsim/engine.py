"""Discrete-event engine: virtual nanosecond clock and an ordered event queue.

Events are totally ordered by (fire_at, seq) where seq is the insertion
sequence number, so equal-timestamp events fire in insertion order and runs
are reproducible without floating-point epsilons.  Python integers never
overflow, so SimTime arithmetic is exact.
"""

import heapq

# Time unit helpers (integer nanoseconds).
US = 1_000
MS = 1_000_000
SEC = 1_000_000_000

# Event kinds.
ARRIVAL = 0
PREEMPT_TIMER = 1
IO_TIMER = 2
TASK_DONE = 3
CORE_WAKE = 4
EXPERIMENT_END = 5

KIND_NAMES = {
    ARRIVAL: "Arrival",
    PREEMPT_TIMER: "PreemptionTimerFire",
    IO_TIMER: "IoTimerFire",
    TASK_DONE: "TaskCompletion",
    CORE_WAKE: "CoreWake",
    EXPERIMENT_END: "ExperimentEnd",
}

# Handle slots: [fire_at, seq, kind, payload, alive]
_FIRE_AT = 0
_SEQ = 1
_KIND = 2
_PAYLOAD = 3
_ALIVE = 4


class SimulationError(Exception):
    """An engine-level invariant was violated (a bug in simulation logic)."""


class SchedulingInPastError(SimulationError):
    """An event was scheduled with fire_at earlier than the current clock."""


class Engine:
    """Virtual clock plus event queue.

    Handlers are invoked as ``handler(kind, payload)``; the engine itself
    knows nothing about scheduling policy.
    """

    __slots__ = ("now", "handler", "_heap", "_seq", "events_processed")

    def __init__(self, handler=None):
        self.now = 0
        self.handler = handler
        self._heap = []
        self._seq = 0
        self.events_processed = 0

    def schedule(self, fire_at, kind, payload=None):
        """Queue an event; returns a handle usable with cancel()."""
        if fire_at < self.now:
            raise SchedulingInPastError(
                f"schedule {KIND_NAMES.get(kind, kind)} at {fire_at} < now {self.now}"
            )
        entry = [fire_at, self._seq, kind, payload, True]
        self._seq += 1
        heapq.heappush(self._heap, entry)
        return entry

    def cancel(self, handle):
        """Cancel a pending event.

        Returns True iff the event had not yet fired.  Idempotent: cancelling
        twice, or cancelling an already-fired event, returns False.
        """
        if handle[_ALIVE]:
            handle[_ALIVE] = False
            return True
        return False

    def run_until(self, limit):
        """Process all events with fire_at <= limit in (fire_at, seq) order."""
        heap = self._heap
        while heap and heap[0][_FIRE_AT] <= limit:
            entry = heapq.heappop(heap)
            if not entry[_ALIVE]:
                continue
            entry[_ALIVE] = False
            self.now = entry[_FIRE_AT]
            self.handler(entry[_KIND], entry[_PAYLOAD])
            self.events_processed += 1
        if limit > self.now:
            self.now = limit

    def pending(self):
        return sum(1 for e in self._heap if e[_ALIVE])
