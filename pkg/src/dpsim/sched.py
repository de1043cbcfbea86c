"""Scheduling data types shared by all policies.

Four policies are supported:

  dfcfs        per-core FIFO, run-to-completion, no preemption, no stealing
  stealing     dfcfs plus work stealing from other cores' local queues
  centralized  dedicated I/O cores run all stack work FCFS and forward tasks
               to the least-loaded application core (cross-core message cost
               charged each way)
  cygnus       local + global queues with batch pull N, preemption quanta T
               delivered through timer activations, and I/O-over-low-priority
               scheduling

Preempted tasks return to the tail of the global queue by default, which
preserves centralized-FCFS ordering across cores; `preempt_to_local`
switches to the per-core run queue instead.
"""

from dataclasses import dataclass

POLICIES = ("dfcfs", "centralized", "stealing", "cygnus")


class Task:
    """An application (or I/O) user-level thread with remaining work."""

    __slots__ = (
        "req_id",
        "app",
        "kind",
        "total_ns",
        "remaining_ns",
        "arrival",
        "low_priority",
        "epoch_ns",
        "state",
    )

    def __init__(self, req_id, app, total_ns, arrival, kind="application"):
        self.req_id = req_id
        self.app = app
        self.kind = kind
        self.total_ns = total_ns
        self.remaining_ns = total_ns
        self.arrival = arrival
        self.low_priority = False
        self.epoch_ns = 0  # on-CPU time since last enqueue
        self.state = "ready"

    def __repr__(self):
        return f"Task({self.req_id}, rem={self.remaining_ns}, {self.state})"


@dataclass(frozen=True)
class SchedulerParams:
    batch_pull_n: int = 1  # 0 = unlimited
    quanta_ns: int = 10_000  # 0 = infinite (no preemption)
    preempt_interval_ns: int = 10_000
    io_batch: int = 32
    io_cores: int = 1  # centralized only
    pull_charge_cycles: int = 0  # global-queue contention charge per pull
    preempt_to_local: bool = False

    def __post_init__(self):
        if self.batch_pull_n < 0:
            raise ValueError("batch_pull_n must be >= 0 (0 = unlimited)")
        if self.quanta_ns < 0 or self.preempt_interval_ns <= 0:
            raise ValueError("quanta/preemption interval out of range")
        if self.io_batch < 1:
            raise ValueError("io_batch must be >= 1")


class Core:
    """One simulated core: local run queue, running task, armed timer."""

    __slots__ = (
        "id",
        "app",
        "role",
        "rx",
        "local",
        "running",
        "run_start",
        "done_handle",
        "timer_handle",
        "io_pending",
        "served_low_pri",
        "due_io_timers",
        "busy_ns",
    )

    def __init__(self, core_id, app=None, role="app"):
        from collections import deque

        self.id = core_id
        self.app = app
        self.role = role
        self.rx = deque()
        self.local = deque()
        self.running = None
        self.run_start = 0
        self.done_handle = None
        self.timer_handle = None
        self.io_pending = None
        self.served_low_pri = False
        self.due_io_timers = []
        self.busy_ns = 0


def on_task_ready(task, global_queue):
    """Enqueue a ready task at the tail of the global queue."""
    if task.state in ("queued", "running"):
        raise ValueError(f"double enqueue of {task!r}")
    task.state = "queued"
    global_queue.append(task)


def pull_from_global(core, global_queue, batch_pull_n):
    """Move up to N tasks from the global head to the local tail (FIFO).

    N = 0 means unlimited.  Returns the number of tasks moved; requires an
    empty local queue.
    """
    if core.local:
        raise ValueError("pull_from_global requires an empty local queue")
    n = batch_pull_n if batch_pull_n > 0 else len(global_queue)
    moved = 0
    while moved < n and global_queue:
        core.local.append(global_queue.popleft())
        moved += 1
    return moved


def least_loaded(cores):
    """Application core with the shortest queue; ties go to the lowest id."""
    best = None
    best_load = None
    for c in cores:
        load = len(c.local) + (1 if c.running is not None else 0)
        if best_load is None or load < best_load:
            best, best_load = c, load
    return best
