"""Single-run simulation: wires workloads, the I/O stack model, and a
scheduling policy over the event engine.

Event flow per request (decentralized policies): an arrival is steered to a
core's RX queue; an I/O slice on that core charges the RX stack cost and
spawns an application task; the task runs under the policy's queueing
rules; completion charges the TX stack cost plus two gate crossings and
records the end-to-end latency.

The centralized baseline instead runs all stack work FCFS on dedicated I/O
cores, forwarding tasks to the least-loaded application core with a
cross-core message charge each way.

A run is single-threaded and fully determined by (config, seed).  Cores
react to new work either synchronously (the core that produced the work
dispatches first, within the same event) or through same-timestamp wake
events ordered by insertion sequence, so runs are reproducible.
"""

from collections import deque

from dpsim.costs import CostModel
from dpsim.engine import (
    ARRIVAL,
    CORE_WAKE,
    EXPERIMENT_END,
    IO_TIMER,
    PREEMPT_TIMER,
    TASK_DONE,
    Engine,
    SimulationError,
)
from dpsim.metrics import LatencyHistogram, SimSummary
from dpsim.rng import (
    STREAM_ARRIVAL,
    STREAM_SERVICE,
    STREAM_STEERING,
    RngStream,
)
from dpsim.sched import (
    POLICIES,
    Core,
    SchedulerParams,
    Task,
    least_loaded,
    on_task_ready,
    pull_from_global,
)

# Core.running sentinels besides an application Task.
IO_RUNNING = object()  # the core's I/O thread holds the core
ACT_BUSY = object()  # activation processing holds the core


class Packet:
    __slots__ = ("req_id", "arrival", "service_ns", "app", "core_id", "size")

    def __init__(self, req_id, arrival, service_ns, app, core_id, size):
        self.req_id = req_id
        self.arrival = arrival
        self.service_ns = service_ns
        self.app = app
        self.core_id = core_id
        self.size = size


class IoTimer:
    __slots__ = ("id", "core_id", "deadline", "purpose", "serviced_at", "handle", "cancelled")

    def __init__(self, timer_id, core_id, deadline, purpose):
        self.id = timer_id
        self.core_id = core_id
        self.deadline = deadline
        self.purpose = purpose
        self.serviced_at = None
        self.handle = None
        self.cancelled = False


class AppRun:
    """Mutable per-application state for one run."""

    def __init__(self, spec, index, seed, record_trace):
        self.spec = spec
        self.name = spec.name
        self.index = index
        self.cores = []
        self.global_queue = deque()
        base = 16 * index
        s = seed + getattr(spec, "seed_offset", 0)
        self.arrival_stream = RngStream(s, base + STREAM_ARRIVAL)
        self.service_stream = RngStream(s, base + STREAM_SERVICE)
        self.steer_stream = RngStream(s, base + STREAM_STEERING)
        self.interarrival_ns = 1e9 / spec.load_ops
        self.arrivals = 0
        self.completions = 0
        self.in_flight = 0
        self.drops = 0
        self.activations = 0
        self.stale_activations = 0
        self.preemptions = 0
        self.violations = 0
        self.next_req = 0
        self.hist = LatencyHistogram()
        self.trace = [] if record_trace else None
        # time-weighted in-flight tracking for saturation detection
        self.if_area = 0.0
        self.if_last_t = 0
        self.if_area_half = None


class Simulation:
    def __init__(
        self,
        policy,
        apps,
        duration_ns,
        cost=None,
        params=None,
        seed=1,
        warmup_ns=0,
        rx_capacity=0,
        rtt_ns=0,
        record_trace=False,
    ):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        if not apps:
            raise ValueError("at least one application required")
        if duration_ns <= warmup_ns:
            raise ValueError("duration must exceed warmup")
        self.policy = policy
        self.cost = cost or CostModel()
        self.params = params or SchedulerParams()
        self.seed = seed
        self.duration_ns = int(duration_ns)
        self.warmup_ns = int(warmup_ns)
        self.rx_capacity = rx_capacity  # 0 = unbounded
        self.rtt_ns = rtt_ns
        self.record_trace = record_trace

        if policy == "centralized" and self.params.io_cores < 1:
            raise ValueError("centralized policy needs io_cores >= 1")

        c = self.cost
        self.stack_rx_ns = c.stack_rx_ns
        self.stack_tx_ns = c.stack_tx_ns
        self.gate2_ns = 2 * c.gate_switch_ns
        self.act_ns = c.activation_ns
        self.msg_hop_ns = c.msg_hop_ns
        self.quanta_ns = self.params.quanta_ns  # 0 = infinite
        self.interval_ns = self.params.preempt_interval_ns
        self.pull_charge_ns = c.cycles_to_ns(self.params.pull_charge_cycles)
        # TX stack + enter/exit gate pair charged at the end of each app task
        self.task_tail_ns = self.gate2_ns + self.stack_tx_ns if policy != "centralized" else 0
        self.preemptive = policy == "cygnus" and self.quanta_ns > 0

        self.engine = Engine(handler=self._handle)
        self.apps = [AppRun(spec, i, seed, record_trace) for i, spec in enumerate(apps)]

        self.cores = []
        self.io_cores = []
        self.io_q = deque()  # shared FCFS work queue (centralized only)
        if policy == "centralized":
            for i in range(self.params.io_cores):
                core = Core(len(self.cores), app=None, role="io")
                self.cores.append(core)
                self.io_cores.append(core)
        for app in self.apps:
            for _ in range(app.spec.cores):
                core = Core(len(self.cores), app=app, role="app")
                self.cores.append(core)
                app.cores.append(core)

        self.io_timers = []
        self._timer_seq = 0
        self._handlers = {
            ARRIVAL: self._on_arrival,
            PREEMPT_TIMER: self._on_preempt_timer,
            IO_TIMER: self._on_io_timer,
            TASK_DONE: self._on_task_done,
            CORE_WAKE: self._on_core_wake,
            EXPERIMENT_END: self._on_end,
        }
        self._ran = False

    # --- public API ----------------------------------------------------------

    def run(self):
        """Execute the run; returns one SimSummary per application."""
        if self._ran:
            raise SimulationError("a Simulation instance runs once")
        self._ran = True
        eng = self.engine
        for app in self.apps:
            first = app.arrival_stream.exponential_ns(app.interarrival_ns)
            if first <= self.duration_ns:
                eng.schedule(first, ARRIVAL, app)
        eng.schedule(self.duration_ns, EXPERIMENT_END, None)
        eng.run_until(self.duration_ns)
        return [self._summarize(app) for app in self.apps]

    def register_io_timer(self, core_id, deadline_ns, purpose="protocol"):
        """Register a protocol timer (e.g. retransmission) with the
        scheduler; its expiry is serviced with highest priority."""
        if deadline_ns < self.engine.now:
            raise ValueError("io timer deadline lies in the past")
        rec = IoTimer(self._timer_seq, core_id, deadline_ns, purpose)
        self._timer_seq += 1
        rec.handle = self.engine.schedule(deadline_ns, IO_TIMER, rec)
        self.io_timers.append(rec)
        return rec

    def cancel_io_timer(self, rec):
        rec.cancelled = True
        return self.engine.cancel(rec.handle)

    # --- event handlers ------------------------------------------------------

    def _handle(self, kind, payload):
        self._handlers[kind](payload)

    def _on_end(self, _payload):
        pass

    def _on_arrival(self, app):
        now = self.engine.now
        nxt = now + app.arrival_stream.exponential_ns(app.interarrival_ns)
        if nxt <= self.duration_ns:
            self.engine.schedule(nxt, ARRIVAL, app)

        service = app.spec.service.sample(app.service_stream)
        req_id = app.next_req
        app.next_req += 1
        app.arrivals += 1

        if self.policy == "centralized":
            pkt = Packet(req_id, now, service, app, -1, app.spec.msg_bytes)
            self._note_inflight(app, 1)
            self.io_q.append(("rx", pkt))
            for c in self.io_cores:
                if c.running is None:
                    self._dispatch(c)
                    break
            return

        idx = app.spec.steering.pick(app.steer_stream, len(app.cores))
        core = app.cores[idx]
        if self.rx_capacity and len(core.rx) >= self.rx_capacity:
            app.drops += 1
            return
        self._note_inflight(app, 1)
        pkt = Packet(req_id, now, service, app, core.id, app.spec.msg_bytes)
        core.rx.append(pkt)
        if core.running is None:
            self._dispatch(core)

    def _on_core_wake(self, core):
        if core.running is ACT_BUSY:
            core.running = None
        if core.running is None:
            self._dispatch(core)

    def _on_io_timer(self, rec):
        if rec.cancelled:
            return
        core = self.cores[rec.core_id]
        if core.running is None or core.running is IO_RUNNING:
            # the scheduler (or the I/O thread itself) services it right away
            rec.serviced_at = self.engine.now
            if core.running is None:
                self._dispatch(core)
        else:
            core.due_io_timers.append(rec)

    def _service_due_io_timers(self, core):
        if core.due_io_timers:
            now = self.engine.now
            for rec in core.due_io_timers:
                if not rec.cancelled and rec.serviced_at is None:
                    rec.serviced_at = now
            core.due_io_timers.clear()

    def _on_preempt_timer(self, core):
        task = core.running
        if task is None or task is IO_RUNNING or task is ACT_BUSY or isinstance(task, tuple):
            # timer raced with completion; ignored but counted
            core.app.stale_activations += 1
            return
        core.timer_handle = None
        app = task.app
        app.activations += 1
        now = self.engine.now
        act = self.act_ns
        on_cpu = now - core.run_start
        task.epoch_ns += on_cpu
        task.remaining_ns -= on_cpu
        core.busy_ns += on_cpu + act
        self._service_due_io_timers(core)

        if self.quanta_ns and task.epoch_ns >= self.quanta_ns:
            # quota exhausted: demote and requeue
            self.engine.cancel(core.done_handle)
            core.done_handle = None
            task.low_priority = True
            task.epoch_ns = 0
            task.state = "ready"
            app.preemptions += 1
            if self.params.preempt_to_local:
                task.state = "queued"
                core.local.append(task)
            else:
                on_task_ready(task, app.global_queue)
            if act == 0:
                core.running = None
                self._dispatch(core)
            else:
                core.running = ACT_BUSY
                self.engine.schedule(now + act, CORE_WAKE, core)
            if not self.params.preempt_to_local:
                self._kick_idle(app)
        else:
            # resume; completion shifts by the activation cost
            old_fire = core.done_handle[0]
            self.engine.cancel(core.done_handle)
            core.done_handle = self.engine.schedule(old_fire + act, TASK_DONE, core)
            core.run_start = now + act
            delay = self.interval_ns
            if self.quanta_ns:
                delay = min(delay, self.quanta_ns - task.epoch_ns)
            if task.remaining_ns > delay:
                core.timer_handle = self.engine.schedule(
                    now + act + delay, PREEMPT_TIMER, core
                )

    def _on_task_done(self, core):
        r = core.running
        now = self.engine.now
        if r is IO_RUNNING:
            self._finish_io_slice(core)
            return
        if isinstance(r, tuple):  # centralized I/O work item
            core.busy_ns += now - core.run_start
            core.running = None
            self._finish_io_item(core, r)
            self._dispatch(core)
            return
        task = r
        core.busy_ns += now - core.run_start
        if core.timer_handle is not None:
            self.engine.cancel(core.timer_handle)
            core.timer_handle = None
        core.done_handle = None
        task.remaining_ns = 0
        task.state = "done"
        core.running = None
        if self.policy == "centralized":
            self.io_q.append(("tx", task))
            for c in self.io_cores:
                if c.running is None:
                    self._dispatch(c)
                    break
        else:
            self._complete_request(task.app, task)
        self._dispatch(core)

    # --- scheduling ----------------------------------------------------------

    def _dispatch(self, core):
        """Pick what the (idle) core runs next; loops over zero-cost work."""
        if core.role == "io":
            self._dispatch_io_core(core)
            return
        policy = self.policy
        app = core.app
        self._service_due_io_timers(core)
        extra_delay = 0
        while core.running is None:
            if core.local:
                head = core.local[0]
                if (
                    policy == "cygnus"
                    and head.low_priority
                    and not core.served_low_pri
                    and core.rx
                ):
                    # a demoted task at the head lets the I/O thread go first
                    core.served_low_pri = True
                    if not self._start_io_slice(core):
                        continue
                    return
                core.local.popleft()
                self._start_task(core, head, extra_delay)
                return
            if policy == "cygnus" and app.global_queue:
                pull_from_global(core, app.global_queue, self.params.batch_pull_n)
                extra_delay += self.pull_charge_ns
                continue
            if core.rx:
                if not self._start_io_slice(core):
                    continue
                return
            if policy == "stealing":
                task = self._steal_one(core)
                if task is not None:
                    self._start_task(core, task, extra_delay + self.msg_hop_ns)
                    return
            return  # idle

    def _dispatch_io_core(self, core):
        while core.running is None and self.io_q:
            item = self.io_q.popleft()
            charge = (
                self.cost.stack_total_ns + self.msg_hop_ns
                if item[0] == "rx"
                else self.msg_hop_ns
            )
            if charge == 0:
                self._finish_io_item(core, item)
                continue
            core.running = item
            core.run_start = self.engine.now
            core.done_handle = self.engine.schedule(
                self.engine.now + charge, TASK_DONE, core
            )

    def _finish_io_item(self, core, item):
        tag, payload = item
        if tag == "rx":
            pkt = payload
            task = Task(pkt.req_id, pkt.app, pkt.service_ns, pkt.arrival)
            target = least_loaded(pkt.app.cores)
            task.state = "queued"
            target.local.append(task)
            if target.running is None:
                self._dispatch(target)
        else:  # tx completion leaves through the I/O cores
            task = payload
            self._complete_request(task.app, task)

    def _start_task(self, core, task, extra_delay=0):
        now = self.engine.now
        task.state = "running"
        core.running = task
        core.served_low_pri = False
        core.run_start = now + extra_delay
        core.busy_ns += extra_delay
        fire = core.run_start + task.remaining_ns + self.task_tail_ns
        core.done_handle = self.engine.schedule(fire, TASK_DONE, core)
        if self.preemptive:
            delay = min(self.interval_ns, self.quanta_ns - task.epoch_ns)
            # tasks that finish inside the window never generate activations
            if task.remaining_ns > delay:
                core.timer_handle = self.engine.schedule(
                    core.run_start + delay, PREEMPT_TIMER, core
                )

    def _start_io_slice(self, core):
        """Begin an RX batch; returns False if it completed inline (free)."""
        k = min(self.params.io_batch, len(core.rx))
        core.io_pending = [core.rx.popleft() for _ in range(k)]
        dt = k * self.stack_rx_ns
        core.running = IO_RUNNING
        if dt == 0:
            self._finish_io_slice(core)
            return False
        core.busy_ns += dt
        core.done_handle = self.engine.schedule(self.engine.now + dt, TASK_DONE, core)
        return True

    def _finish_io_slice(self, core):
        pkts = core.io_pending
        core.io_pending = None
        core.running = None
        core.done_handle = None
        app = core.app
        to_local = self.policy in ("dfcfs", "stealing")
        for pkt in pkts:
            task = Task(pkt.req_id, app, pkt.service_ns, pkt.arrival)
            if to_local:
                task.state = "queued"
                core.local.append(task)
            else:
                on_task_ready(task, app.global_queue)
        # the originating core picks first, then idle peers get a look
        self._dispatch(core)
        if not to_local:
            self._kick_idle(app)
        elif self.policy == "stealing" and core.local:
            self._kick_idle(app)

    def _kick_idle(self, app):
        now = self.engine.now
        for c in app.cores:
            if c.running is None:
                self.engine.schedule(now, CORE_WAKE, c)

    def _steal_one(self, core):
        """Round-robin scan from id+1; steal one task from a victim's tail."""
        peers = core.app.cores
        n = len(peers)
        start = peers.index(core)
        for off in range(1, n):
            victim = peers[(start + off) % n]
            if victim.local:
                task = victim.local.pop()
                task.state = "ready"
                return task
        return None

    # --- bookkeeping ---------------------------------------------------------

    def _complete_request(self, app, task):
        now = self.engine.now
        app.completions += 1
        self._note_inflight(app, -1)
        latency = now - task.arrival + self.rtt_ns
        if now >= self.warmup_ns:
            app.hist.record(latency)
        if app.trace is not None:
            app.trace.append((task.req_id, now))

    def _note_inflight(self, app, delta):
        now = self.engine.now
        half = self.duration_ns // 2
        if app.if_area_half is None and now >= half:
            app.if_area_half = app.if_area + app.in_flight * (half - app.if_last_t)
        app.if_area += app.in_flight * (now - app.if_last_t)
        app.if_last_t = now
        app.in_flight += delta

    def _summarize(self, app):
        self._note_inflight(app, 0)  # flush the integral to end-of-run
        half = self.duration_ns // 2
        area_half = app.if_area_half
        if area_half is None:
            area_half = app.if_area
        mean_first_half = area_half / half if half else 0.0
        util = [min(c.busy_ns / self.duration_ns, 1.0) for c in app.cores]
        return SimSummary(
            app_name=app.name,
            offered_load_ops=app.spec.load_ops,
            duration_ns=self.duration_ns,
            warmup_ns=self.warmup_ns,
            hist=app.hist,
            arrivals=app.arrivals,
            completions=app.completions,
            in_flight=app.in_flight,
            drops=app.drops,
            activations=app.activations,
            preemptions=app.preemptions,
            violations=app.violations,
            per_core_util=util,
            mean_in_flight_first_half=mean_first_half,
            in_flight_end=app.in_flight,
        )

    @property
    def io_core_util(self):
        return [min(c.busy_ns / self.duration_ns, 1.0) for c in self.io_cores]
