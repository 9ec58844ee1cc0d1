"""Discrete-event core used by every timed component.

Time is a plain integer cycle count in the host clock domain. The engine
keeps a binary heap of (due, seq, action) entries; seq is a monotonically
increasing tie-breaker, so two events scheduled for the same cycle always
fire in the order they were scheduled. That single rule is what makes whole
simulations replayable: same inputs, same event order, same counters.

Components that model concurrent activity (the DMA engine, the interference
generator, the per-tile pipeline) are written as generator processes. A
process yields either

  * an absolute time (int)  - resume me at that cycle, or
  * a Signal                - resume me when someone fires it.

The engine drives the generator; `yield from` composes sub-activities such
as a page walk inside a burst. A generator's return value comes back through
`yield from` as usual.

Host-side phases (cache flushes, map/copy loops) do not need interleaving,
so they run procedurally with an explicit time cursor instead of processes.
Both styles share the same component functions, which take `now` and return
a completion time.

Clock domains: the host runs at 50 MHz, the accelerator cluster at 20 MHz.
All bookkeeping is in host cycles; cluster_to_host converts compute budgets
expressed in cluster cycles (ratio 5/2, rounded up so a whole number of
cluster cycles never lands between host edges).
"""

import heapq

HOST_MHZ = 50
CLUSTER_MHZ = 20


def cluster_to_host(cycles):
    """Convert cluster cycles to host cycles, rounding up."""
    if cycles < 0:
        raise ValueError("negative cycle count")
    # 50/20 = 5/2, integer math only
    return (cycles * 5 + 1) // 2


class SchedulingError(Exception):
    """Raised when an event is scheduled before the current time."""


class Signal:
    """One-shot wakeup. Processes yield it; someone else fires it.

    Firing schedules every waiter at the current cycle, in wait order.
    A process that yields an already-fired signal resumes immediately
    (same cycle). The fired value is delivered as the yield result.
    """

    __slots__ = ("fired", "value", "_waiters")

    def __init__(self):
        self.fired = False
        self.value = None
        self._waiters = []

    def fire(self, engine, value=None):
        if self.fired:
            raise RuntimeError("signal fired twice")
        self.fired = True
        self.value = value if value is not None else engine.now
        waiters = self._waiters
        self._waiters = []
        for proc in waiters:
            engine._schedule_step(engine.now, proc, self.value)

    def _subscribe(self, engine, proc):
        if self.fired:
            engine._schedule_step(engine.now, proc, self.value)
        else:
            self._waiters.append(proc)


class Engine:
    """Event heap plus process driver."""

    def __init__(self):
        self.now = 0
        self._seq = 0
        self._heap = []

    def schedule(self, at, action):
        """Queue action() to run at cycle `at`. Returns an event id."""
        if at < self.now:
            raise SchedulingError(f"schedule at {at} but now is {self.now}")
        self._seq += 1
        heapq.heappush(self._heap, (at, self._seq, action))
        return self._seq

    def spawn(self, gen, at=None):
        """Start a generator process at `at` (default: now)."""
        start = self.now if at is None else at
        self.schedule(start, lambda: self._step(gen, None))
        return gen

    def _schedule_step(self, at, gen, value):
        self.schedule(at, lambda: self._step(gen, value))

    def _step(self, gen, value):
        try:
            yielded = gen.send(value)
        except StopIteration:
            return
        if isinstance(yielded, Signal):
            yielded._subscribe(self, gen)
        elif isinstance(yielded, int):
            if yielded < self.now:
                raise SchedulingError(
                    f"process yielded {yielded} but now is {self.now}")
            self._schedule_step(yielded, gen, yielded)
        else:
            raise TypeError(f"process yielded {type(yielded).__name__}, "
                            "expected int or Signal")

    def run_until_idle(self):
        """Drain the event heap. Returns the time of the last event (0 if none)."""
        last = self.now
        while self._heap:
            due, _seq, action = heapq.heappop(self._heap)
            self.now = due
            last = due
            action()
        return last


def drive_inline(gen):
    """Run a generator process to completion without an engine.

    Valid only when no other actor is concurrent: each yielded time is taken
    as the new now and sent straight back. Signals cannot be awaited here.
    Returns (result, final_time).
    """
    t = None
    result = None
    try:
        while True:
            y = gen.send(t)
            if isinstance(y, Signal):
                raise RuntimeError("inline process cannot wait on a signal")
            t = y
    except StopIteration as stop:
        result = stop.value
    return result, t
