"""Cluster DMA engine: burst splitting, per-burst translation, byte moves.

One engine serves the whole cluster and executes jobs strictly FIFO, which
matters: tile pipelines rely on enqueue order (prefetches land before the
previous tile's store-back) and the steady-state period of a DMA-bound
kernel is simply the sum of its in and out job times.

Each job is split into bus bursts that never cross a 4 KiB boundary nor
exceed max_burst_bytes (the AXI 256-beat cap at 8-byte beats). Per burst
the engine pays a fixed setup charge; with the IOMMU enabled it also
requests a translation for the burst's page at issue. Setup and translation
overlap each other (descriptor prep runs while the IOMMU answers), but the
data phase starts only after both are done; the walk therefore stalls the
engine for whatever part of it setup cannot hide, and that exposed part is
accumulated as translate_stall_cycles.

Data moves as one DRAM-direct transaction per burst (device traffic
bypasses the LLC by address construction) and the bytes really move:
IN fills TCDM from SimMemory, OUT drains TCDM back, so data-path checks
can be exact.
"""

from collections import deque

from .engine import Signal
from .memory import PAGE_SIZE, SRC_DMA

IN = "in"
OUT = "out"


class EmptyTransfer(Exception):
    pass


def split_bursts(addr, length, max_burst_bytes=2048):
    """Ordered (addr, len) bursts covering [addr, addr+length) exactly."""
    if length < 1:
        raise EmptyTransfer("zero-length DMA transfer")
    bursts = []
    while length > 0:
        room = PAGE_SIZE - (addr % PAGE_SIZE)
        take = min(length, room, max_burst_bytes)
        bursts.append((addr, take))
        addr += take
        length -= take
    return bursts


class DmaJob:
    __slots__ = ("direction", "bus_addr", "tcdm_addr", "length", "done")

    def __init__(self, direction, bus_addr, tcdm_addr, length):
        if direction not in (IN, OUT):
            raise ValueError(f"bad direction {direction!r}")
        self.direction = direction
        self.bus_addr = bus_addr
        self.tcdm_addr = tcdm_addr
        self.length = length
        self.done = Signal()


class DmaStats:
    def __init__(self):
        self.reset()

    def reset(self):
        self.bytes_in = 0
        self.bytes_out = 0
        self.jobs = 0
        self.bursts = 0
        self.busy_cycles = 0
        self.translate_stall_cycles = 0


class DmaEngine:
    def __init__(self, engine, path, tcdm, iommu=None, device_id=0,
                 setup_cycles=16, max_burst_bytes=2048):
        self.engine = engine
        self.path = path
        self.tcdm = tcdm
        self.iommu = iommu
        self.device_id = device_id
        self.setup_cycles = setup_cycles
        self.max_burst_bytes = max_burst_bytes
        self.stats = DmaStats()
        self._queue = deque()
        self._wake = None
        self._draining = False

    def enqueue(self, job):
        self._queue.append(job)
        if self._wake is not None:
            wake, self._wake = self._wake, None
            wake.fire(self.engine)

    def shutdown(self):
        """Let the engine process exit once the queue drains."""
        self._draining = True
        if self._wake is not None:
            wake, self._wake = self._wake, None
            wake.fire(self.engine)

    def process(self):
        """Generator process: executes queued jobs FIFO until shutdown."""
        while True:
            while self._queue:
                job = self._queue.popleft()
                t = yield from self._run_job(job, self.engine.now)
                job.done.fire(self.engine, t)
            if self._draining:
                return
            self._wake = Signal()
            yield self._wake

    def _run_job(self, job, now):
        self.stats.jobs += 1
        t = now
        for baddr, blen in split_bursts(job.bus_addr, job.length,
                                        self.max_burst_bytes):
            self.stats.bursts += 1
            issue = t
            ready = issue + self.setup_cycles
            phys = baddr
            if self.iommu is not None and self.iommu.enabled:
                phys, t_done = yield from self.iommu.translate_gen(
                    self.device_id, baddr, blen, issue,
                    write=(job.direction == OUT))
                if t_done > ready:
                    self.stats.translate_stall_cycles += t_done - ready
                    ready = t_done
            if ready > issue and ready > self.engine.now:
                ready = yield ready
            tcdm_off = job.tcdm_addr + (baddr - job.bus_addr)
            if job.direction == IN:
                data, t = self.path.read(SRC_DMA, phys, blen, ready)
                self.tcdm.write(tcdm_off, data)
                self.stats.bytes_in += blen
            else:
                data = self.tcdm.read(tcdm_off, blen)
                t = self.path.write(SRC_DMA, phys, data, ready)
                self.stats.bytes_out += blen
            if t > self.engine.now:
                t = yield t
            self.stats.busy_cycles += t - issue
        return t
