"""Benchmark kernel models, the tile pipeline, and host-side phases.

Kernels are modeled analytically at tile granularity: each tile declares
the DMA transfers it needs and a cluster-cycle compute cost from a small
per-kernel formula with an efficiency constant (calibrated, see harness).
The simulator executes the resulting transfer/compute schedule exactly,
so contention, translation stalls, and pipeline exposure come out of the
event model rather than out of closed-form guesses.

Pipeline disciplines, per kernel:

  * double buffered (gemm, gesummv, heat3d, axpy): the transfers in
    `prefetch` for tile i+1 are enqueued when compute of tile i starts,
    so they hide under compute when the memory path keeps up. Transfers
    in `serial_in` are enqueued only after tile i's store-back, for
    operands whose TCDM slot is still draining (gemm's C accumulator).
  * wait_prev_out: compute of tile i+1 additionally waits for tile i's
    store-back to finish (single accumulator slot); kernels with spare
    TCDM skip the wait and let the store drain behind the next prefetch.
  * serial (mergesort): in, compute, out, strictly in order, no overlap;
    a merge pass cannot start on a block it has not fully received.

The DMA engine executes everything FIFO, which the schedules above rely
on (a serial_in lands behind the preceding store-back without any extra
synchronization).

Tile working sets are placed in TCDM with two alternating 64 KiB slots;
inputs live at the slot base, store-back staging 48 KiB in. Builders
reject tilings that do not fit.

Also here: the synthetic host interference generator (seeded uniform
cacheable reads, one outstanding at a time, reissued `period` cycles
after the previous one completes), the host-side copy and map phases,
and the single-core host kernel used as the no-offload reference.
"""

import math
import random

from .config import ConfigError
from .dma import IN, OUT, DmaJob
from .engine import Signal, cluster_to_host
from .memory import PAGE_SIZE, RESERVED_BASE, SRC_HOST, Tcdm

TCDM_SLOT = 64 * 1024
TCDM_IN_LIMIT = 48 * 1024
TCDM_OUT_BASE = 48 * 1024


class Transfer:
    """One contiguous DMA transfer of a tile: buffer-relative source."""

    __slots__ = ("buf", "offset", "length", "tcdm")

    def __init__(self, buf, offset, length, tcdm):
        self.buf = buf
        self.offset = offset
        self.length = length
        self.tcdm = tcdm


class Tile:
    __slots__ = ("prefetch", "serial_in", "out", "compute_cluster")

    def __init__(self, prefetch, serial_in, out, compute_cluster):
        self.prefetch = prefetch
        self.serial_in = serial_in
        self.out = out
        self.compute_cluster = compute_cluster


class KernelSpec:
    def __init__(self, name, size, buffers, inputs, outputs, tiles,
                 serial=False, wait_prev_out=False, host_ops=0, eta=None):
        self.name = name
        self.size = size
        self.buffers = buffers      # ordered {name: bytes}
        self.inputs = inputs        # buffer names the kernel reads
        self.outputs = outputs      # buffer names holding results
        self.tiles = tiles
        self.serial = serial
        self.wait_prev_out = wait_prev_out
        self.host_ops = host_ops
        self.eta = eta
        self.bytes_in = sum(tr.length for t in tiles
                            for tr in t.prefetch + t.serial_in)
        self.bytes_out = sum(tr.length for t in tiles for tr in t.out)
        self._check_budget()

    def _check_budget(self):
        for t in self.tiles:
            in_bytes = sum(tr.length for tr in t.prefetch + t.serial_in)
            out_bytes = sum(tr.length for tr in t.out)
            if in_bytes > TCDM_IN_LIMIT:
                raise ConfigError(
                    f"{self.name}: tile inputs do not fit double buffered "
                    f"in TCDM ({in_bytes} bytes)")
            if out_bytes > TCDM_SLOT - TCDM_OUT_BASE:
                raise ConfigError(f"{self.name}: store-back staging "
                                  f"overflows ({out_bytes} bytes)")


def _slot(i):
    return (i % 2) * TCDM_SLOT


def _chunked(buf, offset, length, chunk, tcdm):
    out = []
    pos = 0
    while pos < length:
        take = min(chunk, length - pos)
        out.append(Transfer(buf, offset + pos, take, tcdm + pos))
        pos += take
    return out


# ---- kernel builders ----

def build_axpy(n, eta, chunk_elems=4096):
    if n < 1:
        raise ConfigError("axpy size must be positive")
    tiles = []
    idx = 0
    pos = 0
    while pos < n:
        e = min(chunk_elems, n - pos)
        nb = e * 4
        s = _slot(idx)
        tiles.append(Tile(
            prefetch=[Transfer("x", pos * 4, nb, s),
                      Transfer("y", pos * 4, nb, s + 16384)],
            serial_in=[],
            out=[Transfer("y", pos * 4, nb, s + TCDM_OUT_BASE)],
            compute_cluster=max(1, math.ceil(2 * e / (16 * eta)))))
        pos += e
        idx += 1
    return KernelSpec("axpy", n,
                      buffers={"x": n * 4, "y": n * 4},
                      inputs=("x", "y"), outputs=("y",),
                      tiles=tiles, host_ops=n, eta=eta)


def build_gemm(n, eta, tile=32):
    if n % tile or n < tile:
        raise ConfigError(f"gemm size {n} not divisible by tile {tile}")
    nt = n // tile
    panel = tile * n * 4  # A and B are pre-packed in contiguous panels
    tiles = []
    idx = 0
    for j in range(nt):
        for i in range(nt):
            s = _slot(idx)
            c_pieces_in = []
            c_pieces_out = []
            for r in range(tile):
                off = ((i * tile + r) * n + j * tile) * 4
                c_pieces_in.append(Transfer("c", off, tile * 4,
                                            s + 32768 + r * tile * 4))
                c_pieces_out.append(Transfer("c", off, tile * 4,
                                             s + 32768 + r * tile * 4))
            tiles.append(Tile(
                prefetch=[Transfer("a", i * panel, panel, s),
                          Transfer("b", j * panel, panel, s + panel)],
                serial_in=c_pieces_in,
                out=c_pieces_out,
                compute_cluster=max(1, math.ceil(
                    2 * tile * tile * n / (16 * eta)))))
            idx += 1
    nb = n * n * 4
    return KernelSpec("gemm", n,
                      buffers={"a": nb, "b": nb, "c": nb},
                      inputs=("a", "b", "c"), outputs=("c",),
                      tiles=tiles, wait_prev_out=True,
                      host_ops=2 * n * n * n // 8, eta=eta)


def build_gesummv(n, eta, rows=8, chunk=1024):
    if n % rows:
        raise ConfigError(f"gesummv size {n} not divisible by {rows} rows")
    nt = n // rows
    block = rows * n * 4
    tiles = []
    for t in range(nt):
        s = _slot(t)
        pre = (_chunked("a", t * block, block, chunk, s)
               + _chunked("b", t * block, block, chunk, s + 16384))
        if t == 0:
            pre.append(Transfer("x", 0, n * 4, s + 32768))
        out = []
        if t == nt - 1:
            out.append(Transfer("y", 0, n * 4, s + TCDM_OUT_BASE))
        tiles.append(Tile(pre, [], out,
                          max(1, math.ceil(4 * rows * n / (16 * eta)))))
    return KernelSpec("gesummv", n,
                      buffers={"a": n * n * 4, "b": n * n * 4,
                               "x": n * 4, "y": n * 4},
                      inputs=("a", "b", "x"), outputs=("y",),
                      tiles=tiles, wait_prev_out=True,
                      host_ops=4 * n * n // 8, eta=eta)


def build_heat3d(n, eta, steps=2, chunk=1024):
    plane = n * n * 4
    if plane % chunk:
        raise ConfigError(f"heat3d size {n}: plane not chunkable")
    tiles = []
    idx = 0
    for s_i in range(steps):
        src = "u0" if s_i % 2 == 0 else "u1"
        dst = "u1" if s_i % 2 == 0 else "u0"
        for z in range(n):
            s = _slot(idx)
            pre = []
            if z == 0:
                pre += _chunked(src, 0, plane, chunk, s)
                pre += _chunked(src, plane, plane, chunk, s + plane)
            elif z + 1 < n:
                pre += _chunked(src, (z + 1) * plane, plane, chunk, s)
            out = _chunked(dst, z * plane, plane, chunk, s + TCDM_OUT_BASE)
            tiles.append(Tile(pre, [], out,
                              max(1, math.ceil(10 * n * n / (16 * eta)))))
            idx += 1
    vol = n * n * n * 4
    return KernelSpec("heat3d", n,
                      buffers={"u0": vol, "u1": vol},
                      inputs=("u0",),
                      outputs=("u0" if steps % 2 == 0 else "u1",),
                      tiles=tiles,
                      host_ops=10 * n * n * n * steps // 8, eta=eta)


def build_mergesort(n, c_sort, block_elems=1024, sorted_run=8192):
    if n < 2 * sorted_run or n % block_elems:
        raise ConfigError(f"mergesort size {n} too small or misaligned")
    passes = int(math.log2(n / sorted_run))
    if 2 ** passes * sorted_run != n:
        raise ConfigError(f"mergesort size {n} must be 8192*2^k")
    nb = block_elems * 4
    blocks = n // block_elems
    tiles = []
    for p in range(passes):
        src = "buf0" if p % 2 == 0 else "buf1"
        dst = "buf1" if p % 2 == 0 else "buf0"
        for b in range(blocks):
            tiles.append(Tile(
                prefetch=[Transfer(src, b * nb, nb, 0)],
                serial_in=[],
                out=[Transfer(dst, b * nb, nb, 0)],
                compute_cluster=max(1, math.ceil(c_sort * block_elems))))
    final = "buf1" if passes % 2 == 1 else "buf0"
    return KernelSpec("mergesort", n,
                      buffers={"buf0": n * 4, "buf1": n * 4},
                      inputs=("buf0",), outputs=(final,),
                      tiles=tiles, serial=True,
                      host_ops=n * max(1, passes) // 4, eta=c_sort)


DEFAULT_SIZES = {"axpy": 32768, "gemm": 128, "gesummv": 512,
                 "heat3d": 64, "mergesort": 65536}


def build_kernel(name, size, cfg):
    size = size or DEFAULT_SIZES.get(name)
    if name == "axpy":
        return build_axpy(size, cfg["calib.eta_axpy"],
                          cfg["kernel.tile"] or 4096)
    if name == "gemm":
        return build_gemm(size, cfg["calib.eta_gemm"],
                          cfg["kernel.tile"] or 32)
    if name == "gesummv":
        return build_gesummv(size, cfg["calib.eta_gesummv"],
                             cfg["kernel.tile"] or 8)
    if name == "heat3d":
        return build_heat3d(size, cfg["calib.eta_heat3d"])
    if name == "mergesort":
        return build_mergesort(size, cfg["calib.c_sort"],
                               cfg["kernel.tile"] or 1024)
    raise ConfigError(f"unknown kernel {name!r}")


# ---- device-side execution ----

class SegmentResult:
    def __init__(self, total, compute):
        self.total = total
        self.compute = compute
        self.dma_wait = max(0, total - compute)

    @property
    def pct_dma(self):
        return 100.0 * self.dma_wait / self.total if self.total else 0.0


def _prefired(engine):
    s = Signal()
    s.fired = True
    s.value = engine.now
    return s


def _enqueue(engine, dmae, resolve, transfers, direction):
    """Queue a batch; returns the done signal of its last job."""
    sig = None
    for tr in transfers:
        job = DmaJob(direction, resolve(tr.buf) + tr.offset, tr.tcdm,
                     tr.length)
        dmae.enqueue(job)
        sig = job.done
    return sig if sig is not None else _prefired(engine)


def _cluster_proc(engine, dmae, spec, resolve, counters, done, stop):
    tiles = spec.tiles
    n = len(tiles)
    if n and spec.serial:
        for tile in tiles:
            yield _enqueue(engine, dmae, resolve,
                           tile.prefetch + tile.serial_in, IN)
            c = cluster_to_host(tile.compute_cluster)
            counters["compute"] += c
            yield engine.now + c
            yield _enqueue(engine, dmae, resolve, tile.out, OUT)
    elif n:
        in_sigs = {0: [_enqueue(engine, dmae, resolve,
                                tiles[0].prefetch + tiles[0].serial_in, IN)]}
        out_sigs = {}
        for i, tile in enumerate(tiles):
            for sig in in_sigs.pop(i):
                yield sig
            if spec.wait_prev_out and i > 0:
                yield out_sigs[i - 1]
            if i + 1 < n:
                in_sigs[i + 1] = [_enqueue(engine, dmae, resolve,
                                           tiles[i + 1].prefetch, IN)]
            c = cluster_to_host(tile.compute_cluster)
            counters["compute"] += c
            yield engine.now + c
            out_sigs[i] = _enqueue(engine, dmae, resolve, tile.out, OUT)
            if i + 1 < n:
                in_sigs[i + 1].append(
                    _enqueue(engine, dmae, resolve, tiles[i + 1].serial_in,
                             IN))
        yield out_sigs[n - 1]
    dmae.shutdown()
    stop[0] = True  # parks the interference generator at its next wake
    done.fire(engine)


def run_device_kernel(engine, dmae, path, spec, resolve, start,
                      interference=None):
    """Execute the kernel's schedule once, starting at `start`.
    `interference` is an (enabled, base, span, period, seed) tuple or
    None. Returns a SegmentResult."""
    counters = {"compute": 0}
    done = Signal()
    stop = [False]
    dmae._draining = False
    dmae._wake = None
    engine.spawn(dmae.process(), at=start)
    engine.spawn(_cluster_proc(engine, dmae, spec, resolve, counters, done,
                               stop), at=start)
    if interference is not None and interference[0]:
        engine.spawn(_interference_proc(engine, path, interference[1],
                                        interference[2], interference[3],
                                        interference[4], stop), at=start)
    engine.run_until_idle()
    if not done.fired:
        raise RuntimeError("device kernel deadlocked")
    return SegmentResult(done.value - start, counters["compute"])


def _interference_proc(engine, path, base, span, period, seed, stop):
    """Host-side cache pressure: blocking seeded-uniform 8-byte reads over
    a hot working set, the next issued `period` cycles after the previous
    completes. The set is sized to overflow the L1 but fit the LLC, so in
    steady state it occupies LLC bandwidth without flushing other lines."""
    rng = random.Random(seed)
    slots = span // 8
    while not stop[0]:
        addr = base + 8 * rng.randrange(slots)
        _, t = path.read(SRC_HOST, addr, 8, engine.now)
        yield t + period


# ---- host-side phases ----

def host_copy(path, src, dst, nbytes, now, drain_cycles=100):
    """Line-granular copy: cached read of the source, posted store to the
    uncached destination modeled as a per-line drain charge."""
    t = now
    pos = 0
    while pos < nbytes:
        take = min(64, nbytes - pos)
        data, t = path.read(SRC_HOST, src + pos, take, t)
        t += drain_cycles
        path.mem.write(dst + pos, data)
        pos += take
    return t


def host_map(path, ptset, iova_base, n_pages, ppn_of, now,
             ioctl_cycles=100000, touch_reads=3,
             scratch_base=RESERVED_BASE + 0x30000000):
    """Map n_pages for the device: one syscall charge, then per page the
    pin/lookup bookkeeping reads (uncached) and the timed PTE stores
    through the cached host path."""
    t = now + ioctl_cycles

    def store(addr, data, tt):
        return path.write(SRC_HOST, addr, data, tt)

    writes = 0
    for i in range(n_pages):
        for k in range(touch_reads):
            off = ((i * touch_reads + k) * 8) % PAGE_SIZE
            _, t = path.read(SRC_HOST, scratch_base + off, 8, t)
        w, t = ptset.map_page(iova_base + i * PAGE_SIZE, ppn_of(i),
                              store, t)
        writes += w
    return writes, t


def run_host_kernel(path, spec, resolve, now, elem_cycles=4,
                    drain_cycles=100):
    """Single-core reference: stream the input footprint through the
    D-cache, charge per-op compute, drain the output lines."""
    t = now
    for name in spec.inputs:
        base = resolve(name)
        size = spec.buffers[name]
        pos = 0
        while pos < size:
            _, t = path.read(SRC_HOST, base + pos, min(64, size - pos), t)
            pos += 64
    t += spec.host_ops * elem_cycles
    for name in spec.outputs:
        size = spec.buffers[name]
        t += ((size + 63) // 64) * drain_cycles
    return t
