"""Last-level cache, host D-cache, and bus routing."""

import pytest

from svasim.llc import DCache, LINE, Llc, MemoryPath, line_of
from svasim.memory import (BYPASS_OFFSET, DRAM_BASE, DramPort, MemFault,
                           RESERVED_BASE, SPM_BASE, SRC_DMA, SRC_HOST,
                           SRC_PTW, SimMemory, Spm)

SET_STRIDE = 64 * 256  # same-set addresses for the default 128 KiB / 8-way


def make_llc(latency=200):
    dram = DramPort(access_latency=latency)
    return Llc(dram), dram


def test_line_of():
    assert line_of(DRAM_BASE + 100) == DRAM_BASE + 64
    assert line_of(DRAM_BASE) == DRAM_BASE


def test_request_must_stay_within_one_line():
    llc, _ = make_llc()
    with pytest.raises(ValueError):
        llc.request(SRC_HOST, "r", DRAM_BASE + 60, 8, 0)


def test_cold_miss_then_hit_timing():
    llc, dram = make_llc()
    # miss: 10 cycles to issue the fill, fill rides the DRAM FIFO (200 + 8)
    assert llc.request(SRC_HOST, "r", DRAM_BASE, 64, 0) == 218
    assert llc.request(SRC_HOST, "r", DRAM_BASE, 8, 218) == 228
    assert llc.stats[SRC_HOST].misses == 1
    assert llc.stats[SRC_HOST].hits == 1
    assert dram.n_accesses == 1


def test_miss_occupies_pipe_longer_than_hit():
    llc, _ = make_llc()
    llc.request(SRC_HOST, "r", DRAM_BASE, 64, 0)  # pipe busy until 64
    # a hit arriving at t=5 waits for the pipe, then takes 10 cycles
    assert llc.request(SRC_HOST, "r", DRAM_BASE, 8, 5) == 74
    # after a hit the pipe frees quickly
    assert llc.request(SRC_HOST, "r", DRAM_BASE, 8, 74) == 84


def test_lru_eviction_order():
    llc, _ = make_llc()
    t = 0
    addrs = [DRAM_BASE + k * SET_STRIDE for k in range(9)]
    for a in addrs[:8]:
        t = llc.request(SRC_HOST, "r", a, 64, t)
    t = llc.request(SRC_HOST, "r", addrs[0], 8, t)  # refresh way 0
    t = llc.request(SRC_HOST, "r", addrs[8], 64, t)  # evicts the LRU
    assert llc.resident(addrs[0])
    assert not llc.resident(addrs[1])
    assert llc.resident(addrs[8])


def test_dirty_victim_writes_back_before_fill():
    llc, dram = make_llc()
    t = llc.request(SRC_HOST, "w", DRAM_BASE, 64, 0)
    for k in range(1, 8):
        t = llc.request(SRC_HOST, "r", DRAM_BASE + k * SET_STRIDE, 64, t)
    before = dram.n_accesses
    llc.request(SRC_HOST, "r", DRAM_BASE + 8 * SET_STRIDE, 64, t)
    # victim writeback plus the new fill
    assert dram.n_accesses - before == 2
    assert llc.stats[SRC_HOST].writebacks == 1


def test_flush_writes_back_exactly_the_dirty_lines():
    llc, dram = make_llc()
    t = 0
    for k in range(3):
        t = llc.request(SRC_HOST, "w", DRAM_BASE + k * SET_STRIDE, 64, t)
    for k in range(3, 5):
        t = llc.request(SRC_HOST, "r", DRAM_BASE + k * SET_STRIDE, 64, t)
    assert llc.dirty_lines() == 3
    before = dram.n_accesses
    done = llc.flush(10000)
    assert dram.n_accesses - before == 3
    assert done == 10000 + 3 * 208  # serial writebacks on an idle port
    assert llc.dirty_lines() == 0
    assert not llc.resident(DRAM_BASE + 4 * SET_STRIDE)
    # flushing a clean cache is free
    before = dram.n_accesses
    assert llc.flush(done) == done
    assert dram.n_accesses == before


class RecordingBackside:
    def __init__(self):
        self.fills = []
        self.stores = []

    def fill(self, addr, now):
        self.fills.append(addr)
        return now + 50

    def store(self, addr, length, now):
        self.stores.append((addr, length))
        return now + 7


def test_dcache_read_miss_fills_then_hits():
    back = RecordingBackside()
    dc = DCache(back.fill, back.store, size_bytes=1024, ways=2)
    assert dc.read(0x100, 8, 0) == 51
    assert back.fills == [0x100]
    assert dc.read(0x108, 8, 51) == 52
    assert back.fills == [0x100]
    assert dc.stats.hits == 1 and dc.stats.misses == 1


def test_dcache_multiline_read_chains_fills():
    back = RecordingBackside()
    dc = DCache(back.fill, back.store, size_bytes=1024, ways=2)
    assert dc.read(0, 128, 0) == 102
    assert back.fills == [0, 64]


def test_dcache_write_through_no_allocate():
    back = RecordingBackside()
    dc = DCache(back.fill, back.store, size_bytes=1024, ways=2)
    assert dc.write(0x200, 8, 0) == 7
    assert back.stores == [(0x200, 8)]
    # the miss did not allocate: the next read still fills
    dc.read(0x200, 8, 7)
    assert back.fills == [0x200]
    # a write to a resident line hits but still goes below
    dc.write(0x200, 4, 100)
    assert back.stores == [(0x200, 8), (0x200, 4)]
    assert dc.stats.hits == 1


def test_dcache_flush_invalidates_at_fixed_cost():
    back = RecordingBackside()
    dc = DCache(back.fill, back.store, size_bytes=1024, ways=2)
    dc.read(0x40, 8, 0)
    assert dc.flush(5) == 105
    dc.read(0x40, 8, 105)
    assert back.fills == [0x40, 0x40]


def test_dcache_lru_eviction():
    back = RecordingBackside()
    dc = DCache(back.fill, back.store, size_bytes=1024, ways=2)
    stride = 64 * 8  # sets = 1024 / (64*2) = 8
    t = dc.read(0, 8, 0)
    t = dc.read(stride, 8, t)
    t = dc.read(2 * stride, 8, t)  # evicts line 0
    t = dc.read(0, 8, t)
    assert back.fills == [0, stride, 2 * stride, 0]


def make_path(llc_enabled=True, latency=200):
    mem = SimMemory()
    dram = DramPort(access_latency=latency)
    spm = Spm(latency=5)
    llc = Llc(dram)
    return MemoryPath(mem, dram, spm, llc=llc, llc_enabled=llc_enabled), dram


def test_routing_dma_skips_the_llc():
    path, dram = make_path()
    _, done = path.read(SRC_DMA, DRAM_BASE, 2048, 0)
    assert done == 456  # 200 + 2048/8 beats
    assert path.llc.stats[SRC_HOST].misses == 0
    assert path.llc.stats[SRC_PTW].misses == 0
    assert path.dcache.stats.misses == 0


def test_routing_ptw_uses_llc_when_enabled():
    path, dram = make_path()
    _, done = path.read(SRC_PTW, DRAM_BASE + 0x100, 8, 0)
    assert done == 218
    assert path.llc.stats[SRC_PTW].misses == 1
    _, done = path.read(SRC_PTW, DRAM_BASE + 0x100, 8, done)
    assert done == 228
    assert path.llc.stats[SRC_PTW].hits == 1


def test_routing_ptw_direct_when_llc_disabled():
    path, dram = make_path(llc_enabled=False)
    _, done = path.read(SRC_PTW, DRAM_BASE + 0x100, 8, 0)
    assert done == 201
    assert path.llc.stats[SRC_PTW].misses == 0


def test_routing_host_cacheable_goes_through_both_caches():
    path, dram = make_path()
    _, done = path.read(SRC_HOST, DRAM_BASE + 0x40, 8, 0)
    assert done == 219  # LLC miss fill + 1-cycle L1 hit
    assert path.dcache.stats.misses == 1
    assert path.llc.stats[SRC_HOST].misses == 1
    _, done = path.read(SRC_HOST, DRAM_BASE + 0x40, 8, done)
    assert done == 220
    assert path.dcache.stats.hits == 1


def test_routing_host_fills_direct_when_llc_disabled():
    path, dram = make_path(llc_enabled=False)
    _, done = path.read(SRC_HOST, DRAM_BASE + 0x40, 8, 0)
    assert done == 209  # 64-byte line from DRAM + 1
    assert path.dcache.stats.misses == 1


def test_routing_alias_and_reserved_are_uncached():
    path, dram = make_path()
    _, done = path.read(SRC_HOST, RESERVED_BASE, 8, 0)
    assert done == 201
    done = path.write(SRC_HOST, DRAM_BASE + BYPASS_OFFSET + 0x40, b"hi", 300)
    assert done == 501  # 1 beat, issued at 300, FIFO already idle again
    assert path.dcache.stats.misses == 0
    assert path.llc.stats[SRC_HOST].misses == 0
    # alias writes land in the canonical bytes
    data, _ = path.read(SRC_HOST, DRAM_BASE + 0x40, 2, 600)
    assert data == b"hi"


def test_routing_spm_and_fault():
    path, _ = make_path()
    _, done = path.read(SRC_HOST, SPM_BASE + 64, 8, 100)
    assert done == 105
    with pytest.raises(MemFault):
        path.read(SRC_HOST, 0x1000, 8, 0)


def test_flush_llc_noop_when_disabled():
    path, _ = make_path(llc_enabled=False)
    assert path.flush_llc(123) == 123
