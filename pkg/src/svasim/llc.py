"""Host D-cache, shared last-level cache, and the bus router.

The LLC sits in front of the DRAM controller and serves two requesters: the
host (through its D-cache) and the IOMMU's page table walker. DMA data
traffic never touches it; device buffers are reached through the bypass
alias window (or leaf PTEs that encode it), so the router sends DMA straight
to DRAM. That asymmetry is the whole point of the design being modeled:
page walks want the cache, bulk data does not.

Both caches are timing models only. Data functionally lives in SimMemory
the moment a write is issued; the LLC tracks dirty bits purely to charge
writeback traffic later. This keeps byte-level checks exact while the
timing stays cycle-approximate.

Timing model of the LLC: a single lookup pipe. A hit occupies the pipe for
hit_latency cycles. A miss occupies it for miss_occupancy cycles while the
line fill itself rides the DRAM FIFO; the requester completes when the fill
does. Concurrent requesters therefore feel each other twice, once in the
pipe and once at the DRAM port, which is what makes host interference
visible in page-walk latency.

The D-cache is write-through, no allocate on write miss, 1-cycle read hit,
and has no occupancy modeling (the host core is the only user and it
blocks on every access anyway).
"""

from .memory import (MemFault, SRC_DMA, SRC_HOST, SRC_PTW, BYPASS_OFFSET,
                     canonical, in_alias, in_dram, in_linux_half, in_spm)

LINE = 64


def line_of(addr):
    return addr - (addr % LINE)


class CacheStats:
    def __init__(self):
        self.hits = 0
        self.misses = 0
        self.writebacks = 0

    def reset(self):
        self.hits = 0
        self.misses = 0
        self.writebacks = 0


class Llc:
    """Set-associative write-back write-allocate cache with an LRU stack
    per set and the single-pipe occupancy model described above."""

    def __init__(self, dram, size_bytes=128 * 1024, ways=8,
                 hit_latency=10, miss_occupancy=64):
        self.dram = dram
        self.ways = ways
        self.sets = size_bytes // (LINE * ways)
        self.hit_latency = hit_latency
        self.miss_occupancy = miss_occupancy
        self.pipe_free_at = 0
        # per set: list of [tag, dirty], index 0 = most recently used
        self._lines = [[] for _ in range(self.sets)]
        self.stats = {SRC_HOST: CacheStats(), SRC_PTW: CacheStats()}

    def _set_index(self, addr):
        return (addr // LINE) % self.sets

    def _find(self, sset, tag):
        for i, entry in enumerate(sset):
            if entry[0] == tag:
                return i
        return -1

    def request(self, source, op, addr, length, now):
        """One read ('r') or write ('w') confined to a single line.
        Returns the completion time."""
        if line_of(addr) != line_of(addr + length - 1):
            raise ValueError("LLC request crosses a line")
        stats = self.stats[source]
        sset = self._lines[self._set_index(addr)]
        tag = addr // LINE // self.sets
        start = max(now, self.pipe_free_at)
        idx = self._find(sset, tag)
        if idx >= 0:
            stats.hits += 1
            entry = sset.pop(idx)
            if op == "w":
                entry[1] = True
            sset.insert(0, entry)
            self.pipe_free_at = start + self.hit_latency
            return start + self.hit_latency
        # miss: evict LRU, write back if dirty, fill, install
        stats.misses += 1
        self.pipe_free_at = start + self.miss_occupancy
        issue = start + self.hit_latency
        if len(sset) == self.ways:
            victim = sset.pop()
            if victim[1]:
                self.stats[source].writebacks += 1
                self.dram.access(issue, LINE)  # queues ahead of the fill
        done = self.dram.access(issue, LINE)
        sset.insert(0, [tag, op == "w"])
        return done

    def flush(self, now):
        """Write back every dirty line and invalidate everything.
        Cost is the writeback traffic; a clean flush is free."""
        done = now
        wb = 0
        for sset in self._lines:
            for entry in sset:
                if entry[1]:
                    wb += 1
                    done = self.dram.access(done, LINE)
            sset.clear()
        self.stats[SRC_HOST].writebacks += wb
        return done

    def dirty_lines(self):
        return sum(1 for s in self._lines for e in s if e[1])

    def resident(self, addr):
        return self._find(self._lines[self._set_index(addr)],
                          addr // LINE // self.sets) >= 0

    def reset_stats(self):
        for s in self.stats.values():
            s.reset()


class DCache:
    """Host L1 data cache: write-through, no allocate on write miss."""

    def __init__(self, fill, store, size_bytes=32 * 1024, ways=8,
                 hit_latency=1, flush_cycles=100):
        # fill(addr, now) -> completion of a line read from below
        # store(addr, length, now) -> completion of a write below
        self.fill = fill
        self.store = store
        self.ways = ways
        self.sets = size_bytes // (LINE * ways)
        self.hit_latency = hit_latency
        self.flush_cycles = flush_cycles
        self._lines = [[] for _ in range(self.sets)]
        self.stats = CacheStats()

    def _lookup(self, addr):
        sset = self._lines[(addr // LINE) % self.sets]
        tag = addr // LINE // self.sets
        for i, t in enumerate(sset):
            if t == tag:
                return sset, i
        return sset, -1

    def read(self, addr, length, now):
        t = now
        a = addr
        end = addr + length
        while a < end:
            chunk_end = min(end, line_of(a) + LINE)
            sset, idx = self._lookup(a)
            if idx >= 0:
                self.stats.hits += 1
                sset.insert(0, sset.pop(idx))
                t = t + self.hit_latency
            else:
                self.stats.misses += 1
                t = self.fill(line_of(a), t) + self.hit_latency
                if len(sset) == self.ways:
                    sset.pop()
                sset.insert(0, a // LINE // self.sets)
            a = chunk_end
        return t

    def write(self, addr, length, now):
        # write-through: the line is updated if present, the write always
        # goes below, and a miss does not allocate
        sset, idx = self._lookup(addr)
        if idx >= 0:
            self.stats.hits += 1
            sset.insert(0, sset.pop(idx))
        else:
            self.stats.misses += 1
        return self.store(addr, length, now)

    def flush(self, now):
        # nothing is dirty in a write-through cache; invalidation plus a
        # fixed sweep cost
        for sset in self._lines:
            sset.clear()
        return now + self.flush_cycles

    def reset_stats(self):
        self.stats.reset()


class MemoryPath:
    """Routes timed accesses by requester and address window, and moves the
    actual bytes through SimMemory.

    Routing rules:
      * bypass alias window  -> fold to DRAM, go direct (uncached)
      * reserved DRAM half   -> direct (uncached by construction)
      * SPM                  -> flat-latency scratchpad port
      * DMA                  -> always direct to DRAM (never the LLC)
      * PTW                  -> LLC when enabled, else direct
      * host, Linux half     -> D-cache, which fills/stores through the LLC
                                when enabled, else direct
    """

    def __init__(self, mem, dram, spm, llc=None, llc_enabled=True,
                 dcache_size=32 * 1024, dcache_ways=8,
                 dcache_flush_cycles=100):
        self.mem = mem
        self.dram = dram
        self.spm = spm
        self.llc = llc
        self.llc_enabled = llc_enabled and llc is not None
        self.dcache = DCache(self._dc_fill, self._dc_store,
                             size_bytes=dcache_size, ways=dcache_ways,
                             flush_cycles=dcache_flush_cycles)

    # ---- D-cache backside ----

    def _dc_fill(self, line_addr, now):
        if self.llc_enabled:
            return self.llc.request(SRC_HOST, "r", line_addr, LINE, now)
        return self.dram.access(now, LINE)

    def _dc_store(self, addr, length, now):
        if self.llc_enabled:
            return self.llc.request(SRC_HOST, "w", addr, length, now)
        return self.dram.access(now, length)

    # ---- timed access entry points ----

    def _timed(self, source, addr, length, now, is_write):
        phys = canonical(addr)
        direct = in_alias(addr)
        if in_spm(phys):
            return self.spm.access(now, length)
        if not in_dram(phys):
            raise MemFault(f"access at {addr:#x} hits no window")
        if source == SRC_DMA or direct or not in_linux_half(phys):
            return self.dram.access(now, length)
        if source == SRC_PTW:
            if self.llc_enabled:
                return self.llc.request(SRC_PTW, "r", phys, length, now)
            return self.dram.access(now, length)
        # cacheable host access
        if is_write:
            return self.dcache.write(phys, length, now)
        return self.dcache.read(phys, length, now)

    def read(self, source, addr, length, now):
        done = self._timed(source, addr, length, now, False)
        return self.mem.read(addr, length), done

    def write(self, source, addr, data, now):
        done = self._timed(source, addr, len(data), now, True)
        self.mem.write(addr, data)
        return done

    def flush_l1(self, now):
        return self.dcache.flush(now)

    def flush_llc(self, now):
        if self.llc_enabled:
            return self.llc.flush(now)
        return now

    def reset_stats(self):
        self.dcache.reset_stats()
        if self.llc is not None:
            self.llc.reset_stats()
