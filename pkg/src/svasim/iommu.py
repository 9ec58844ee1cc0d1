"""Timed IO address translation: device-directory cache, IOTLB, walker.

The unit sits between the DMA engine and the interconnect. Every device
burst asks for a translation of its page; an IOTLB hit costs hit_latency
cycles and no memory traffic, a miss runs the sequential page table walk:
exactly three dependent 8-byte reads tagged as PTW traffic, routed through
the LLC when it is enabled and straight to DRAM otherwise. Walk latencies
are sampled per walk (the three reads only, lookup excluded) because the
distribution of those samples is one of the main measurements this model
exists to reproduce.

The device directory is a single cached entry binding the device to its
page-table root. configure_ddt installs the binding in both the in-memory
slot and the cache; a translate that arrives with a cold cache pays one
extra timed 8-byte read to fetch the slot first (and faults if the slot is
invalid). Walks taken on that path are counted separately and do not enter
the sample list.

translate_gen is a generator so the DMA process can interleave with other
traffic between walk reads; translate() drives it inline for procedural
callers and tests.
"""

from .engine import drive_inline
from .memory import PAGE_SHIFT, PAGE_SIZE, SRC_PTW
from . import pagetable as pt


class TranslationFault(Exception):
    def __init__(self, iova, level, reason):
        super().__init__(f"translation fault at iova {iova:#x}, "
                         f"level {level}: {reason}")
        self.iova = iova
        self.level = level


class PtwSample:
    __slots__ = ("start", "end", "memory_reads")

    def __init__(self, start, end, memory_reads):
        self.start = start
        self.end = end
        self.memory_reads = memory_reads

    @property
    def latency(self):
        return self.end - self.start


class IommuStats:
    def __init__(self):
        self.reset()

    def reset(self):
        self.iotlb_hits = 0
        self.iotlb_misses = 0
        self.ddtc_hits = 0
        self.ddtc_misses = 0
        self.ddtc_miss_walks = 0
        self.faults = 0
        self.samples = []

    def walk_mean(self):
        if not self.samples:
            return 0.0
        return sum(s.latency for s in self.samples) / len(self.samples)

    def walk_max(self):
        return max((s.latency for s in self.samples), default=0)


class Iommu:
    def __init__(self, path, mem, ddt_base, enabled=True, iotlb_entries=4,
                 iotlb_policy="LRU", hit_latency=2):
        if iotlb_policy not in ("LRU", "FIFO"):
            raise ValueError(f"unknown IOTLB policy {iotlb_policy!r}")
        self.path = path
        self.mem = mem
        self.ddt_base = ddt_base
        self.enabled = enabled
        self.iotlb_entries = iotlb_entries
        self.iotlb_policy = iotlb_policy
        self.hit_latency = hit_latency
        # IOTLB: list of [vpn, ppn, flags], most recently used first
        self._iotlb = []
        self._ddtc = None  # (device_id, root_ppn)
        self.stats = IommuStats()

    # ---- configuration ----

    def configure_ddt(self, device_id, root_ppn, fill_cache=True):
        """Bind the device to a page-table root. Writes the in-memory DDT
        slot and, normally, validates the cache in the same step (the
        driver does both before any DMA can arrive)."""
        slot = self.ddt_base + device_id * 8
        self.mem.write_u64(slot, pt.pte_encode(root_ppn, pt.PTE_V))
        if fill_cache:
            self._ddtc = (device_id, root_ppn)

    def iotlb_invalidate_all(self):
        self._iotlb.clear()  # DDTC and counters deliberately survive

    # ---- translation ----

    def _iotlb_lookup(self, vpn):
        for i, ent in enumerate(self._iotlb):
            if ent[0] == vpn:
                if self.iotlb_policy == "LRU":
                    self._iotlb.insert(0, self._iotlb.pop(i))
                return ent
        return None

    def _iotlb_insert(self, vpn, ppn, flags):
        if len(self._iotlb) == self.iotlb_entries:
            self._iotlb.pop()  # least recently used / oldest
        self._iotlb.insert(0, [vpn, ppn, flags])

    def translate_gen(self, device_id, iova, length, now, write=False):
        """Generator: yields after each timed memory read so concurrent
        traffic can interleave; returns (phys, completion)."""
        if not self.enabled:
            return iova, now
        if (iova >> PAGE_SHIFT) != ((iova + length - 1) >> PAGE_SHIFT):
            raise ValueError("translate request crosses a page")
        if not pt.is_canonical(iova):
            self.stats.faults += 1
            raise TranslationFault(iova, 2, "non-canonical address")
        offset = iova & (PAGE_SIZE - 1)
        vpn = iova >> PAGE_SHIFT
        need = pt.PTE_W if write else pt.PTE_R
        t = now + self.hit_latency
        ent = self._iotlb_lookup(vpn)
        if ent is not None:
            self.stats.iotlb_hits += 1
            if not ent[2] & need:
                self.stats.faults += 1
                raise TranslationFault(iova, 0, "permission")
            return (ent[1] << PAGE_SHIFT) | offset, t
        self.stats.iotlb_misses += 1

        ddtc_missed = False
        if self._ddtc is not None and self._ddtc[0] == device_id:
            self.stats.ddtc_hits += 1
            root_ppn = self._ddtc[1]
        else:
            self.stats.ddtc_misses += 1
            ddtc_missed = True
            slot = self.ddt_base + device_id * 8
            data, t = self.path.read(SRC_PTW, slot, 8, t)
            t = yield t
            root_ppn, flags = pt.pte_decode(int.from_bytes(data, "little"))
            if not flags & pt.PTE_V:
                self.stats.faults += 1
                raise TranslationFault(iova, 2, "device directory invalid")
            self._ddtc = (device_id, root_ppn)

        ppn, flags, t = yield from self._walk(root_ppn, iova, t, ddtc_missed)
        if not flags & need:
            self.stats.faults += 1
            raise TranslationFault(iova, 0, "permission")
        self._iotlb_insert(vpn, ppn, flags)
        return (ppn << PAGE_SHIFT) | offset, t

    def _walk(self, root_ppn, iova, now, ddtc_missed):
        """The sequential Sv39 walk: three dependent PTW reads."""
        vpns = pt.vpn_split(iova)
        table = root_ppn << PAGE_SHIFT
        t = now
        start = now
        reads = 0
        for level in (2, 1, 0):
            addr = table + vpns[2 - level] * 8
            data, t = self.path.read(SRC_PTW, addr, 8, t)
            reads += 1
            t = yield t
            ppn, flags = pt.pte_decode(int.from_bytes(data, "little"))
            if not flags & pt.PTE_V:
                self.stats.faults += 1
                raise TranslationFault(iova, level, "invalid PTE")
            if pt.pte_is_leaf(flags):
                if level != 0:
                    self.stats.faults += 1
                    raise TranslationFault(iova, level, "superpage leaf")
                if ddtc_missed:
                    self.stats.ddtc_miss_walks += 1
                else:
                    self.stats.samples.append(PtwSample(start, t, reads))
                return ppn, flags, t
            table = ppn << PAGE_SHIFT
        self.stats.faults += 1
        raise TranslationFault(iova, 0, "level 0 PTE is a table pointer")

    def translate(self, device_id, iova, length, now, write=False):
        """Inline variant for tests and procedural code."""
        result, _ = drive_inline(
            self.translate_gen(device_id, iova, length, now, write))
        return result
