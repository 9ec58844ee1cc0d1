"""Backing store, address map, and the two on-chip memory ports.

Physical address map (matches the SoC device tree this models):

    0x7000_0000  +1 MiB    L2 scratchpad (SPM), flat latency
    0x8000_0000  +2 GiB    DRAM
      0x8000_0000..0xC000_0000   Linux-managed half, cacheable from the host
      0xC000_0000..1_0000_0000   reserved carveout, uncached
    0x1_0000_0000 +2 GiB   bypass alias of DRAM: same bytes, but accesses
                           through this window skip the last-level cache

The alias window exists so device traffic can be steered around the LLC by
address alone: phys + BYPASS_OFFSET touches the identical DRAM bytes. With
the IOMMU active, leaf PTEs hand out alias-window frame numbers for exactly
that reason. SimMemory canonicalizes before touching a page, so writes
through one window are visible through the other.

Storage is sparse: 4 KiB pages allocated on first touch, zero-filled, which
is also what the real carveout guarantees after reset.

DramPort models a single-channel FIFO controller: one access at a time,
completion = start + access_latency + ceil(len/beat_bytes) * beat_cycles,
and the port stays busy until completion. Everything that misses the caches
queues here, which is the main contention point of the whole model.
"""

PAGE_SIZE = 4096
PAGE_SHIFT = 12

SPM_BASE = 0x7000_0000
SPM_SIZE = 1 << 20
DRAM_BASE = 0x8000_0000
DRAM_SIZE = 1 << 31
RESERVED_BASE = 0xC000_0000
BYPASS_OFFSET = 1 << 31  # add to a DRAM phys address to get its uncached alias

# requester tags, used for routing and per-source cache stats
SRC_HOST = "host"
SRC_PTW = "ptw"
SRC_DMA = "dma"


class MemFault(Exception):
    """Access to an address outside every mapped window."""


def in_dram(addr):
    return DRAM_BASE <= addr < DRAM_BASE + DRAM_SIZE


def in_alias(addr):
    base = DRAM_BASE + BYPASS_OFFSET
    return base <= addr < base + DRAM_SIZE


def in_spm(addr):
    return SPM_BASE <= addr < SPM_BASE + SPM_SIZE


def in_linux_half(addr):
    return DRAM_BASE <= addr < RESERVED_BASE


def canonical(addr):
    """Fold a bypass-alias address onto its DRAM twin."""
    return addr - BYPASS_OFFSET if in_alias(addr) else addr


class SimMemory:
    """Sparse byte-addressable backing store for every window."""

    def __init__(self):
        self._pages = {}

    def _page(self, index):
        page = self._pages.get(index)
        if page is None:
            page = bytearray(PAGE_SIZE)
            self._pages[index] = page
        return page

    def read(self, addr, length):
        addr = canonical(addr)
        out = bytearray()
        while length > 0:
            off = addr % PAGE_SIZE
            take = min(length, PAGE_SIZE - off)
            out += self._page(addr >> PAGE_SHIFT)[off:off + take]
            addr += take
            length -= take
        return bytes(out)

    def write(self, addr, data):
        addr = canonical(addr)
        pos = 0
        while pos < len(data):
            off = addr % PAGE_SIZE
            take = min(len(data) - pos, PAGE_SIZE - off)
            self._page(addr >> PAGE_SHIFT)[off:off + take] = data[pos:pos + take]
            addr += take
            pos += take

    def read_u64(self, addr):
        return int.from_bytes(self.read(addr, 8), "little")

    def write_u64(self, addr, value):
        self.write(addr, (value & (2**64 - 1)).to_bytes(8, "little"))

    def allocated_pages(self):
        return len(self._pages)


class DramPort:
    """Single-channel FIFO DRAM controller, strictly serializing."""

    def __init__(self, access_latency, beat_bytes=8, beat_cycles=1):
        self.access_latency = access_latency
        self.beat_bytes = beat_bytes
        self.beat_cycles = beat_cycles
        self.busy_until = 0
        self.n_accesses = 0
        self.bytes_moved = 0
        self.busy_cycles = 0

    def access(self, now, length):
        """Reserve the port for one transfer; returns completion time."""
        if length <= 0:
            raise ValueError("zero-length DRAM access")
        start = max(now, self.busy_until)
        beats = -(-length // self.beat_bytes)
        done = start + self.access_latency + beats * self.beat_cycles
        self.busy_until = done
        self.n_accesses += 1
        self.bytes_moved += length
        self.busy_cycles += done - start
        return done


class Spm:
    """L2 scratchpad: fixed latency, no occupancy modeling."""

    def __init__(self, latency=5):
        self.latency = latency
        self.n_accesses = 0

    def access(self, now, length):
        self.n_accesses += 1
        return now + self.latency


class Tcdm:
    """Cluster-local tightly coupled memory. Holds the working tiles.

    Lives on the cluster side of the DMA engine, so it is not part of the
    bus address map; jobs name plain offsets into it. Transfer timing is
    carried entirely by the bus side, the TCDM never stalls the engine.
    """

    SIZE = 128 * 1024

    def __init__(self):
        self.data = bytearray(self.SIZE)

    def read(self, offset, length):
        if offset < 0 or offset + length > self.SIZE:
            raise MemFault(f"TCDM read outside 0..{self.SIZE}: "
                           f"{offset}+{length}")
        return bytes(self.data[offset:offset + length])

    def write(self, offset, data):
        if offset < 0 or offset + len(data) > self.SIZE:
            raise MemFault(f"TCDM write outside 0..{self.SIZE}: "
                           f"{offset}+{len(data)}")
        self.data[offset:offset + len(data)] = data
