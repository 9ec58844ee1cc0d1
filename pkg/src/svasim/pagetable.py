"""Three-level Sv39 page tables built in simulated DRAM.

Layout follows the RISC-V privileged spec: 512 eight-byte entries per
table, virtual page number split 9/9/9 over bits 38:12, PTEs carrying the
usual flag byte and a PPN at bits 53:10. Only 4 KiB leaf mappings are
created here; a leaf above level 0 is treated as a structure error by the
walker since nothing in this model produces superpages.

PageTableSet owns a bump allocator for table pages and writes entries into
SimMemory, so the IOMMU walker reads real bytes back out of the same store
the rest of the system uses. map_page can charge its PTE stores through a
timed store callback (the cached host path) or write untimed for setup
code; either way it returns how many entries it wrote, which the mapping
cost model depends on.

oracle_walk is the untimed reference translation used by tests to check
the timed walker bit for bit.
"""

from .memory import PAGE_SHIFT, PAGE_SIZE

PTE_V = 1 << 0
PTE_R = 1 << 1
PTE_W = 1 << 2
PTE_X = 1 << 3
PTE_U = 1 << 4
PTE_G = 1 << 5
PTE_A = 1 << 6
PTE_D = 1 << 7

LEAF_FLAGS = PTE_V | PTE_R | PTE_W | PTE_U | PTE_A | PTE_D
TABLE_FLAGS = PTE_V

ENTRIES = 512
LEVELS = 3


class PageTableError(Exception):
    pass


def pte_encode(ppn, flags):
    if ppn >> 44:
        raise PageTableError(f"ppn {ppn:#x} wider than 44 bits")
    return (ppn << 10) | (flags & 0xFF)


def pte_decode(pte):
    return (pte >> 10) & ((1 << 44) - 1), pte & 0xFF


def pte_is_leaf(flags):
    return flags & (PTE_R | PTE_W | PTE_X) != 0


def vpn_split(va):
    return ((va >> 30) & 0x1FF, (va >> 21) & 0x1FF, (va >> 12) & 0x1FF)


def is_canonical(va):
    # bits 63:39 must replicate bit 38
    top = va >> 38
    return top == 0 or top == (1 << 26) - 1


class PageTableSet:
    """One address space: a root table plus whatever the mappings need."""

    def __init__(self, mem, table_base):
        if table_base % PAGE_SIZE:
            raise PageTableError("table arena must be page aligned")
        self.mem = mem
        self._next_table = table_base
        self.root_base = self._alloc_table()
        self.tables_allocated = 1
        self.pte_writes = 0

    @property
    def root_ppn(self):
        return self.root_base >> PAGE_SHIFT

    def _alloc_table(self):
        base = self._next_table
        self._next_table += PAGE_SIZE
        # pages come zero-filled from SimMemory, so every entry starts V=0
        return base

    def _entry_addr(self, table_base, index):
        return table_base + index * 8

    def map_page(self, iova, ppn, store=None, now=0):
        """Install a 4 KiB leaf for iova. Missing intermediate tables are
        created on the way down. Returns (entries written, completion time);
        `store(addr, data8, now) -> done` makes the writes timed."""
        if not is_canonical(iova):
            raise PageTableError(f"iova {iova:#x} not canonical")
        vpns = vpn_split(iova)
        t = now
        writes = 0
        table = self.root_base
        for level in (2, 1):
            addr = self._entry_addr(table, vpns[2 - level])
            pte = self.mem.read_u64(addr)
            nppn, flags = pte_decode(pte)
            if not flags & PTE_V:
                child = self._alloc_table()
                self.tables_allocated += 1
                t = self._write(addr, pte_encode(child >> PAGE_SHIFT,
                                                 TABLE_FLAGS), store, t)
                writes += 1
                table = child
            elif pte_is_leaf(flags):
                raise PageTableError(f"superpage in the way at level {level}")
            else:
                table = nppn << PAGE_SHIFT
        addr = self._entry_addr(table, vpns[2])
        t = self._write(addr, pte_encode(ppn, LEAF_FLAGS), store, t)
        writes += 1
        self.pte_writes += writes
        return writes, t

    def _write(self, addr, value, store, now):
        data = value.to_bytes(8, "little")
        if store is not None:
            return store(addr, data, now)
        self.mem.write(addr, data)
        return now

    def map_pages(self, iova, n_pages, ppn_of, store=None, now=0):
        """Map n_pages consecutive IOVA pages; ppn_of(i) names each frame.
        Returns (total entries written, completion time)."""
        total = 0
        t = now
        for i in range(n_pages):
            w, t = self.map_page(iova + i * PAGE_SIZE, ppn_of(i), store, t)
            total += w
        return total, t

    def oracle_walk(self, iova):
        """Untimed reference translation. Raises PageTableError on any
        invalid or structurally wrong entry."""
        if not is_canonical(iova):
            raise PageTableError(f"iova {iova:#x} not canonical")
        vpns = vpn_split(iova)
        table = self.root_base
        for level in (2, 1, 0):
            pte = self.mem.read_u64(self._entry_addr(table, vpns[2 - level]))
            ppn, flags = pte_decode(pte)
            if not flags & PTE_V:
                raise PageTableError(f"invalid PTE at level {level}")
            if pte_is_leaf(flags):
                if level != 0:
                    raise PageTableError(f"unexpected leaf at level {level}")
                return (ppn << PAGE_SHIFT) | (iova & (PAGE_SIZE - 1))
            table = ppn << PAGE_SHIFT
        raise PageTableError("level 0 entry is not a leaf")
