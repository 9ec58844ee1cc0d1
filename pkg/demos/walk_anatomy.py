"""What one device-side address translation costs, piece by piece.

Wires up the memory path by hand, maps a few pages, and times the same
lookup four ways: a cold page walk straight to DRAM, an IOTLB hit, a
cold walk through the shared LLC, and a warm walk whose PTEs are still
resident there. The last number is the whole argument for routing the
walker through the LLC.
"""

from svasim.iommu import Iommu
from svasim.llc import Llc, MemoryPath
from svasim.memory import DramPort, SimMemory, Spm
from svasim.pagetable import PageTableSet

PT_ARENA = 0x8100_0000
DDT_BASE = 0x8800_0000
IOVA = 0x20_0000_0000
DRAM_LATENCY = 200


def build(llc_enabled):
    mem = SimMemory()
    dram = DramPort(access_latency=DRAM_LATENCY)
    path = MemoryPath(mem, dram, Spm(), llc=Llc(dram),
                      llc_enabled=llc_enabled)
    ptset = PageTableSet(mem, PT_ARENA)
    iommu = Iommu(path, mem, DDT_BASE)
    iommu.configure_ddt(0, ptset.root_ppn)
    for i in range(8):
        ptset.map_page(IOVA + i * 4096, 0x90000 + i)
    return iommu


print(f"DRAM access latency: {DRAM_LATENCY} cycles, "
      f"IOTLB lookup: 2 cycles\n")

# walks go straight to DRAM: three dependent reads, nothing can help
iommu = build(llc_enabled=False)
_, done = iommu.translate(0, IOVA, 8, 0)
print(f"cold walk, no LLC      {done:>5} cycles "
      f"(walk itself {iommu.stats.samples[-1].latency})")

_, done = iommu.translate(0, IOVA + 64, 8, 10_000)
print(f"IOTLB hit              {done - 10_000:>5} cycles")

# same again with the LLC on the walk path
iommu = build(llc_enabled=True)
_, done = iommu.translate(0, IOVA, 8, 0)
print(f"cold walk through LLC  {done:>5} cycles "
      f"(walk itself {iommu.stats.samples[-1].latency})")

iommu.iotlb_invalidate_all()  # force a walk, but keep the LLC warm
_, done = iommu.translate(0, IOVA, 8, 10_000)
print(f"warm walk through LLC  {done - 10_000:>5} cycles "
      f"(walk itself {iommu.stats.samples[-1].latency})")
