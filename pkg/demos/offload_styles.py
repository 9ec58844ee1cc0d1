"""One kernel, three ways to hand it to the accelerator.

host_only runs the kernel on the host core and never touches the DMA
engine. copy stages the buffers into the uncached carveout around the
device run. zero_copy pins the buffers where they are and maps them
into the device's address space instead. The end-to-end totals make
the staging cost visible; device time barely moves.
"""

from svasim.config import default_config
from svasim.harness import ScenarioConfig, run_scenario

KERNEL = "axpy"
SIZE = 32768

print(f"{KERNEL} n={SIZE}, DRAM latency 200, end-to-end cycles\n")
print(f"{'offload':<10} {'total':>10} {'host':>10} {'copy_in':>9} "
      f"{'map':>9} {'device':>9} {'copy_out':>9}")

for mode, offload in (("baseline", "host_only"),
                      ("baseline", "copy"),
                      ("iommu-llc", "zero_copy")):
    sc = ScenarioConfig(default_config(), mode=mode, offload=offload,
                        kernel=KERNEL, size=SIZE)
    r = run_scenario(sc)
    p = r.phases
    print(f"{offload:<10} {r.offload_total:>10} {p['host']:>10} "
          f"{p['copy_in']:>9} {p['map']:>9} {r.device['total']:>9} "
          f"{p['copy_out']:>9}")

print("\nthe map phase is one ioctl plus pinning and PTE stores; it does "
      "not grow\nwith DRAM latency the way the line-by-line copies do "
      "(see the offload study)")
