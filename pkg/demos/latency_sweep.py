"""The headline grid: what page walks cost as DRAM gets slower.

Runs every kernel at three DRAM latencies in the three platform modes
and prints two pivot tables: the DMA share of device time (how memory
bound each kernel is) and the device-time overhead of walking page
tables, with and without the LLC catching the walks.
"""

from svasim.config import default_config
from svasim.harness import run_sweep

LATENCIES = (200, 600, 1000)

reports, _, _ = run_sweep(default_config())

cell = {}
for r in reports:
    sc = r.scenario
    cell[(sc.kernel, sc.cfg["dram.latency"], sc.mode)] = r

kernels = []
for r in reports:
    if r.scenario.kernel not in kernels:
        kernels.append(r.scenario.kernel)

print("DMA share of device time (%), baseline platform")
print(f"{'kernel':<10}" + "".join(f"{l:>8}" for l in LATENCIES))
for k in kernels:
    row = [cell[(k, l, 'baseline')].device['pct_dma'] for l in LATENCIES]
    print(f"{k:<10}" + "".join(f"{v:>8.1f}" for v in row))

def overhead(k, l, mode):
    base = cell[(k, l, "baseline")].total_cycles
    return 100.0 * (cell[(k, l, mode)].total_cycles - base) / base

for mode, label in (("iommu", "walks go to DRAM"),
                    ("iommu-llc", "walks served by the LLC")):
    print(f"\ndevice-time overhead vs baseline (%), {label}")
    print(f"{'kernel':<10}" + "".join(f"{l:>8}" for l in LATENCIES))
    for k in kernels:
        row = [overhead(k, l, mode) for l in LATENCIES]
        print(f"{k:<10}" + "".join(f"{v:>8.1f}" for v in row))
