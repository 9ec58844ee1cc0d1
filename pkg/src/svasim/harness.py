"""Scenario orchestration: platform assembly, offload flows, studies.

A scenario is one kernel on one platform configuration. Three platform
modes select how device memory accesses are handled:

  baseline    no IOMMU, no LLC; the device works on physical addresses
              in the uncached carveout, so data must be copied there
  iommu       the device works on virtual addresses; page walks go
              straight to DRAM
  iommu-llc   as iommu, but walks (and host cacheable traffic) go
              through the shared LLC, which acts as a walk cache since
              the host's PTE stores leave the entries resident

and three offload styles say what the host does around the device run:

  host_only   no offload; the single host core runs the kernel
  copy        stage inputs into the carveout, run, copy results back;
              the device is programmed with physical staging addresses
  zero_copy   pin and map the shared buffers into the device address
              space, hand the device virtual addresses

Every scenario runs the device twice back to back and reports the
second, warm run; counters are reset in between but cache and IOTLB
state carries over, which is the steady state the numbers are meant to
describe. The warm run still begins with its first tile fill exposed,
exactly like any steady-state iteration of an outer loop would.

Reported cycle accounting:
  total_cycles        the reported device segment (run 2)
  copy_or_map_cycles  host-side staging work for the chosen offload
  offload_total       copy/map + sync + reported device segment, the
                      end-to-end figure the offload study compares

Studies: run_sweep crosses kernels x DRAM latencies x modes,
run_offload_comparison crosses offload styles for one kernel,
run_ptw_study isolates page-walk latency, and calibrate() fits the
per-kernel efficiency constants against built-in baseline targets.
Sub-seeds are derived per cell by hashing, so a filtered sweep
reproduces exactly the same cells as the full grid.
"""

import csv
import hashlib
import io
import json
import os
import random

from .config import ConfigError, default_config
from .dma import DmaEngine
from .engine import Engine
from .iommu import Iommu
from .llc import Llc, MemoryPath
from .memory import (BYPASS_OFFSET, DRAM_BASE, PAGE_SIZE, RESERVED_BASE,
                     DramPort, SimMemory, Spm, Tcdm)
from .pagetable import PageTableSet
from . import workloads

MODE_BASELINE = "baseline"
MODE_IOMMU = "iommu"
MODE_IOMMU_LLC = "iommu-llc"
MODES = (MODE_BASELINE, MODE_IOMMU, MODE_IOMMU_LLC)

OFFLOAD_HOST_ONLY = "host_only"
OFFLOAD_COPY = "copy"
OFFLOAD_ZERO_COPY = "zero_copy"
OFFLOADS = (OFFLOAD_HOST_ONLY, OFFLOAD_COPY, OFFLOAD_ZERO_COPY)

IOVA_BASE = 0x20_0000_0000
PT_ARENA = 0x8100_0000     # kernel-owned page-table pages
DDT_BASE = 0x8800_0000     # device directory table
SCRATCH_BASE = 0xF000_0000  # uncached driver bookkeeping area
LINUX_HEAP = 0x9000_0000   # user buffers live here
INTERFERENCE_BASE = 0x8E00_0000  # host hot set for the noise generator

SWEEP_KERNELS = ("gemm", "gesummv", "heat3d", "mergesort")
SWEEP_LATENCIES = (200, 600, 1000)

CSV_COLUMNS = ("kernel", "size", "latency", "mode", "offload", "seed",
               "total_cycles", "compute_cycles", "dma_wait_cycles",
               "pct_dma", "copy_or_map_cycles", "sync_cycles",
               "iotlb_hits", "iotlb_misses", "ptw_mean", "ptw_max",
               "llc_hits", "llc_misses")


class SimulationError(Exception):
    """A scenario could not complete (deadlock, fault, bad state)."""


class CalibrationFailure(Exception):
    """No efficiency constant reproduces the calibration target."""


def normalize_mode(mode):
    mode = mode.strip().lower().replace("_", "-")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}, expected one of {MODES}")
    return mode


def normalize_offload(offload):
    offload = offload.strip().lower().replace("-", "_")
    if offload not in OFFLOADS:
        raise ConfigError(f"unknown offload {offload!r}, "
                          f"expected one of {OFFLOADS}")
    return offload


def page_floor(addr):
    return addr & ~(PAGE_SIZE - 1)


def page_ceil(addr):
    return (addr + PAGE_SIZE - 1) & ~(PAGE_SIZE - 1)


def iova_of(phys):
    return IOVA_BASE + (phys - DRAM_BASE)


def sub_seed(seed, *tags):
    """Stable per-cell seed: hash the master seed with the cell identity."""
    text = ":".join([str(seed)] + [str(t) for t in tags])
    return int.from_bytes(
        hashlib.blake2s(text.encode(), digest_size=8).digest(), "big")


class Platform:
    """One fully wired SoC instance for a given mode."""

    def __init__(self, cfg, mode):
        self.cfg = cfg
        self.mode = normalize_mode(mode)
        self.engine = Engine()
        self.mem = SimMemory()
        self.dram = DramPort(cfg["dram.latency"], cfg["dram.beat_bytes"],
                             cfg["dram.beat_cycles"])
        self.spm = Spm(cfg["spm.latency"])
        llc_on = self.mode == MODE_IOMMU_LLC and cfg["llc.enabled"]
        self.llc = Llc(self.dram, cfg["llc.size"], cfg["llc.ways"],
                       cfg["llc.hit_latency"],
                       cfg["llc.miss_occupancy"]) if llc_on else None
        self.path = MemoryPath(self.mem, self.dram, self.spm,
                               llc=self.llc, llc_enabled=llc_on,
                               dcache_size=cfg["dcache.size"],
                               dcache_ways=cfg["dcache.ways"],
                               dcache_flush_cycles=cfg["dcache.flush_cycles"])
        self.tcdm = Tcdm()
        self.ptset = PageTableSet(self.mem, PT_ARENA)
        self.iommu_on = self.mode != MODE_BASELINE and cfg["iommu.enabled"]
        self.iommu = Iommu(self.path, self.mem, DDT_BASE,
                           enabled=self.iommu_on,
                           iotlb_entries=cfg["iommu.iotlb_entries"],
                           iotlb_policy=cfg["iommu.iotlb_policy"],
                           hit_latency=cfg["iommu.hit_latency"])
        self.dma = DmaEngine(self.engine, self.path, self.tcdm,
                             iommu=None, device_id=0,
                             setup_cycles=cfg["dma.setup_cycles"],
                             max_burst_bytes=cfg["dma.max_burst_bytes"])
        self._linux_next = LINUX_HEAP
        self._staging_next = RESERVED_BASE
        self.buf_phys = {}

    def alloc_buffer(self, name, size):
        """Place a user buffer. Big streaming buffers land page aligned;
        smaller ones get a typical malloc misalignment so tile panels
        straddle an extra page, like real sub-page allocations do."""
        base = self._linux_next
        addr = base if size >= 128 * 1024 else base + 2048
        self._linux_next = page_ceil(addr + size)
        self.buf_phys[name] = addr
        return addr

    def alloc_staging(self, size):
        base = self._staging_next
        self._staging_next = page_ceil(base + size)
        return base


class ScenarioConfig:
    def __init__(self, cfg, mode=None, offload=None, kernel=None, size=None,
                 seed=None, interference=None):
        self.cfg = cfg
        self.mode = normalize_mode(mode if mode is not None else
                                   MODE_IOMMU_LLC)
        if offload is None:
            offload = (OFFLOAD_COPY if self.mode == MODE_BASELINE
                       else OFFLOAD_ZERO_COPY)
        self.offload = normalize_offload(offload)
        if (self.mode == MODE_BASELINE
                and self.offload == OFFLOAD_ZERO_COPY):
            raise ConfigError("zero_copy offload needs an IOMMU mode")
        self.kernel = kernel or cfg["kernel.name"]
        self.size = size if size else cfg["kernel.size"]
        self.seed = cfg["seed"] if seed is None else seed
        self.interference = (cfg["interference.enabled"]
                             if interference is None else interference)


class RunReport:
    schema_version = 1

    def __init__(self, scenario, spec, phases, device, iommu_stats,
                 llc_stats, dcache_stats, dma_stats):
        self.scenario = scenario
        self.spec = spec
        self.phases = phases
        self.device = device
        self.iommu = iommu_stats
        self.llc = llc_stats
        self.dcache = dcache_stats
        self.dma = dma_stats

    @property
    def total_cycles(self):
        if self.scenario.offload == OFFLOAD_HOST_ONLY:
            return self.phases["host"]
        return self.device["total"]

    @property
    def copy_or_map_cycles(self):
        p = self.phases
        return p["copy_in"] + p["map"] + p["copy_out"]

    @property
    def offload_total(self):
        p = self.phases
        return (p["host"] + self.copy_or_map_cycles + p["sync"]
                + self.device["total"])

    def to_dict(self):
        sc = self.scenario
        return {
            "schema_version": self.schema_version,
            "kernel": sc.kernel,
            "size": self.spec.size,
            "latency": sc.cfg["dram.latency"],
            "mode": sc.mode,
            "offload": sc.offload,
            "seed": sc.seed,
            "interference": bool(sc.interference),
            "phases": dict(self.phases),
            "device": dict(self.device),
            "iommu": dict(self.iommu),
            "llc": dict(self.llc),
            "dcache": dict(self.dcache),
            "dma": dict(self.dma),
            "total_cycles": self.total_cycles,
            "copy_or_map_cycles": self.copy_or_map_cycles,
            "offload_total": self.offload_total,
        }

    def csv_row(self):
        sc = self.scenario
        return [
            sc.kernel, str(self.spec.size), str(sc.cfg["dram.latency"]),
            sc.mode, sc.offload, str(sc.seed),
            str(self.total_cycles), str(self.device["compute"]),
            str(self.device["dma_wait"]),
            f"{self.device['pct_dma']:.2f}",
            str(self.copy_or_map_cycles), str(self.phases["sync"]),
            str(self.iommu["iotlb_hits"]), str(self.iommu["iotlb_misses"]),
            f"{self.iommu['ptw_mean']:.1f}", str(self.iommu["ptw_max"]),
            str(self.llc["hits"]), str(self.llc["misses"]),
        ]


def prepare_input(platform, spec, seed):
    """Fill input buffers with reproducible bytes (untimed: the data was
    produced long before the run being measured)."""
    for name in spec.inputs:
        rng = random.Random(f"{seed}:init:{name}")
        platform.mem.write(platform.buf_phys[name],
                           rng.randbytes(spec.buffers[name]))


def _empty_device():
    return {"total": 0, "compute": 0, "dma_wait": 0, "pct_dma": 0.0,
            "bytes_in": 0, "bytes_out": 0, "busy_cycles": 0,
            "translate_stall_cycles": 0, "jobs": 0, "bursts": 0}


def _collect_device(seg, dma_stats):
    return {"total": seg.total, "compute": seg.compute,
            "dma_wait": seg.dma_wait, "pct_dma": round(seg.pct_dma, 4),
            "bytes_in": dma_stats.bytes_in, "bytes_out": dma_stats.bytes_out,
            "busy_cycles": dma_stats.busy_cycles,
            "translate_stall_cycles": dma_stats.translate_stall_cycles,
            "jobs": dma_stats.jobs, "bursts": dma_stats.bursts}


def _collect_iommu(stats):
    mean = stats.walk_mean()
    return {"iotlb_hits": stats.iotlb_hits,
            "iotlb_misses": stats.iotlb_misses,
            "ddtc_hits": stats.ddtc_hits, "ddtc_misses": stats.ddtc_misses,
            "ddtc_miss_walks": stats.ddtc_miss_walks,
            "faults": stats.faults, "walks": len(stats.samples),
            "ptw_mean": round(mean, 4) if mean is not None else 0.0,
            "ptw_max": stats.walk_max() or 0}


def _collect_llc(llc):
    if llc is None:
        return {"hits": 0, "misses": 0, "writebacks": 0,
                "host_hits": 0, "host_misses": 0,
                "ptw_hits": 0, "ptw_misses": 0}
    host = llc.stats["host"]
    ptw = llc.stats["ptw"]
    return {"hits": host.hits + ptw.hits,
            "misses": host.misses + ptw.misses,
            "writebacks": host.writebacks + ptw.writebacks,
            "host_hits": host.hits, "host_misses": host.misses,
            "ptw_hits": ptw.hits, "ptw_misses": ptw.misses}


def _reset_counters(plat):
    plat.dma.stats.reset()
    plat.iommu.stats.reset()
    plat.path.reset_stats()


def run_scenario(scenario):
    cfg = scenario.cfg
    plat = Platform(cfg, scenario.mode)
    spec = workloads.build_kernel(scenario.kernel, scenario.size, cfg)
    for name, size in spec.buffers.items():
        plat.alloc_buffer(name, size)
    prepare_input(plat, spec, scenario.seed)

    phases = {"host": 0, "copy_in": 0, "map": 0, "sync": 0,
              "device_run1": 0, "device_run2": 0, "copy_out": 0}
    path = plat.path
    drain = cfg["host.copy_drain_cycles"]

    if scenario.offload == OFFLOAD_HOST_ONLY:
        phases["host"] = workloads.run_host_kernel(
            path, spec, lambda n: plat.buf_phys[n], 0,
            elem_cycles=cfg["host.elem_cycles"], drain_cycles=drain)
        return RunReport(scenario, spec, phases, _empty_device(),
                         _collect_iommu(plat.iommu.stats),
                         _collect_llc(plat.llc),
                         {"hits": path.dcache.stats.hits,
                          "misses": path.dcache.stats.misses,
                          "writebacks": path.dcache.stats.writebacks},
                         {"bytes_in": 0, "bytes_out": 0})

    t = 0
    if scenario.offload == OFFLOAD_COPY:
        staging = {name: plat.alloc_staging(size)
                   for name, size in spec.buffers.items()}
        for name in spec.inputs:
            t = workloads.host_copy(path, plat.buf_phys[name],
                                    staging[name], spec.buffers[name],
                                    t, drain)
        phases["copy_in"] = t
        resolve = staging.__getitem__
    else:
        # pin + map: flush caches, bind the device to the address space,
        # install leaf PTEs that point at the bypass alias of each frame
        t = path.flush_l1(t)
        t = path.flush_llc(t)
        plat.iommu.configure_ddt(plat.dma.device_id, plat.ptset.root_ppn)
        t += cfg["host.ioctl_cycles"]
        for name in spec.buffers:
            base = page_floor(plat.buf_phys[name])
            n_pages = (page_ceil(plat.buf_phys[name] + spec.buffers[name])
                       - base) // PAGE_SIZE
            _, t = workloads.host_map(
                path, plat.ptset, iova_of(base), n_pages,
                lambda i, b=base: (b + i * PAGE_SIZE + BYPASS_OFFSET)
                >> 12,
                t, ioctl_cycles=0,
                touch_reads=cfg["host.map_touch_reads"],
                scratch_base=SCRATCH_BASE)
        t = path.flush_l1(t)
        phases["map"] = t
        plat.dma.iommu = plat.iommu
        resolve = lambda name: iova_of(plat.buf_phys[name])

    phases["sync"] = cfg["harness.sync_cycles"]
    t += phases["sync"]

    eng = plat.engine
    seg = None
    for run in (1, 2):
        _reset_counters(plat)
        intf = (scenario.interference, INTERFERENCE_BASE,
                cfg["interference.span"], cfg["interference.period"],
                f"{scenario.seed}:gen:{run}")
        start = max(t, eng.now)
        seg = workloads.run_device_kernel(eng, plat.dma, path, spec,
                                          resolve, start,
                                          interference=intf)
        phases[f"device_run{run}"] = seg.total
        t = eng.now

    if scenario.offload == OFFLOAD_COPY:
        t0 = t
        for name in spec.outputs:
            t = workloads.host_copy(path, staging[name],
                                    plat.buf_phys[name],
                                    spec.buffers[name], t, drain)
        phases["copy_out"] = t - t0

    dma_stats = plat.dma.stats
    expected_in = spec.bytes_in
    expected_out = spec.bytes_out
    if (dma_stats.bytes_in != expected_in
            or dma_stats.bytes_out != expected_out):
        raise SimulationError(
            f"DMA byte conservation broken: moved {dma_stats.bytes_in}/"
            f"{dma_stats.bytes_out}, kernel declares "
            f"{expected_in}/{expected_out}")

    return RunReport(scenario, spec, phases, _collect_device(seg, dma_stats),
                     _collect_iommu(plat.iommu.stats),
                     _collect_llc(plat.llc),
                     {"hits": path.dcache.stats.hits,
                      "misses": path.dcache.stats.misses,
                      "writebacks": path.dcache.stats.writebacks},
                     {"bytes_in": dma_stats.bytes_in,
                      "bytes_out": dma_stats.bytes_out})


# ---- studies ----

def _csv_text(columns, rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return out.getvalue()


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as f:
        f.write(text)
    return path


def _json_text(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def run_sweep(cfg, out_dir=None, kernels=SWEEP_KERNELS,
              latencies=SWEEP_LATENCIES, modes=MODES):
    """Cross kernels x latencies x modes. Baseline cells use the copy
    offload, IOMMU cells the zero-copy offload, which is the comparison
    the sweep exists to make."""
    reports = []
    for kernel in kernels:
        for latency in latencies:
            for mode in modes:
                c = dict(cfg)
                c["dram.latency"] = latency
                offload = (OFFLOAD_COPY if mode == MODE_BASELINE
                           else OFFLOAD_ZERO_COPY)
                sc = ScenarioConfig(
                    c, mode=mode, offload=offload, kernel=kernel,
                    seed=sub_seed(cfg["seed"], kernel, latency, mode))
                reports.append(run_scenario(sc))

    rows = [r.csv_row() for r in reports]
    csv_text = _csv_text(CSV_COLUMNS, rows)

    totals = {}
    for r in reports:
        sc = r.scenario
        totals[(sc.kernel, sc.cfg["dram.latency"], sc.mode)] = r.total_cycles
    overhead = {}
    for kernel in kernels:
        overhead[kernel] = {}
        for latency in latencies:
            base = totals.get((kernel, latency, MODE_BASELINE))
            if not base:
                continue
            cell = {}
            for mode in (MODE_IOMMU, MODE_IOMMU_LLC):
                if (kernel, latency, mode) in totals:
                    cell[mode] = round(
                        100.0 * (totals[(kernel, latency, mode)] - base)
                        / base, 4)
            overhead[kernel][str(latency)] = cell

    summary = {
        "schema_version": RunReport.schema_version,
        "seed": cfg["seed"],
        "rows": [r.to_dict() for r in reports],
        "overhead_pct": overhead,
    }
    json_text = _json_text(summary)
    if out_dir is not None:
        _write(out_dir, "sweep.csv", csv_text)
        _write(out_dir, "sweep.json", json_text)
    return reports, csv_text, json_text


OFFLOAD_CSV_COLUMNS = ("kernel", "size", "latency", "offload", "seed",
                       "total_cycles", "host_cycles", "copy_in_cycles",
                       "map_cycles", "copy_out_cycles", "sync_cycles",
                       "device_cycles", "pct_dma")


def run_offload_comparison(cfg, out_dir=None, kernel="axpy",
                           sizes=(8192, 32768, 131072),
                           latencies=SWEEP_LATENCIES):
    """host_only vs copy vs zero_copy, end to end."""
    reports = []
    rows = []
    for size in sizes:
        for latency in latencies:
            for offload in OFFLOADS:
                c = dict(cfg)
                c["dram.latency"] = latency
                mode = (MODE_IOMMU_LLC if offload == OFFLOAD_ZERO_COPY
                        else MODE_BASELINE)
                sc = ScenarioConfig(
                    c, mode=mode, offload=offload, kernel=kernel, size=size,
                    seed=sub_seed(cfg["seed"], kernel, size, latency,
                                  offload))
                r = run_scenario(sc)
                reports.append(r)
                p = r.phases
                rows.append([
                    kernel, str(size), str(latency), offload, str(sc.seed),
                    str(r.offload_total), str(p["host"]),
                    str(p["copy_in"]), str(p["map"]), str(p["copy_out"]),
                    str(p["sync"]), str(r.device["total"]),
                    f"{r.device['pct_dma']:.2f}",
                ])
    csv_text = _csv_text(OFFLOAD_CSV_COLUMNS, rows)
    summary = {
        "schema_version": RunReport.schema_version,
        "seed": cfg["seed"],
        "kernel": kernel,
        "rows": [r.to_dict() for r in reports],
    }
    json_text = _json_text(summary)
    if out_dir is not None:
        _write(out_dir, "offload.csv", csv_text)
        _write(out_dir, "offload.json", json_text)
    return reports, csv_text, json_text


PTW_CSV_COLUMNS = ("kernel", "latency", "llc", "interference", "walks",
                   "ptw_mean", "ptw_max", "iotlb_hits", "iotlb_misses")


def run_ptw_study(cfg, out_dir=None, kernel="gesummv",
                  latencies=SWEEP_LATENCIES):
    """Page-walk latency with and without the LLC on the walk path, with
    and without host interference."""
    reports = []
    rows = []
    for latency in latencies:
        for mode in (MODE_IOMMU, MODE_IOMMU_LLC):
            for intf in (False, True):
                c = dict(cfg)
                c["dram.latency"] = latency
                sc = ScenarioConfig(
                    c, mode=mode, offload=OFFLOAD_ZERO_COPY, kernel=kernel,
                    interference=intf,
                    seed=sub_seed(cfg["seed"], kernel, latency, mode,
                                  "intf" if intf else "quiet"))
                r = run_scenario(sc)
                reports.append(r)
                rows.append([
                    kernel, str(latency),
                    "on" if mode == MODE_IOMMU_LLC else "off",
                    "on" if intf else "off",
                    str(r.iommu["walks"]), f"{r.iommu['ptw_mean']:.1f}",
                    str(r.iommu["ptw_max"]),
                    str(r.iommu["iotlb_hits"]),
                    str(r.iommu["iotlb_misses"]),
                ])
    csv_text = _csv_text(PTW_CSV_COLUMNS, rows)
    summary = {
        "schema_version": RunReport.schema_version,
        "seed": cfg["seed"],
        "kernel": kernel,
        "rows": [r.to_dict() for r in reports],
    }
    json_text = _json_text(summary)
    if out_dir is not None:
        _write(out_dir, "ptw.csv", csv_text)
        _write(out_dir, "ptw.json", json_text)
    return reports, csv_text, json_text


# ---- calibration ----

CALIBRATION_TARGETS = {
    "gemm": 7.3, "gesummv": 1.4, "heat3d": 36.3, "mergesort": 17.7,
}
CALIBRATION_KEYS = {
    "gemm": "calib.eta_gemm", "gesummv": "calib.eta_gesummv",
    "heat3d": "calib.eta_heat3d", "mergesort": "calib.c_sort",
}
CALIBRATION_TOLERANCE_PP = 5.0


def _baseline_pct_dma(cfg, kernel, key, value):
    c = dict(cfg)
    c[key] = value
    c["dram.latency"] = 200
    sc = ScenarioConfig(c, mode=MODE_BASELINE, offload=OFFLOAD_COPY,
                        kernel=kernel, interference=False,
                        seed=sub_seed(cfg["seed"], "calib", kernel))
    return run_scenario(sc).device["pct_dma"]


def _grid_best(evaluate, lo, hi, steps):
    best_v, best_err = None, None
    for i in range(steps + 1):
        v = lo + (hi - lo) * i / steps
        err = evaluate(v)
        # ties go to the larger constant: prefer faster compute when the
        # observable cannot tell the difference
        if best_err is None or err < best_err - 1e-12 or (
                abs(err - best_err) <= 1e-12 and v > best_v):
            best_v, best_err = v, err
    return best_v, best_err


def calibrate(cfg=None, out_path=None, kernels=None):
    """Fit each kernel's efficiency constant so the baseline run at the
    reference DRAM latency reproduces its target DMA share. Coarse grid,
    then two refinements around the winner."""
    cfg = default_config() if cfg is None else cfg
    kernels = list(CALIBRATION_TARGETS) if kernels is None else kernels
    fitted = {}
    achieved = {}
    for kernel in kernels:
        key = CALIBRATION_KEYS[kernel]
        target = CALIBRATION_TARGETS[kernel]
        lo, hi = (0.5, 8.0) if kernel == "mergesort" else (0.05, 0.99)

        cache = {}

        def err_of(v, _k=kernel, _key=key, _target=target):
            v = round(v, 6)
            if v not in cache:
                cache[v] = abs(_baseline_pct_dma(cfg, _k, _key, v) - _target)
            return cache[v]

        v, err = _grid_best(err_of, lo, hi, 14)
        span = (hi - lo) / 14
        for _ in range(2):
            v, err = _grid_best(err_of, max(lo, v - span),
                                min(hi, v + span), 10)
            span = span / 5
        if err > CALIBRATION_TOLERANCE_PP:
            raise CalibrationFailure(
                f"{kernel}: best constant {v:.4f} still {err:.2f}pp from "
                f"the {target}% target")
        fitted[key] = round(v, 4)
        achieved[kernel] = {
            "constant": round(v, 4), "target_pct_dma": target,
            "residual_pp": round(err, 4),
        }
    if out_path is not None:
        lines = [f"{k}={fitted[k]}" for k in sorted(fitted)]
        dirname = os.path.dirname(out_path)
        if dirname:
            os.makedirs(dirname, exist_ok=True)
        with open(out_path, "w") as f:
            f.write("\n".join(lines) + "\n")
    return fitted, achieved
