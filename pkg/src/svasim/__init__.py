"""Deterministic cycle-approximate model of the memory path of a
heterogeneous SoC with a programmable accelerator cluster behind an
IOMMU: shared virtual addressing vs copy offload, page-walk overhead,
and a shared LLC on the walk path as the mitigation."""

__version__ = "0.1.0"

from .config import ConfigError, default_config, load_config
from .engine import Engine, SchedulingError, Signal, cluster_to_host
from .memory import (BYPASS_OFFSET, DRAM_BASE, PAGE_SIZE, RESERVED_BASE,
                     SPM_BASE, DramPort, MemFault, SimMemory, Spm, Tcdm)
from .llc import DCache, Llc, MemoryPath
from .pagetable import PageTableError, PageTableSet, pte_encode, pte_decode
from .iommu import Iommu, PtwSample, TranslationFault
from .dma import DmaEngine, DmaJob, EmptyTransfer, split_bursts
from .workloads import (KernelSpec, build_axpy, build_gemm, build_gesummv,
                        build_heat3d, build_kernel, build_mergesort)
from .harness import (CalibrationFailure, Platform, RunReport,
                      ScenarioConfig, SimulationError, calibrate,
                      run_offload_comparison, run_ptw_study, run_scenario,
                      run_sweep)
