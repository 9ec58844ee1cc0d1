"""Scenario flows, study outputs, seeding, and the CLI contract."""

import json
import os

import pytest

from svasim import harness
from svasim.cli import main
from svasim.config import ConfigError, default_config
from svasim.harness import (CSV_COLUMNS, OFFLOAD_CSV_COLUMNS,
                            PTW_CSV_COLUMNS, Platform, ScenarioConfig,
                            iova_of, normalize_mode, normalize_offload,
                            page_ceil, page_floor, run_offload_comparison,
                            run_ptw_study, run_scenario, run_sweep,
                            sub_seed)
from svasim.iommu import TranslationFault
from svasim.memory import DRAM_BASE, PAGE_SIZE


def small_cfg(**over):
    cfg = default_config()
    cfg.update(over)
    return cfg


def axpy_scenario(mode, offload=None, **cfg_over):
    return ScenarioConfig(small_cfg(**cfg_over), mode=mode, offload=offload,
                          kernel="axpy", size=8192)


# ---- helpers and config surface ----

def test_mode_and_offload_normalization():
    assert normalize_mode("IOMMU_LLC") == "iommu-llc"
    assert normalize_mode(" baseline ") == "baseline"
    assert normalize_offload("zero-copy") == "zero_copy"
    with pytest.raises(ConfigError):
        normalize_mode("turbo")
    with pytest.raises(ConfigError):
        normalize_offload("teleport")


def test_page_helpers_and_iova():
    assert page_floor(0x9000_0123) == 0x9000_0000
    assert page_ceil(0x9000_0123) == 0x9000_1000
    assert page_ceil(0x9000_1000) == 0x9000_1000
    assert iova_of(DRAM_BASE) == 0x20_0000_0000
    assert iova_of(DRAM_BASE + 0x1234) == 0x20_0000_1234


def test_sub_seed_stable_and_distinct():
    a = sub_seed(12345, "gemm", 200, "iommu")
    assert a == sub_seed(12345, "gemm", 200, "iommu")
    assert a != sub_seed(12345, "gemm", 200, "iommu-llc")
    assert a != sub_seed(12346, "gemm", 200, "iommu")


def test_zero_copy_needs_an_iommu_mode():
    with pytest.raises(ConfigError):
        axpy_scenario("baseline", offload="zero_copy")


def test_offload_defaults_follow_the_mode():
    assert axpy_scenario("baseline").offload == "copy"
    assert axpy_scenario("iommu").offload == "zero_copy"
    assert axpy_scenario("iommu-llc").offload == "zero_copy"


def test_platform_buffer_placement():
    plat = Platform(default_config(), "iommu-llc")
    small = plat.alloc_buffer("s", 4096)
    assert small % PAGE_SIZE == 2048  # sub-page allocations straddle pages
    big = plat.alloc_buffer("b", 256 * 1024)
    assert big % PAGE_SIZE == 0
    assert big >= small + 4096


# ---- scenario flows ----

def test_scenario_is_fully_deterministic():
    a = run_scenario(axpy_scenario("iommu-llc")).to_dict()
    b = run_scenario(axpy_scenario("iommu-llc")).to_dict()
    assert a == b


def test_copy_offload_phases():
    r = run_scenario(axpy_scenario("baseline"))
    p = r.phases
    assert p["copy_in"] > 0 and p["copy_out"] > 0 and p["map"] == 0
    assert p["sync"] == r.scenario.cfg["harness.sync_cycles"]
    assert r.device["total"] > 0
    assert r.offload_total == (p["host"] + r.copy_or_map_cycles + p["sync"]
                               + r.device["total"])
    assert r.iommu["walks"] == 0  # no translation on physical staging


def test_zero_copy_offload_phases():
    r = run_scenario(axpy_scenario("iommu-llc"))
    p = r.phases
    assert p["map"] > r.scenario.cfg["host.ioctl_cycles"]
    assert p["copy_in"] == 0 and p["copy_out"] == 0
    assert r.iommu["walks"] > 0
    assert r.device["translate_stall_cycles"] >= 0
    assert r.total_cycles == r.device["total"]


def test_host_only_offload():
    r = run_scenario(axpy_scenario("baseline", offload="host_only"))
    assert r.phases["host"] > 0
    assert r.total_cycles == r.phases["host"]
    assert r.device["total"] == 0
    assert r.dma == {"bytes_in": 0, "bytes_out": 0}


def test_second_device_run_is_the_warm_one():
    r = run_scenario(axpy_scenario("iommu-llc"))
    assert 0 < r.phases["device_run2"] <= r.phases["device_run1"]
    assert r.device["total"] == r.phases["device_run2"]


def test_report_serialization_shape():
    r = run_scenario(axpy_scenario("iommu"))
    d = r.to_dict()
    assert d["schema_version"] == 1
    assert d["kernel"] == "axpy" and d["mode"] == "iommu"
    row = r.csv_row()
    assert len(row) == len(CSV_COLUMNS)
    assert all(isinstance(x, str) for x in row)


# ---- studies ----

def test_sweep_outputs_and_determinism(tmp_path):
    cfg = default_config()
    kw = dict(kernels=("gemm",), latencies=(200, 600))
    reports, csv_text, json_text = run_sweep(cfg, str(tmp_path), **kw)
    assert len(reports) == 6
    lines = csv_text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 7
    assert (tmp_path / "sweep.csv").read_text() == csv_text
    summary = json.loads(json_text)
    assert summary["overhead_pct"]["gemm"]["200"].keys() == {
        "iommu", "iommu-llc"}
    # byte-identical on a re-run
    _, csv2, json2 = run_sweep(default_config(), **kw)
    assert csv2 == csv_text and json2 == json_text


def test_filtered_sweep_reproduces_the_same_cells():
    _, csv_both, _ = run_sweep(default_config(),
                               kernels=("gemm", "mergesort"),
                               latencies=(200,))
    _, csv_gemm, _ = run_sweep(default_config(), kernels=("gemm",),
                               latencies=(200,))
    both = csv_both.splitlines()
    gemm_rows = [l for l in both[1:] if l.startswith("gemm,")]
    assert csv_gemm.splitlines()[1:] == gemm_rows


def test_ptw_study_rows(tmp_path):
    _, csv_text, _ = run_ptw_study(default_config(), str(tmp_path),
                                   latencies=(200,))
    lines = csv_text.splitlines()
    assert lines[0] == ",".join(PTW_CSV_COLUMNS)
    assert len(lines) == 5  # llc off/on x interference off/on
    cells = {}
    for line in lines[1:]:
        parts = line.split(",")
        cells[(parts[2], parts[3])] = float(parts[5])
    # the LLC shortens quiet walks; interference lengthens LLC-on walks
    assert cells[("on", "off")] < cells[("off", "off")]
    assert cells[("on", "on")] > cells[("on", "off")]
    assert (tmp_path / "ptw.csv").exists()
    assert (tmp_path / "ptw.json").exists()


def test_offload_study_rows(tmp_path):
    _, csv_text, _ = run_offload_comparison(default_config(), str(tmp_path),
                                            kernel="axpy", sizes=(8192,),
                                            latencies=(200,))
    lines = csv_text.splitlines()
    assert lines[0] == ",".join(OFFLOAD_CSV_COLUMNS)
    assert len(lines) == 4
    by_offload = {l.split(",")[3]: l.split(",") for l in lines[1:]}
    host = by_offload["host_only"]
    copy = by_offload["copy"]
    zero = by_offload["zero_copy"]
    cols = {c: i for i, c in enumerate(OFFLOAD_CSV_COLUMNS)}
    assert int(host[cols["device_cycles"]]) == 0
    assert int(copy[cols["copy_in_cycles"]]) > 0
    assert int(copy[cols["map_cycles"]]) == 0
    assert int(zero[cols["map_cycles"]]) > 0
    assert int(zero[cols["copy_in_cycles"]]) == 0


# ---- CLI contract ----

def test_cli_run_writes_report_and_csv(tmp_path):
    rc = main(["run", "--kernel", "axpy", "--size", "8192",
               "--mode", "iommu-llc", "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["kernel"] == "axpy" and report["size"] == 8192
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 2


def test_cli_rejects_bad_mode(tmp_path):
    rc = main(["run", "--mode", "warp", "--out", str(tmp_path)])
    assert rc == 2


def test_cli_rejects_baseline_zero_copy(tmp_path):
    rc = main(["run", "--mode", "baseline", "--offload", "zero_copy",
               "--out", str(tmp_path)])
    assert rc == 2


def test_cli_rejects_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("dram.lattency = 1\n")
    rc = main(["run", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 2


def test_cli_applies_config_file(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("dram.latency = 600\nkernel.name = axpy\n"
                   "kernel.size = 8192\n")
    rc = main(["run", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["latency"] == 600


def test_cli_seed_resolution(tmp_path, monkeypatch):
    out1 = tmp_path / "env"
    monkeypatch.setenv("SIM_SEED", "99")
    rc = main(["run", "--kernel", "axpy", "--size", "8192",
               "--out", str(out1)])
    assert rc == 0
    assert json.loads((out1 / "report.json").read_text())["seed"] == 99
    out2 = tmp_path / "flag"
    rc = main(["run", "--kernel", "axpy", "--size", "8192",
               "--seed", "7", "--out", str(out2)])
    assert rc == 0
    assert json.loads((out2 / "report.json").read_text())["seed"] == 7
    monkeypatch.setenv("SIM_SEED", "not-a-number")
    rc = main(["run", "--kernel", "axpy", "--out", str(tmp_path)])
    assert rc == 2


def test_cli_maps_faults_to_exit_3(tmp_path, monkeypatch):
    def boom(scenario):
        raise TranslationFault(0x1000, 0, "synthetic")

    monkeypatch.setattr(harness, "run_scenario", boom)
    rc = main(["run", "--kernel", "axpy", "--out", str(tmp_path)])
    assert rc == 3


def test_cli_sweep_and_filtering(tmp_path):
    rc = main(["sweep", "--kernels", "axpy", "--latencies", "200",
               "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 4  # header + three modes
    assert (tmp_path / "sweep.json").exists()


def test_cli_rejects_bad_latency_list(tmp_path):
    rc = main(["sweep", "--latencies", "fast,slow", "--out", str(tmp_path)])
    assert rc == 2
