"""Flat key=value config: parsing, coercion, rejection of typos."""

import pytest

from svasim.config import (ConfigError, DEFAULTS, default_config,
                           dump_config, load_config, parse_config_text)


def test_defaults_are_a_fresh_dict():
    a, b = default_config(), default_config()
    a["dram.latency"] = 999
    assert b["dram.latency"] == DEFAULTS["dram.latency"]


def test_parse_overrides_with_comments_and_blanks():
    cfg = parse_config_text("""
        # experiment: slow memory
        dram.latency = 600

        llc.enabled = off   # trailing comment
        kernel.name = gemm
        calib.eta_gemm = 0.5
    """)
    assert cfg["dram.latency"] == 600
    assert cfg["llc.enabled"] is False
    assert cfg["kernel.name"] == "gemm"
    assert cfg["calib.eta_gemm"] == 0.5


def test_parse_accepts_hex_integers():
    cfg = parse_config_text("llc.size = 0x20000\n")
    assert cfg["llc.size"] == 131072


def test_bool_words():
    for word, want in (("1", True), ("true", True), ("YES", True),
                       ("on", True), ("0", False), ("false", False),
                       ("No", False), ("off", False)):
        assert parse_config_text(f"iommu.enabled = {word}")[
            "iommu.enabled"] is want


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("dram.lattency = 200\n")


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("dram.latency = fast\n")
    with pytest.raises(ConfigError):
        parse_config_text("llc.enabled = maybe\n")
    with pytest.raises(ConfigError):
        parse_config_text("calib.eta_gemm = big\n")
    with pytest.raises(ConfigError):
        parse_config_text("just a line\n")


def test_base_layering():
    base = parse_config_text("dram.latency = 600\n")
    cfg = parse_config_text("seed = 7\n", base)
    assert cfg["dram.latency"] == 600 and cfg["seed"] == 7
    assert base["seed"] == DEFAULTS["seed"]  # the base is not mutated


def test_dump_roundtrip():
    cfg = default_config()
    cfg["dram.latency"] = 1000
    cfg["interference.enabled"] = True
    text = dump_config(cfg)
    assert parse_config_text(text) == cfg
    assert text.endswith("\n")
    assert "interference.enabled=true" in text


def test_load_config_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/sim.cfg")


def test_load_config_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("dram.latency = 1000\nkernel.name = heat3d\n")
    cfg = load_config(str(p))
    assert cfg["dram.latency"] == 1000
    assert cfg["kernel.name"] == "heat3d"
