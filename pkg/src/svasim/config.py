"""Flat key=value configuration with typed defaults.

Every tunable of the platform and the study harness lives in one flat
namespace so a config file, a CLI override, and a report echo all speak
the same dialect. Values are coerced to the type of their default;
unknown keys are rejected rather than ignored so a typo cannot silently
run the wrong experiment.

The calib.* efficiency constants are the calibrated defaults produced
by `sim calibrate` against the built-in baseline targets; override them
from a file to explore, or re-run calibration to regenerate.
"""


class ConfigError(Exception):
    pass


DEFAULTS = {
    "seed": 12345,

    "dram.latency": 200,
    "dram.beat_bytes": 8,
    "dram.beat_cycles": 1,
    "spm.latency": 5,

    "llc.enabled": True,
    "llc.size": 131072,
    "llc.ways": 8,
    "llc.hit_latency": 10,
    "llc.miss_occupancy": 64,

    "dcache.size": 32768,
    "dcache.ways": 8,
    "dcache.flush_cycles": 100,

    "iommu.enabled": True,
    "iommu.iotlb_entries": 4,
    "iommu.iotlb_policy": "LRU",
    "iommu.hit_latency": 2,

    "dma.max_burst_bytes": 2048,
    "dma.setup_cycles": 16,

    "kernel.name": "axpy",
    "kernel.size": 0,          # 0 = kernel's default problem size
    "kernel.tile": 0,          # 0 = kernel's default tiling

    "calib.eta_gemm": 0.2111,
    "calib.eta_gesummv": 0.195,
    "calib.eta_heat3d": 0.9094,
    "calib.eta_axpy": 0.8,
    "calib.c_sort": 3.4357,

    "host.ioctl_cycles": 100000,
    "host.map_touch_reads": 3,
    "host.copy_drain_cycles": 100,
    "host.elem_cycles": 4,

    "harness.sync_cycles": 5000,

    "interference.enabled": False,
    "interference.period": 20,
    "interference.span": 65536,
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(key, raw, like):
    raw = raw.strip()
    if isinstance(like, bool):
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(like, int):
        try:
            return int(raw, 0)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}")
    if isinstance(like, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}")
    return raw


def default_config():
    return dict(DEFAULTS)


def parse_config_text(text, base=None):
    cfg = dict(DEFAULTS if base is None else base)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        cfg[key] = _coerce(key, raw, DEFAULTS[key])
    return cfg


def load_config(path, base=None):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    return parse_config_text(text, base)


def dump_config(cfg):
    lines = []
    for key in sorted(cfg):
        v = cfg[key]
        if isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{key}={v}")
    return "\n".join(lines) + "\n"
