"""Command line front end.

    sim run       one scenario, writes report.json and results.csv
    sim sweep     kernels x DRAM latencies x modes, writes sweep.csv/.json
    sim offload   host_only vs copy vs zero_copy for one kernel
    sim ptw       page-walk latency study (LLC on/off x interference)
    sim calibrate fit the per-kernel efficiency constants

Exit codes: 0 success, 2 configuration problem (bad flag, bad config
file, invalid combination), 3 the simulation itself faulted (translation
fault, calibration that cannot reach its target, broken invariant).

The seed is taken from --seed, else the SIM_SEED environment variable,
else the config file, else the built-in default.
"""

import argparse
import os
import sys

from . import harness
from .config import ConfigError, default_config, load_config
from .iommu import TranslationFault
from .memory import MemFault
from .pagetable import PageTableError


def _parse_int_list(text, what):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad {what} list {text!r}")


def _resolve_seed(args, cfg):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("SIM_SEED")
    if env is not None:
        try:
            return int(env, 0)
        except ValueError:
            raise ConfigError(f"SIM_SEED={env!r} is not an integer")
    return cfg["seed"]


def _load_cfg(args):
    cfg = default_config()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    cfg["seed"] = _resolve_seed(args, cfg)
    return cfg


def _cmd_run(args):
    cfg = _load_cfg(args)
    if args.latency is not None:
        cfg["dram.latency"] = args.latency
    if args.interference:
        cfg["interference.enabled"] = True
    sc = harness.ScenarioConfig(
        cfg, mode=args.mode, offload=args.offload,
        kernel=args.kernel or cfg["kernel.name"],
        size=args.size, seed=cfg["seed"])
    report = harness.run_scenario(sc)
    harness._write(args.out, "report.json",
                   harness._json_text(report.to_dict()))
    harness._write(args.out, "results.csv",
                   harness._csv_text(harness.CSV_COLUMNS,
                                     [report.csv_row()]))
    print(f"{sc.kernel} size={report.spec.size} latency="
          f"{cfg['dram.latency']} mode={sc.mode} offload={sc.offload}: "
          f"total={report.total_cycles} pct_dma="
          f"{report.device['pct_dma']:.2f}")
    return 0


def _cmd_sweep(args):
    cfg = _load_cfg(args)
    if args.interference:
        cfg["interference.enabled"] = True
    kernels = (tuple(args.kernels.split(",")) if args.kernels
               else harness.SWEEP_KERNELS)
    latencies = (_parse_int_list(args.latencies, "latency")
                 if args.latencies else harness.SWEEP_LATENCIES)
    reports, _, _ = harness.run_sweep(cfg, args.out, kernels=kernels,
                                      latencies=latencies)
    print(f"{len(reports)} cells -> {args.out}/sweep.csv")
    return 0


def _cmd_offload(args):
    cfg = _load_cfg(args)
    sizes = (_parse_int_list(args.sizes, "size") if args.sizes
             else (8192, 32768, 131072))
    latencies = (_parse_int_list(args.latencies, "latency")
                 if args.latencies else harness.SWEEP_LATENCIES)
    reports, _, _ = harness.run_offload_comparison(
        cfg, args.out, kernel=args.kernel, sizes=sizes,
        latencies=latencies)
    print(f"{len(reports)} rows -> {args.out}/offload.csv")
    return 0


def _cmd_ptw(args):
    cfg = _load_cfg(args)
    latencies = (_parse_int_list(args.latencies, "latency")
                 if args.latencies else harness.SWEEP_LATENCIES)
    reports, _, _ = harness.run_ptw_study(cfg, args.out,
                                          kernel=args.kernel,
                                          latencies=latencies)
    print(f"{len(reports)} rows -> {args.out}/ptw.csv")
    return 0


def _cmd_calibrate(args):
    cfg = _load_cfg(args)
    fitted, achieved = harness.calibrate(cfg, out_path=args.out)
    for kernel, info in achieved.items():
        print(f"{kernel}: constant={info['constant']} "
              f"target={info['target_pct_dma']}% "
              f"residual={info['residual_pp']}pp")
    if args.out:
        print(f"wrote {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="sim",
        description="Cycle-approximate model of an IOMMU-equipped "
                    "heterogeneous SoC memory path.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True, out_default=None):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--seed", type=int,
                        help="RNG seed (overrides SIM_SEED and config)")
        sp.add_argument("--out", required=out_required,
                        default=out_default, help="output directory")

    sp = sub.add_parser("run", help="run one scenario")
    sp.add_argument("--kernel",
                    help="gemm | gesummv | heat3d | axpy | mergesort")
    sp.add_argument("--size", type=int, help="problem size (0 = default)")
    sp.add_argument("--latency", type=int, help="DRAM access latency")
    sp.add_argument("--mode", default=harness.MODE_IOMMU_LLC,
                    help="baseline | iommu | iommu-llc")
    sp.add_argument("--offload",
                    help="copy | zero_copy | host_only "
                         "(default: by mode)")
    sp.add_argument("--interference", action="store_true",
                    help="enable the host interference generator")
    common(sp)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("sweep", help="kernels x latencies x modes")
    sp.add_argument("--kernels", help="comma list (default: all four)")
    sp.add_argument("--latencies", help="comma list of DRAM latencies")
    sp.add_argument("--interference", action="store_true")
    common(sp)
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("offload", help="compare offload styles")
    sp.add_argument("--kernel", default="axpy")
    sp.add_argument("--sizes", help="comma list of problem sizes")
    sp.add_argument("--latencies", help="comma list of DRAM latencies")
    common(sp)
    sp.set_defaults(func=_cmd_offload)

    sp = sub.add_parser("ptw", help="page-walk latency study")
    sp.add_argument("--kernel", default="gesummv")
    sp.add_argument("--latencies", help="comma list of DRAM latencies")
    common(sp)
    sp.set_defaults(func=_cmd_ptw)

    sp = sub.add_parser("calibrate",
                        help="fit kernel efficiency constants")
    sp.add_argument("--config", help="flat key=value config file")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="write fitted constants here "
                                  "(key=value lines)")
    sp.set_defaults(func=_cmd_calibrate)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (TranslationFault, MemFault, PageTableError,
            harness.SimulationError, harness.CalibrationFailure) as e:
        print(f"simulation fault: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
