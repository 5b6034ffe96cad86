"""Command line entry point: ``qpasim {sweep,point,thresholds,regions}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .core import QuantumError
from .metrics import evaluate_point, threshold_et, threshold_pol
from .montecarlo import McConfig, simulate_experiment
from .states import NoiseParams
from .sweep import (
    ConfigError,
    SweepConfig,
    emit_csv,
    emit_json,
    load_config,
    positive_gain_components,
    region_summary,
    run_sweep,
)

log = logging.getLogger("qpasim")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML sweep config")
    parser.add_argument("--mode", choices=("analytic", "montecarlo"))
    parser.add_argument("--seed", type=int, help="master seed for montecarlo mode")
    parser.add_argument("--threads", type=int, help="worker threads (default: $QPASIM_THREADS or 1)")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--plots", action="store_true", default=None, help="render noise maps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpasim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a grid sweep and write CSV/JSON (and plots)")
    _common(sweep)

    point = sub.add_parser("point", help="report for a single noise setting")
    _common(point)
    point.add_argument("--p", type=float, required=True, help="polarisation psi- weight")
    point.add_argument("--q", type=float, required=True, help="energy-time psi+/psi- weight")
    point.add_argument("--v-pol", type=float, default=None)
    point.add_argument("--v-et", type=float, default=None)
    point.add_argument("--n-pairs", type=int, default=None, help="pairs per measurement (montecarlo)")

    sub.add_parser("thresholds", help="print the pre-QPA QBER thresholds")

    regions = sub.add_parser("regions", help="print positive-gain region areas and bounding boxes")
    _common(regions)
    return parser


def config_from_args(args: argparse.Namespace) -> SweepConfig:
    try:
        return _config_from_args(args)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _config_from_args(args: argparse.Namespace) -> SweepConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else SweepConfig()
    changes: dict = {}
    mc = cfg.mc
    if getattr(args, "seed", None) is not None:
        mc = dataclasses.replace(mc or McConfig(), seed=args.seed)
    if getattr(args, "n_pairs", None) is not None:
        mc = dataclasses.replace(mc or McConfig(), n_pairs=args.n_pairs)
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
        if args.mode == "montecarlo" and mc is None:
            mc = McConfig()
    if mc is not cfg.mc:
        changes["mc"] = mc
    if getattr(args, "out", None) is not None:
        changes["output_dir"] = str(args.out)
    if getattr(args, "plots", None):
        changes["emit_plots"] = True
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _print_kv(items) -> None:
    for key, value in items:
        print(f"{key} = {value}")


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(cfg, threads=args.threads)
    csv_path = emit_csv(result, out / "sweep.csv")
    json_path = emit_json(result, out / "sweep.json")
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    if cfg.emit_plots:
        from .plotting import render_maps

        rendered = render_maps(result, out)
        for path in rendered.paths.values():
            print(f"wrote {path}")
    return EXIT_OK


def cmd_point(args) -> int:
    cfg = config_from_args(args)
    v_pol, v_et = cfg.intrinsic or (0.0, 0.0)
    if args.v_pol is not None:
        v_pol = args.v_pol
    if args.v_et is not None:
        v_et = args.v_et
    params = NoiseParams(p=args.p, q=args.q, v_pol=v_pol, v_et=v_et)
    if cfg.mode == "montecarlo":
        report = simulate_experiment(params, cfg.mc).report
    else:
        report = evaluate_point(params)
    _print_kv([
        ("p", params.p), ("q", params.q), ("mode", cfg.mode),
        ("e_z_pol", report.pol.e_z), ("e_x_pol", report.pol.e_x),
        ("e_z_et", report.et.e_z), ("e_x_et", report.et.e_x),
        ("k_pol", report.k_pol), ("k_et", report.k_et), ("k_noisy", report.k_noisy),
        ("yield", report.yield_),
        ("e_z_post", report.post_pol.e_z), ("e_x_post", report.post_pol.e_x),
        ("k_qpa", report.k_qpa), ("gain", report.gain), ("region", report.region.value),
    ])
    return EXIT_OK


def cmd_thresholds(args) -> int:
    _print_kv([("pol_threshold", f"{threshold_pol():.10f}"), ("et_threshold", f"{threshold_et():.10f}")])
    return EXIT_OK


def cmd_regions(args) -> int:
    cfg = config_from_args(args)
    result = run_sweep(cfg, threads=args.threads)
    summary = region_summary(result)
    print(f"positive-gain components = {positive_gain_components(result)}")
    print(f"{'region':<7}{'area':>12}{'points':>8}  bbox (p_min, p_max, q_min, q_max)")
    for name, info in summary.items():
        bbox = "-" if info["bbox"] is None else "(" + ", ".join(f"{v:.4g}" for v in info["bbox"]) + ")"
        print(f"{name:<7}{info['area']:>12.6f}{info['points']:>8}  {bbox}")
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "point": cmd_point, "thresholds": cmd_thresholds, "regions": cmd_regions}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, QuantumError) as exc:
        print(f"qpasim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"qpasim: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
