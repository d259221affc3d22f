"""Command-line entry point.

Subcommands ``sweep``, ``verify``, ``synth`` and ``metrics`` each read a run
configuration (see :mod:`sparsesdf.config`) and write their artifacts plus a
``manifest.json`` and resolved ``config.json`` into ``--out``.  Rerunning a
command with ``--config <out>/manifest.json`` reproduces the outputs.

Exit codes: 0 success, 1 property failure, 2 input or configuration error.
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .backtest import (SweepError, curve_rows, read_returns, recompute_metrics, run_sweep,
                       support_curve, write_curves, write_json, write_sweep)
from .config import file_sha256, load_config
from .errors import SdfError, ValidationError
from .panel import planted_kernel, save_panel, synth_panel
from .theory import run_suite, write_report

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2
MANIFEST_VERSION = 1


def _error(kind, exc):
    report = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(report, sort_keys=True), file=sys.stderr)


def _write_manifest(out, command, cfg, config_path, outputs, timing):
    snapshot = cfg.snapshot()
    write_json(snapshot, os.path.join(out, "config.json"))
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "code_version": __version__,
        "seed": cfg.seed,
        "config": snapshot,
        "config_source": os.path.abspath(config_path),
        "outputs": sorted(outputs + ["config.json"]),
        "timing_seconds": timing,
    }
    if cfg.panel.source == "csv":
        manifest["panel_sha256"] = file_sha256(cfg.panel_path())
    write_json(manifest, os.path.join(out, "manifest.json"))


def cmd_sweep(args, cfg):
    t0 = time.perf_counter()
    panel = cfg.load_panel()
    t_load = time.perf_counter() - t0
    sweep = cfg.sweep_config()
    result = run_sweep(panel, sweep)
    t_sweep = time.perf_counter() - t0 - t_load
    outputs = write_sweep(result, args.out)
    with open(os.path.join(args.out, "support_curve.json"), "w", encoding="utf-8") as fh:
        if any(m == "BasisPursuit" for m in sweep.methods):
            json.dump(support_curve(result), fh, indent=2, sort_keys=True)
        else:
            json.dump([], fh)
        fh.write("\n")
    outputs.append("support_curve.json")
    degraded = [s for s in result.summary if s["degraded"]]
    for s in degraded:
        print(f"warning: degraded cell c={s['c']:g} {s['method']}: "
              f"{s['n_failed']}/{s['n_windows']} windows failed", file=sys.stderr)
    _write_manifest(args.out, "sweep", cfg, args.config, outputs,
                    {"load_panel": round(t_load, 3), "sweep": round(t_sweep, 3)})
    print(f"sweep: {len(result.summary)} curve rows, {result.meta['n_windows']} windows, "
          f"{len(degraded)} degraded cells -> {args.out}")
    return EXIT_OK


def cmd_verify(args, cfg):
    t0 = time.perf_counter()
    report = run_suite(cfg.verify_settings(), fault=cfg.fault)
    write_report(report, os.path.join(args.out, "theory_report.json"))
    _write_manifest(args.out, "verify", cfg, args.config, ["theory_report.json"],
                    {"verify": round(time.perf_counter() - t0, 3)})
    for name, p in sorted(report["properties"].items()):
        status = "pass" if p["passed"] else f"FAIL (replay seed {p['failing_seed']})"
        print(f"{name}: {status} [{p['checked']} checked, worst {p['worst']:.3g}]")
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_synth(args, cfg):
    t0 = time.perf_counter()
    spec = cfg.planted_spec()
    p = cfg.panel
    panel, lam = synth_panel(spec, p.T_total, p.N, p.D, p.start_month)
    support, _, draw = planted_kernel(spec, p.D)
    save_panel(panel, os.path.join(args.out, "panel.csv"))
    sidecar = {
        "spec": asdict(spec),
        "support": support.tolist(),
        "lambda_support": lam[support].tolist(),
        "feature_scale": float(np.sqrt(2.0 / spec.P_max)),
        "feature_draw": json.loads(draw.to_json()),
    }
    write_json(sidecar, os.path.join(args.out, "true_lambda.json"))
    _write_manifest(args.out, "synth", cfg, args.config, ["panel.csv", "true_lambda.json"],
                    {"synth": round(time.perf_counter() - t0, 3)})
    print(f"synth: {len(panel)} months x {p.N} assets -> {args.out}")
    return EXIT_OK


def cmd_metrics(args, cfg):
    t0 = time.perf_counter()
    source = args.returns or os.path.dirname(os.path.abspath(args.config))
    stored = read_returns(source)
    if not stored:
        raise ValidationError(f"no returns_<c>_<method>.csv files in {source}")
    panel = cfg.load_panel()
    result = recompute_metrics(panel, cfg.sweep_config(), stored)
    write_json({"cells": result.summary, "dominance_bp_over_rl": result.dominance},
               os.path.join(args.out, "metrics.json"))
    write_curves(curve_rows(result), os.path.join(args.out, "curves.csv"))
    _write_manifest(args.out, "metrics", cfg, args.config, ["metrics.json", "curves.csv"],
                    {"metrics": round(time.perf_counter() - t0, 3)})
    print(f"metrics: {len(result.summary)} curve rows from {source} -> {args.out}")
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "verify": cmd_verify, "synth": cmd_synth, "metrics": cmd_metrics}


def build_parser():
    parser = argparse.ArgumentParser(prog="sparsesdf", description="Sparse versus dense interpolating SDFs across model complexity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sweep": "run the out-of-sample complexity sweep",
        "verify": "run the randomized structural-property suite",
        "synth": "write a synthetic planted-kernel panel",
        "metrics": "recompute metrics from stored return series",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="TOML or JSON run configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: config, env, or CPU count)")
        p.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "metrics":
            p.add_argument("--returns", default=None,
                           help="directory with returns_<c>_<method>.csv "
                                "(default: the directory of --config)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, threads=args.threads)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        _error("input", exc)
        return EXIT_INPUT
    except OSError as exc:
        _error("input", exc)
        return EXIT_INPUT
    except SweepError as exc:
        _error("sweep", exc)
        return EXIT_FAILED
    except SdfError as exc:
        _error("failure", exc)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
