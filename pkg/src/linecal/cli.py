"""Command line entry point: ``calibrate run`` and ``calibrate gen-network``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from linecal.exceptions import CalibrationError
from linecal.pipeline import RunConfig, emit_report, run
from linecal.presets import PRESETS

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="calibrate",
                                description="Joint line-parameter estimation and CT/PT calibration")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate, estimate and write reports")
    r.add_argument("--config", help="JSON run config; flags given on the command line override it")
    r.add_argument("--network", help="network JSON file")
    r.add_argument("--seed", type=int)
    r.add_argument("--frames", type=int, dest="n_frames")
    r.add_argument("--portions", type=int)
    r.add_argument("--quant-v", type=float, help="voltage quantization scale in volts")
    r.add_argument("--quant-i", type=float, help="current quantization scale in amperes")
    r.add_argument("--out", dest="out_dir")
    r.add_argument("--no-quant", action="store_true", help="disable quantization")
    r.add_argument("--no-ratio-errors", action="store_true", help="set every ratio error to 1")
    r.add_argument("--pooled-qp", action="store_true", help="solve KCL on all frames at once")
    r.add_argument("--pin-injections", action="store_true",
                   help="treat injection channels as accurate")
    r.add_argument("--no-merge", action="store_true", help="do not merge parallel lines")

    g = sub.add_parser("gen-network", help="write a bundled example network")
    g.add_argument("--preset", required=True, choices=sorted(PRESETS))
    g.add_argument("--out", help="output file; stdout when omitted")
    return p


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for name in ("network", "seed", "n_frames", "portions", "quant_v", "quant_i", "out_dir"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    if args.no_quant:
        cfg.quant_v = cfg.quant_i = None
    if args.no_ratio_errors:
        cfg.ratio_errors = False
    if args.pooled_qp:
        cfg.pooled_qp = True
    if args.pin_injections:
        cfg.pin_injections = True
    if args.no_merge:
        cfg.merge_parallel = False
    return cfg


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    if cfg.network is None:
        raise CalibrationError("--network is required")
    report = run(cfg)
    out = cfg.out_dir or "."
    emit_report(report, out)
    counts = {s: sum(r.status == s for r in report.lines) for s in ("ok", "failed", "skipped")}
    print(f"{len(report.lines)} lines: {counts['ok']} ok, {counts['failed']} failed, "
          f"{counts['skipped']} skipped; reports in {out}")
    return EXIT_PARTIAL if report.partial else EXIT_OK


def _cmd_gen_network(args) -> int:
    text = json.dumps(PRESETS[args.preset](), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_gen_network(args)
    except (CalibrationError, OSError, ValueError, KeyError) as exc:
        print(f"calibrate: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
