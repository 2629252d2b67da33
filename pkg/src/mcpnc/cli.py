"""Command-line entry point: ``mcpnc {sweep,mse,compare} CONFIG [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from .harness import (
    RECEIVERS,
    SWEEP_HEADER,
    load_config,
    run_joint_comparison,
    run_linearization_mse,
    run_sweep,
    write_comparison_csv,
    write_mse_csv,
)

log = logging.getLogger("mcpnc")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", type=Path, help="YAML or JSON configuration file")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--out", type=Path, default=None, help="CSV output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcpnc",
        description="Multichannel phase-noise compensation Monte Carlo experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="coded BER sweep over Eb/N0")
    _common(sw)
    sw.add_argument(
        "--receiver", action="append", choices=RECEIVERS,
        help="receiver(s) to run; repeat to sweep several into one CSV",
    )
    sw.add_argument(
        "--no-timing", action="store_true",
        help="write 0 in the seconds column so output is byte-reproducible",
    )

    ms = sub.add_parser("mse", help="linearization MSE study")
    _common(ms)
    ms.add_argument("--samples", type=int, default=None, help="override sample count")

    cp = sub.add_parser("compare", help="joint vs per-channel smoothing on paired seeds")
    _common(cp)
    cp.add_argument("--frames", type=int, default=None, help="frames per point (default max_frames)")
    cp.add_argument("--no-timing", action="store_true")
    return parser


def _cmd_sweep(args) -> int:
    config = load_config(args.config, master_seed=args.seed)
    receivers = args.receiver or [config.receiver]
    handle = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        handle.write(",".join(SWEEP_HEADER) + "\n")
        for rx in receivers:
            cfg = replace(config, receiver=rx)
            log.info("sweeping %s over %s dB", rx, list(cfg.ebn0_db))
            buf = _RowsOnly(handle)
            run_sweep(cfg, out=buf, threads=args.threads, timing=not args.no_timing)
    finally:
        if args.out:
            handle.close()
    return 0


class _RowsOnly:
    """Pass-through writer that drops the header line of each sweep."""

    def __init__(self, handle):
        self.handle = handle
        self.skipped = False

    def write(self, text: str) -> int:
        if not self.skipped:
            self.skipped = True
            return len(text)
        return self.handle.write(text)

    def flush(self) -> None:
        self.handle.flush()


def _cmd_mse(args) -> int:
    raw = yaml.safe_load(args.config.read_text()) or {}
    spec = raw.get("mse", raw)
    samples = args.samples or int(spec.get("samples", 100_000))
    seed = args.seed if args.seed is not None else int(spec.get("master_seed", raw.get("master_seed", 0)))
    ebn0 = [None if e is None or str(e).lower() in ("inf", "none") else float(e) for e in spec["ebn0_db"]]
    rows = run_linearization_mse(
        [float(x) for x in spec["linewidths_hz"]],
        float(spec.get("baud", 20e9)),
        ebn0,
        samples=samples,
        order=int(spec.get("order", 16)),
        seed=seed,
    )
    write_mse_csv(rows, args.out if args.out else sys.stdout)
    return 0


def _cmd_compare(args) -> int:
    config = load_config(args.config, master_seed=args.seed)
    frames = args.frames or config.max_frames
    rows = run_joint_comparison(config, frames, threads=args.threads)
    write_comparison_csv(rows, args.out if args.out else sys.stdout, timing=not args.no_timing)
    for row in rows:
        log.info(
            "%.2f dB: joint BER %.3e, per-channel BER %.3e",
            row.ebn0_db, row.joint.ber, row.per_channel.ber,
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        raise SystemExit("--threads must be at least 1")
    handlers = {"sweep": _cmd_sweep, "mse": _cmd_mse, "compare": _cmd_compare}
    try:
        return handlers[args.command](args)
    except KeyboardInterrupt:
        log.warning("interrupted; partial results were flushed")
        return 130


if __name__ == "__main__":
    raise SystemExit(main())
