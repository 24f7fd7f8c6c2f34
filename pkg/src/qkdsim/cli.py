"""``qkdsim <scenario> --config <path> [--seed N] [--out DIR]``.

Exit codes: 0 success, 2 config validation error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import config as cfgmod
from .errors import ConfigError
from .scenarios import run

log = logging.getLogger("qkdsim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qkdsim", description="SMZI phase-coding decoy BB84 simulator")
    p.add_argument("scenario", choices=cfgmod.SCENARIOS)
    p.add_argument("--config", help="JSON config (system/channel/scenario/security); defaults if omitted")
    p.add_argument("--seed", type=int, default=None, help="override scenario.seed")
    p.add_argument("--out", default=None, help="output directory (overrides scenario.output_path)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            cfg = cfgmod.load(args.config, scenario=args.scenario)
        else:
            cfg = cfgmod.from_dict({}, scenario=args.scenario)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, output_path=args.out)
    except ConfigError as exc:
        print(f"qkdsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        log.info("running %s (seed %d)", cfg.scenario, cfg.seed)
        report = run(cfg)
        paths = report.write(cfg.output_path)
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        print(f"qkdsim: {cfg.scenario} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
