"""Command-line entry point: ``lab <experiment> [--config FILE] [--seed S] [--out DIR] [--render]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .experiments import EXPERIMENTS, ConfigError, load_config, make_config, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description="Run a seeded experiment and report pass/fail.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON file overriding the experiment's default config")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--workers", type=int, help="override the number of worker processes")
    ap.add_argument("--out", help="directory for the JSON and text reports")
    ap.add_argument("--render", action="store_true", help="also write SVG figures to --out")
    ap.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.experiment, args.config)
        extra = {k: v for k, v in (("seed", args.seed), ("workers", args.workers)) if v is not None}
        if extra:
            cfg = make_config(args.experiment, {**cfg, **extra})
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"lab: config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        print(json.dumps(cfg, indent=2, sort_keys=True))
        return 0
    if args.render and not args.out:
        print("lab: --render needs --out", file=sys.stderr)
        return 2
    rep = run(args.experiment, cfg, args.out, args.render)
    sys.stdout.write(rep.to_text())
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
