"""Command-line entry point: ``rockrisk [run|example1|example2|cdf] --config FILE``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, apply_overrides, load_config
from .experiments import run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rockrisk", description=__doc__)
    ap.add_argument("command", nargs="?", default="run",
                    choices=("run", "example1", "example2", "cdf"),
                    help="experiment to run; 'run' uses the config's experiment field")
    ap.add_argument("--config", required=True,
                    help="config file (bundled names such as example1_desk.cfg also work)")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--seed", type=int, help="override the sampling seed")
    ap.add_argument("--workers", type=int, help="parallel parameter-tuple workers")
    ap.add_argument("--full-scale", action="store_true", help="switch to the paper-scale parameters")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    workers = args.workers
    if workers is None and os.environ.get("ROCKRISK_WORKERS"):
        try:
            workers = int(os.environ["ROCKRISK_WORKERS"])
        except ValueError:
            print("error: ROCKRISK_WORKERS must be an integer", file=sys.stderr)
            return 2
    try:
        cfg = load_config(args.config)
        if args.command != "run":
            cfg = apply_overrides(cfg, experiment=args.command)
        cfg = apply_overrides(cfg, full_scale=args.full_scale, output_dir=args.out,
                              seed=args.seed, workers=workers)
        cfg.validate()
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    paths = run(cfg)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
