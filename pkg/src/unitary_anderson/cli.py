"""Command line entry point: ``unitary-anderson {run,validate,sweep} CONFIG``."""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import replace

from .experiments import (EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, OUTPUT_ENV, ValidationError, load_config, run,
                          sweep, validate)

log = logging.getLogger("unitary_anderson")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unitary-anderson", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name, help=f"{name} an experiment config")
        p.add_argument("config")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--output", help=f"output directory (default: ${OUTPUT_ENV} or ./results)")
    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
    except (KeyError, ValueError, OSError, configparser.Error) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.command == "validate":
        violations = validate(cfg)
        for v in violations:
            print(v)
        return EXIT_INVALID if violations else EXIT_OK
    over = {k: v for k, v in (("seed", args.seed), ("workers", args.workers), ("output_dir", args.output))
            if v is not None}
    cfg = replace(cfg, **over)
    try:
        manifest = run(cfg) if args.command == "run" else sweep(cfg)
    except ValidationError as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # any module failure is a runtime failure
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if manifest is None:
        log.info("empty grid, nothing written")
    else:
        for name, digest in manifest["outputs"].items():
            print(f"{name}  {digest[:12]}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
