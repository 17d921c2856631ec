"""Run every config in configs/ through the CLI into one results tree.

    python3 scripts/run_configs.py --output results --workers 8
"""

import argparse
import sys
from pathlib import Path

from unitary_anderson import cli

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--output", default="results")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("configs", nargs="*", help="defaults to configs/*.ini")
    args = ap.parse_args()

    paths = [Path(p) for p in args.configs] or sorted((ROOT / "configs").glob("*.ini"))
    failed = 0
    for path in paths:
        cmd = "sweep" if "[sweep]" in path.read_text() else "run"
        out = Path(args.output) / path.stem
        print(f"== {path.name} -> {out}")
        code = cli.main([cmd, str(path), "--workers", str(args.workers), "--output", str(out)])
        failed += code != 0
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
