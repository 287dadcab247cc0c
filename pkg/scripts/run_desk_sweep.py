#!/usr/bin/env python3
"""Run the default desk-scale n-sweep and write plot-ready CSVs.

Usage: python scripts/run_desk_sweep.py [--out DIR] [--workers N]
"""

import argparse
import sys
from pathlib import Path

from adhocsim import cli

ROOT = Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/desk")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    args = parser.parse_args()
    argv = [
        "sweep",
        "--config", str(ROOT / "configs" / "desk.ini"),
        "--out", args.out,
        "--workers", str(args.workers),
    ] + [f"--set={s}" for s in args.set]
    return cli.main(argv)


if __name__ == "__main__":
    sys.exit(main())
