"""Run every sweep config in configs/ (or the ones named) through the CLI."""
import argparse
import sys
from pathlib import Path

from fastia.cli import main

ROOT = Path(__file__).resolve().parent.parent


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("names", nargs="*", help="config stems, e.g. a5_jump (default: all)")
    ap.add_argument("--jobs", type=int, default=1)
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    paths = sorted((ROOT / "configs").glob("*.ini"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    (ROOT / "results").mkdir(exist_ok=True)
    worst = 0
    for p in paths:
        print(f"== {p.stem}", flush=True)
        worst = max(worst, main(["sweep", "--config", str(p), "--jobs", str(args.jobs)]))
    sys.exit(worst)
