"""Run the acceptance experiments at full scale and print one line each.

    python3 scripts/run_acceptance.py            # everything
    python3 scripts/run_acceptance.py A2 A6      # a subset
    python3 scripts/run_acceptance.py --jobs 4 --out results/acceptance.txt
"""
import argparse
import inspect
import sys
from pathlib import Path

from fastia.experiments import EXPERIMENTS, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("keys", nargs="*", default=list(EXPERIMENTS))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None, help="also append the lines to this file")
    args = ap.parse_args(argv)
    failed = 0
    for key in args.keys:
        fn = EXPERIMENTS[key.upper()]
        kw = {"jobs": args.jobs} if "jobs" in inspect.signature(fn).parameters else {}
        outcome = run_experiment(key, **kw)
        text = outcome.line()
        print(text, flush=True)
        failed += not outcome.passed
        if args.out:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            with open(args.out, "a") as fh:
                fh.write(text + "\n")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
