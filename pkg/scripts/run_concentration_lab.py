#!/usr/bin/env python3
"""Run the concentration experiment battery and print one verdict line each.

Equivalent CLI: noisyrf conc --experiment all --seed 1
"""

import argparse
import json
import sys

from noisyrf.conclab import run_default_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--json", action="store_true", help="dump full reports as JSON")
    args = ap.parse_args()

    reports = run_default_suite(args.seed)
    if args.json:
        print(json.dumps([r.to_dict() for r in reports], indent=2))
    else:
        for r in reports:
            print(f"{r.name:<28} trials={r.trials:<8} {r.verdict}")
    return 2 if any(not r.passed for r in reports) else 0


if __name__ == "__main__":
    sys.exit(main())
