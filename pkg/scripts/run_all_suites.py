#!/usr/bin/env python3
"""Run every verification suite at acceptance scale and write reports.

Usage: python scripts/run_all_suites.py [--seed N] [--out DIR] [--workers K]
"""

import argparse
import sys
import time

from permitlab.cli import ALL_SUITES
from permitlab.suites import run_suite


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20260808)
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()
    ok = True
    for suite in ALL_SUITES:
        t0 = time.time()
        summary = run_suite(
            suite, seed=args.seed, out_dir=args.out, workers=args.workers
        )
        status = "pass" if summary["all_passed"] else "FAIL"
        print(
            f"[{status}] {suite}: {summary['passed_instances']}/{summary['instances']} "
            f"({time.time() - t0:.1f}s)"
        )
        ok = ok and summary["all_passed"]
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
