#!/usr/bin/env python3
"""How much the permit bundle beats cost revelation on the equal-revenue family.

Prints, for growing item counts, the exact item-pricing and permit-bundling
optima (the former is always exactly 1) and their ratio.

Usage: python scripts/equal_revenue_table.py [--truncation K] [--max-m M]
"""

import argparse

from permitlab.oracles import brute_posted_price_opt, example_1_1
from permitlab.rational import rat_str


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--truncation", type=int, default=6)
    ap.add_argument("--max-m", type=int, default=8)
    args = ap.parse_args()
    print(f"{'m':>3}  {'item pricing':>14}  {'permit bundle':>14}  {'ratio':>8}")
    m = 2
    while m <= args.max_m:
        inst = example_1_1(m, args.truncation)
        ip = brute_posted_price_opt(inst, "IP").value
        pb = brute_posted_price_opt(inst, "PB").value
        print(
            f"{m:>3}  {rat_str(ip):>14}  {rat_str(pb):>14}  {float(pb / ip):>8.4f}"
        )
        m *= 2


if __name__ == "__main__":
    main()
