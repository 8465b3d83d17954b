#!/usr/bin/env python3
"""Generate a reproducible instance corpus on disk.

Usage: python scripts/make_corpus.py --out corpus/ [--seed N] [--count K] ...
Same flags as `permitlab generate`.
"""

import sys

from permitlab.cli import main

if __name__ == "__main__":
    sys.exit(main(["generate"] + sys.argv[1:]))
