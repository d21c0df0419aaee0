#!/usr/bin/env python3
"""Recompute the published order decompositions and print the pass/fail table."""

import sys

from shormps.cli import main

if __name__ == "__main__":
    sys.exit(main(["verify-paper", *sys.argv[1:]]))
