#!/usr/bin/env python3
"""
Static report builder for CBRT experiment results.
Renders every summary.md and chart under out/ into public/
"""

import sys
from pathlib import Path

# Paths
BASE_DIR = Path(__file__).parent
SRC_DIR = BASE_DIR / "src"
RESULTS_DIR = BASE_DIR / "out"
PUBLIC_DIR = BASE_DIR / "public"

sys.path.insert(0, str(SRC_DIR))

from cbrt.experiments.site import build_report  # noqa: E402


def main():
    """Build the entire report site"""
    print("Building CBRT report...")

    if not RESULTS_DIR.exists():
        print(f"Warning: {RESULTS_DIR} not found, building an empty index")

    for page in build_report(RESULTS_DIR, PUBLIC_DIR):
        print(f"Built {page.name}")

    print("\n✓ Build complete!")
    print(f"Output: {PUBLIC_DIR}")


if __name__ == "__main__":
    main()
