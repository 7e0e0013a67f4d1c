"""Run every bundled scenario and print a one-line verdict per scenario.

    python scripts/run_all_scenarios.py [--out DIR] [--workers N]
"""

from __future__ import annotations

import argparse
import sys

from entroflow.harness import bundled_scenarios
from entroflow.harness.cli import main as cli_main


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="entroflow-out")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    names = list(bundled_scenarios())
    return cli_main(["run", *names, "--out", args.out, "--workers", str(args.workers)])


if __name__ == "__main__":
    sys.exit(main())
