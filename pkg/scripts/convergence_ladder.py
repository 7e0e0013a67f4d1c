"""Resolution-ladder study for the scenarios that support one.

    python scripts/convergence_ladder.py [--out DIR] [scenario ...]
"""

from __future__ import annotations

import argparse
import sys

from entroflow.harness.cli import main as cli_main

DEFAULT = ("mixture-advection", "rigidity-n1", "rigidity-n2")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenarios", nargs="*", default=list(DEFAULT))
    ap.add_argument("--out", default="entroflow-out")
    args = ap.parse_args(argv)
    return cli_main(["study", *args.scenarios, "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
