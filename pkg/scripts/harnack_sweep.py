"""Harnack minimum along MCF for h = 2 + a cos(2 theta) over a range of amplitudes.

Writes a two-column file (amplitude, minimum) and prints the table.

    python scripts/harnack_sweep.py [--out FILE] [--amplitudes 0 0.1 0.2 0.3]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from entroflow.harness import load_scenario, run_scenario


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="entroflow-out/harnack_sweep.dat")
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.3])
    args = ap.parse_args(argv)
    rows = []
    code = 0
    for a in args.amplitudes:
        rep = run_scenario(load_scenario("harnack-perturbed", [f"geometry.coefficients=[2.0, 0.0, {a!r}]"]))
        if rep.aborted:
            print(f"a={a}: aborted ({rep.abort_reason})")
            code = 3
            continue
        m = rep.check("harnack_min")
        rows.append((a, m.value))
        print(f"a={a:<6g} min {m.value:.6e}  {'PASS' if m.passed else 'FAIL'}")
        code = max(code, 0 if m.passed else 1)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("# amplitude harnack_min\n" + "".join(f"{a!r} {v!r}\n" for a, v in rows))
    print(f"-> {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
