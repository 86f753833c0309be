"""Cut-and-choose detection rate against the closed form and the exact hypergeometric value.

    python3 scripts/run_detection_sweep.py --trials 10000 --out results/detection.csv
"""

import argparse
import sys
from pathlib import Path

from vosc.harness import rows_csv, sweep_detection


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--zetas", default="16,64,128,256")
    ap.add_argument("--fractions", default="0.0625,0.125,0.25")
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--opened", type=int, default=None, help="handles opened per bit; default zeta/16")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)
    rows = sweep_detection([int(z) for z in args.zetas.split(",")],
                           [float(f) for f in args.fractions.split(",")],
                           args.trials, seed=args.seed, opened=args.opened)
    text = rows_csv(rows)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
