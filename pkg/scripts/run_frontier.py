"""Verified-but-unreconstructible events per corruption count next to the counting oracle.

    python3 scripts/run_frontier.py --zeta 32 --corrupt 8-14 --trials 1500
"""

import argparse
import sys
from pathlib import Path

from vosc.harness import rows_csv, sweep_frontier


def parse_counts(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition("-")
        out.extend(range(int(lo), int(hi or lo) + 1))
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--zeta", type=int, default=128)
    ap.add_argument("--corrupt", default="8,16,24,32,40,48,56", help="comma list, ranges like 8-14 allowed")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)
    text = rows_csv(sweep_frontier(args.zeta, parse_counts(args.corrupt), args.trials, seed=args.seed))
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
