"""Randomized real-versus-ideal OSC comparison over every application.

    python3 scripts/run_equivalence.py --cases 500 --seed 7 --zeta 64 --out results/equivalence.json
"""

import argparse
import json
import sys
import time
from pathlib import Path

from vosc.harness import run_equivalence_suite


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=500)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--zeta", type=int, default=64)
    ap.add_argument("--sabotage-p", type=float, default=0.25)
    ap.add_argument("--inject-skip-verify", action="store_true")
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    summary = run_equivalence_suite(args.seed, args.cases, zeta=args.zeta, sabotage_p=args.sabotage_p,
                                    inject_skip_verify=args.inject_skip_verify)
    text = json.dumps(summary, sort_keys=True, indent=2)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text + "\n")
    print(f"{summary['mismatch_count']} mismatches in {args.cases} cases, "
          f"{time.perf_counter() - t0:.1f}s", file=sys.stderr)
    print(text)
    return 1 if summary["mismatch_count"] else 0


if __name__ == "__main__":
    sys.exit(main())
