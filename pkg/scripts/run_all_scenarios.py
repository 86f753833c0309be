"""Run every scenario file and write one JSON result per scenario.

    python3 scripts/run_all_scenarios.py --out results/scenarios
"""

import argparse
import sys
from pathlib import Path

from vosc.harness import ScenarioConfig, rounds_csv, run_scenario

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenarios", type=Path, default=ROOT / "scenarios")
    ap.add_argument("--out", type=Path, default=ROOT / "results" / "scenarios")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for path in sorted(args.scenarios.glob("*.yaml")):
        res = run_scenario(ScenarioConfig.load(path))
        (args.out / f"{path.stem}.json").write_text(res.to_json())
        (args.out / f"{path.stem}.csv").write_text(rounds_csv(res))
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {path.name} ({res.wall_clock:.2f}s)")
        failed += not res.passed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
