"""Command-line entry point: run, sweep-detection, sweep-frontier, equivalence, selftest."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness

log = logging.getLogger("vosc")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


def _csv_list(cast):
    def parse(text: str):
        try:
            return [cast(p) for p in text.split(",") if p.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    return parse


def _fraction(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return int(num) / int(den)
    return float(text)


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = harness.ScenarioConfig.load(args.scenario, args.seed)
    result = harness.run_scenario(cfg)
    _write(args.out, result.to_json())
    if args.csv:
        Path(args.csv).write_text(harness.rounds_csv(result))
    for name, ok in result.aggregates["checks"].items():
        log.info("%s: %s", name, "PASS" if ok else "FAIL")
    log.info("wall clock %.2fs", result.wall_clock)
    return EXIT_OK if result.passed else EXIT_CHECK


def cmd_sweep_detection(args) -> int:
    for z in args.zeta:
        if z <= 0 or z % 16:
            raise harness.ConfigError(f"zeta {z} is not a positive multiple of 16")
    rows = harness.sweep_detection(args.zeta, args.fractions, args.trials, args.seed, args.opened)
    _write(args.out, harness.rows_csv(rows))
    return EXIT_OK


def cmd_sweep_frontier(args) -> int:
    rows = harness.sweep_frontier(args.zeta, args.corrupt, args.trials, args.seed)
    _write(args.out, harness.rows_csv(rows))
    return EXIT_OK


def cmd_equivalence(args) -> int:
    def progress(j, info):
        if (j + 1) % 50 == 0:
            log.info("case %d", j + 1)
    report = harness.run_equivalence_suite(args.seed, args.cases, args.zeta, args.inject_skip_verify,
                                           progress=progress)
    _write(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    log.info("%d mismatches over %d cases", report["mismatch_count"], report["cases"])
    return EXIT_CHECK if report["mismatch_count"] else EXIT_OK


def cmd_selftest(args) -> int:
    results = harness.selftest(args.seed)
    for name, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vosc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("--scenario", required=True)
    r.add_argument("--seed", type=int, default=None, help="overrides the file's seed")
    r.add_argument("--out")
    r.add_argument("--csv", help="optional per-round CSV")
    r.set_defaults(fn=cmd_run)

    d = sub.add_parser("sweep-detection", help="cut-and-choose detection rates")
    d.add_argument("--zeta", type=_csv_list(int), default=[16, 64, 128])
    d.add_argument("--fractions", type=_csv_list(_fraction), default=[0.125, 0.375])
    d.add_argument("--trials", type=int, default=1000)
    d.add_argument("--opened", type=int, default=None, help="handles opened per bit (default zeta/16)")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(fn=cmd_sweep_detection)

    fr = sub.add_parser("sweep-frontier", help="verified-but-unreconstructible events by corruption count")
    fr.add_argument("--zeta", type=int, default=128)
    fr.add_argument("--corrupt", type=_csv_list(int), default=[16, 32, 47, 48, 56, 64])
    fr.add_argument("--trials", type=int, default=1000)
    fr.add_argument("--seed", type=int, default=0)
    fr.add_argument("--out")
    fr.set_defaults(fn=cmd_sweep_frontier)

    e = sub.add_parser("equivalence", help="real vs ideal output traces on random cases")
    e.add_argument("--cases", type=int, default=500)
    e.add_argument("--seed", type=int, default=7)
    e.add_argument("--zeta", type=int, default=64)
    e.add_argument("--inject-skip-verify", action="store_true",
                   help="deliberately skip receiver verification (checker self-test)")
    e.add_argument("--out")
    e.set_defaults(fn=cmd_equivalence)

    s = sub.add_parser("selftest", help="quick end-to-end sanity checks")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.fn(args)
    except harness.ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
