"""Scenario runner, fault injection, parameter sweeps and the equivalence suite.

All randomness descends from one root seed through named children, and no
wall-clock value is ever written into a result, so equal (config, seed)
pairs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import jsonschema
import yaml

from . import apps, ver_otp
from .garbling import BooleanCircuit, Gate
from .osc import EquivalenceReport, OscFunction, OscParams, Round, SenderSabotage, check_equivalence
from .rng import SeedTree
from .ver_otp import ReconstructionFailure, Relation, Sabotage, VerOtpParams
from .world import World

APPS = ("sum", "propose", "auction", "dp")
SABOTAGE_KINDS = ("honest", "bad-garbling", "corrupt-shares", "wrong-relation")
STRATEGIES = ("all", "singles", "script", "double-eval", "random")


class ConfigError(ValueError):
    pass


_BEHAVIOR = {
    "oneOf": [
        {"enum": ["honest", "bad-garbling", "wrong-relation"]},
        {"type": "object", "required": ["kind"], "additionalProperties": False,
         "properties": {"kind": {"enum": list(SABOTAGE_KINDS)},
                        "m": {"type": "integer", "minimum": 0},
                        "wire": {"type": "integer", "minimum": 0},
                        "bit": {"enum": [0, 1]}}},
    ]
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["app", "senders"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "app": {"enum": list(APPS)},
        "seed": {"type": "integer"},
        "params": {
            "type": "object", "additionalProperties": False,
            "properties": {"zeta": {"type": "integer", "minimum": 16, "multipleOf": 16},
                           "lambda": {"type": "integer", "enum": [64, 128, 256]},
                           "ct_bits": {"type": "integer", "minimum": 4, "maximum": 16}},
        },
        "k": {"type": "integer", "minimum": 1, "maximum": 16},
        "a": {"type": "integer", "minimum": 1, "maximum": 64},
        "board_size": {"type": "integer", "minimum": 1, "maximum": 15},
        "value": {"type": "string", "maxLength": 16},
        "bid_bits": {"type": "integer", "minimum": 1, "maximum": 32},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "senders": {
            "type": "array",
            "items": {
                "type": "object", "additionalProperties": False,
                "properties": {"value": {"type": "integer", "minimum": 0},
                               "bid": {"type": "integer", "minimum": 0},
                               "datum": {"type": "integer", "minimum": 0},
                               "noise_seed": {"type": "integer", "minimum": 0},
                               "credential": {"enum": ["valid", "forged"]},
                               "behavior": _BEHAVIOR},
            },
        },
        "receiver": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "strategy": {"enum": list(STRATEGIES)},
                "rounds": {"type": "array", "items": {
                    "type": "object", "required": ["senders"], "additionalProperties": False,
                    "properties": {"senders": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                                   "when": {"enum": ["always", "nonbottom", "bottom"]},
                                   "filler": {"type": "object",
                                              "additionalProperties": {"type": ["integer", "null"]}}}}},
            },
        },
    },
}


@dataclass
class ScenarioConfig:
    app: str
    senders: list[dict]
    name: str = "scenario"
    seed: int = 0
    zeta: int = 64
    lam: int = 128
    ct_bits: int = 8
    k: int | None = None
    a: int = 16
    board_size: int | None = None
    value: str = "block42"
    bid_bits: int = 16
    scale: float = 1.0
    strategy: str = "all"
    rounds: list[dict] = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: dict, seed: int | None = None) -> "ScenarioConfig":
        try:
            jsonschema.validate(raw, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as e:
            raise ConfigError(f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}") from None
        params = raw.get("params", {})
        receiver = raw.get("receiver", {})
        cfg = cls(app=raw["app"], senders=list(raw["senders"]), name=raw.get("name", "scenario"),
                  seed=raw.get("seed", 0) if seed is None else seed,
                  zeta=params.get("zeta", 64), lam=params.get("lambda", 128),
                  ct_bits=params.get("ct_bits", 8), k=raw.get("k"), a=raw.get("a", 16),
                  board_size=raw.get("board_size"), value=raw.get("value", "block42"),
                  bid_bits=raw.get("bid_bits", 16), scale=raw.get("scale", 1.0),
                  strategy=receiver.get("strategy", "all"), rounds=receiver.get("rounds", []))
        cfg._check()
        return cfg

    @classmethod
    def load(cls, path: str | Path, seed: int | None = None) -> "ScenarioConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(str(e)) from None
        if not isinstance(raw, dict):
            raise ConfigError("scenario file must hold a mapping")
        return cls.from_dict(raw, seed)

    def _check(self) -> None:
        n = len(self.senders)
        if self.strategy == "script" and not self.rounds:
            raise ConfigError("script strategy needs receiver.rounds")
        for r in self.rounds:
            if any(i >= n for i in r["senders"]):
                raise ConfigError(f"round names sender outside 0..{n - 1}")
        if self.app in ("propose", "auction"):
            if self.board_size is not None and self.board_size < n:
                raise ConfigError("more senders than board entries")
        if self.app == "sum" and self.k is not None and self.k < 1:
            raise ConfigError("k must be positive")

    def echo(self) -> dict:
        return asdict(self)


def parse_behavior(spec) -> SenderSabotage | None:
    if spec is None or spec == "honest":
        return None
    if isinstance(spec, str):
        return SenderSabotage(spec.replace("-", "_"))
    kind = spec["kind"]
    if kind == "honest":
        return None
    return SenderSabotage(kind.replace("-", "_"), spec.get("m", 0), spec.get("wire", 0), spec.get("bit", 0))


# -- application setup ------------------------------------------------------

@dataclass
class AppSetup:
    f: OscFunction
    inputs: list[int]
    first_slot: int
    fixed_filler: dict[int, int | None]
    valid: list[bool]
    majority: int | None = None
    board: apps.BulletinBoard | None = None
    signatures: apps.SignatureRegistry | None = None

    @property
    def capacity(self) -> int:
        return self.f.k - self.first_slot


def build_app(cfg: ScenarioConfig, seeds: SeedTree) -> AppSetup:
    n = len(cfg.senders)
    if cfg.app == "sum":
        k = cfg.k or max(n, 1)
        f = OscFunction(f"sum{cfg.a}", k, cfg.a, cfg.a + k.bit_length(),
                        lambda xs: sum(x for x in xs if x is not None))
        inputs = [s.get("value", 0) for s in cfg.senders]
        return AppSetup(f, inputs, 0, {}, [True] * n)
    if cfg.app == "dp":
        k = cfg.k or max(n, 1)
        f = apps.f_dp_aggregate(k, cfg.scale, cfg.a)
        rng = seeds.child("dp-seed").rng()
        inputs = [apps.pack_dp(s.get("noise_seed", rng.getrandbits(apps.SEED_BITS)), s.get("datum", 0), cfg.a)
                  for s in cfg.senders]
        return AppSetup(f, inputs, 0, {}, [True] * n)

    N = cfg.board_size or max(n, 1)
    sigs = apps.SignatureRegistry()
    key_rng = seeds.child("board").rng()
    keys = [sigs.keygen(key_rng) for _ in range(N)]
    board, proofs = apps.board_register([pk for _, pk in keys])
    forge_rng = seeds.child("forgery").rng()
    inputs, valid = [], []
    for i, s in enumerate(cfg.senders):
        ok = s.get("credential", "valid") == "valid"
        sk = keys[i][0] if ok else forge_rng.randbytes(apps.SK_LEN)
        if cfg.app == "propose":
            inputs.append(apps.pack_sigma(sk, proofs[i], board.depth))
        else:
            bid = s.get("bid", 0)
            if bid >= 1 << cfg.bid_bits:
                raise ConfigError(f"bid {bid} exceeds {cfg.bid_bits} bits")
            inputs.append(apps.pack_sigma(sk, proofs[i], board.depth, bid, (cfg.bid_bits + 7) // 8))
        valid.append(ok)
    if cfg.app == "propose":
        f = apps.f_propose(board)
        v = int.from_bytes(cfg.value.encode().ljust(16, b"\0"), "big")
        return AppSetup(f, inputs, 1, {0: v}, valid, N // 2 + 1, board, sigs)
    return AppSetup(apps.f_auction(board, cfg.bid_bits), inputs, 0, {}, valid, N // 2 + 1, board, sigs)


# -- receiver strategies ----------------------------------------------------

def _round(senders: list[int], setup: AppSetup, filler: dict | None = None) -> Round:
    fill = dict(setup.fixed_filler)
    fill.update(filler or {})
    return Round(tuple(senders), tuple(range(setup.first_slot, setup.first_slot + len(senders))), fill)


def make_strategy(cfg: ScenarioConfig, setup: AppSetup) -> Callable[[list[int]], Callable]:
    cap = setup.capacity

    def factory(order: list[int]):
        arrival = {n: i for i, n in enumerate(order)}
        state = {"step": 0}

        def chunked(L, Y):
            ids = sorted(L, key=lambda i: order[i])[:cap]
            return _round(ids, setup)

        def singles(L, Y):
            return _round([min(L, key=lambda i: order[i])], setup)

        def script(L, Y):
            while state["step"] < len(cfg.rounds):
                spec = cfg.rounds[state["step"]]
                state["step"] += 1
                when = spec.get("when", "always")
                if Y and when == "nonbottom" and Y[-1] is None:
                    continue
                if Y and when == "bottom" and Y[-1] is not None:
                    continue
                ids = [arrival[n] for n in spec["senders"] if arrival[n] in L][:cap]
                if not ids:
                    continue
                filler = {int(k): v for k, v in spec.get("filler", {}).items()}
                return _round(ids, setup, filler)
            return None

        def double_eval(L, Y):
            state["step"] += 1
            if state["step"] == 1:
                return chunked(L, Y)
            if state["step"] == 2 and order:
                # reuse the first sender of round one
                first = sorted(range(len(order)), key=lambda i: order[i])[0]
                return _round([first], setup)
            return None

        return {"all": chunked, "singles": singles, "script": script,
                "double-eval": double_eval}[cfg.strategy]

    if cfg.strategy == "random":
        return random_strategy(setup, SeedTree(cfg.seed).child("strategy"))
    return factory


def random_strategy(setup: AppSetup, seeds: SeedTree, stop_p: float = 0.15) -> Callable:
    """Seeded adaptive strategy: the next round depends on the outputs so far."""
    cap = setup.capacity

    def factory(order: list[int]):
        rng = seeds.rng()

        def strategy(L, Y):
            if Y and rng.random() < stop_p:
                return None
            if Y and Y[-1] is None and rng.random() < 0.3:
                return None
            ids = sorted(L)
            rng.shuffle(ids)
            size = rng.randint(1, min(cap, len(ids))) if cap else 0
            picked = ids[:size]
            slots = rng.sample(range(setup.first_slot, setup.f.k), size)
            filler = dict(setup.fixed_filler)
            for slot in range(setup.f.k):
                if slot in slots or slot in filler:
                    continue
                if setup.f.name.startswith("sum") and rng.random() < 0.5:
                    filler[slot] = rng.randrange(1 << setup.f.a)
                elif setup.f.name.startswith("dp") and rng.random() < 0.3:
                    filler[slot] = rng.randrange(1 << setup.f.a)
            return Round(tuple(picked), tuple(slots), filler)

        return strategy

    return factory


# -- scenario execution -----------------------------------------------------

@dataclass
class ExperimentResult:
    config: dict
    records: dict
    aggregates: dict
    passed: bool
    wall_clock: float = field(default=0.0, compare=False)

    def to_json(self) -> str:
        # wall-clock stays out of the file
        body = {"config": self.config, "records": self.records,
                "aggregates": self.aggregates, "pass": self.passed}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _signature_ok(setup: AppSetup, y) -> bool:
    if y is None or setup.signatures is None:
        return True
    pks = setup.board.entries
    if setup.f.name.startswith("propose"):
        msg = apps.propose_message(bytes.fromhex(y["v"]))
        return all(setup.signatures.verify(pks[i], msg, bytes.fromhex(s)) for i, s in y["sigs"])
    return setup.signatures.verify(pks[y["winner"]], apps.payment_message(y["bid"]), bytes.fromhex(y["sig"]))


def scenario_checks(cfg: ScenarioConfig, setup: AppSetup, report: EquivalenceReport) -> dict[str, bool]:
    checks = {"equivalence": report.match}
    trace = report.trace
    if cfg.strategy == "double-eval":
        checks["double_use_blocked"] = (report.real_blocked is not None and report.ideal_blocked is not None
                                        and trace is not None and len(trace.Y) <= 1)
    if setup.majority is not None and trace is not None:
        described = [setup.f.describe(y) for y in trace.Y]
        checks["signatures_verify"] = all(_signature_ok(setup, y) for y in described)
        checks["at_most_one_output"] = sum(y is not None for y in trace.Y) <= 1
        good = set(trace.verified)
        minority_bottom = True
        for rnd in trace.rounds:
            honest = {report.order[i] for i in rnd["S"] if i in good and setup.valid[report.order[i]]}
            if len(honest) < setup.majority and rnd["y"] is not None:
                minority_bottom = False
        checks["minority_rounds_bottom"] = minority_bottom
    return checks


def run_scenario(cfg: ScenarioConfig, inject_skip_verify: bool = False) -> ExperimentResult:
    t0 = time.perf_counter()
    seeds = SeedTree(cfg.seed)
    setup = build_app(cfg, seeds.child("app"))
    sabotage = [parse_behavior(s.get("behavior")) for s in cfg.senders]
    params = OscParams(cfg.zeta, cfg.lam, cfg.ct_bits)
    report = check_equivalence(setup.inputs, sabotage, make_strategy(cfg, setup), setup.f, params,
                               seeds.child("run"), skip_verify=inject_skip_verify,
                               check_plan=cfg.strategy != "double-eval")
    checks = scenario_checks(cfg, setup, report)
    records = {"report": report.as_json(setup.f)}
    if setup.board is not None:
        records["board"] = setup.board.to_json()
    aggregates = {"checks": checks, "mismatches": int(not report.match),
                  "rounds": len(report.trace.rounds) if report.trace else 0}
    return ExperimentResult(cfg.echo(), records, aggregates, all(checks.values()),
                            time.perf_counter() - t0)


def rounds_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "S", "J", "y"])
    trace = result.records["report"]["trace"] or {"rounds": []}
    for j, r in enumerate(trace["rounds"]):
        w.writerow([j, " ".join(map(str, r["S"])), " ".join(map(str, r["J"])),
                    json.dumps(r["y"], sort_keys=True)])
    return buf.getvalue()


# -- cut-and-choose sweeps --------------------------------------------------

XOR_GATE = BooleanCircuit(2, (Gate("XOR", (0, 1), 2),), (2,))
ANY = Relation("any", lambda s, z: True)


def closed_form_detection(zeta: int, fraction: float, opened: int | None = None) -> float:
    m = zeta // 16 if opened is None else opened
    return 1 - (1 - fraction) ** m


def exact_detection(zeta: int, corrupt: int, opened: int) -> float:
    """Probability a uniform opened subset hits at least one corrupted handle."""
    return 1 - math.comb(zeta - corrupt, opened) / math.comb(zeta, opened)


def unreconstructible_probability(zeta: int, corrupt: int, opened: int) -> float:
    """P(verification passes and fewer than threshold valid shares survive)
    with corruption on the evaluated bit only."""
    t = zeta // 2 + 1
    survivors = zeta - 2 * opened
    p_pass = math.comb(zeta - corrupt, opened) / math.comb(zeta, opened)
    if p_pass == 0.0:
        return 0.0
    rest = zeta - opened
    total = 0.0
    for j in range(0, min(corrupt, opened) + 1):
        if survivors - (corrupt - j) < t:
            total += math.comb(corrupt, j) * math.comb(rest - corrupt, opened - j) / math.comb(rest, opened)
    return p_pass * total


def _sabotaged_trial(zeta: int, c: int, beta: int, seeds: SeedTree, opened: int | None, evaluate: bool):
    world = World.create(seeds.child("world"))
    rng = seeds.child("subsets").rng()
    params = VerOtpParams(b=1, zeta=zeta, opened_per_bit=opened)
    bad = frozenset(rng.sample(range(1, zeta + 1), c))
    s = rng.getrandbits(1)
    bundle = ver_otp.create((s,), b"", world.crs, XOR_GATE, ANY, params, world, seeds.child("garble").rng(),
                            Sabotage(corrupt={(0, beta): bad}) if c else None)
    ok, verified = ver_otp.verify(bundle, b"", world.crs, XOR_GATE, ANY, params, world,
                                  seeds.child("verify").rng())
    if not ok or not evaluate:
        return ok, None
    try:
        out = ver_otp.eval(verified, (beta,), world)
    except ReconstructionFailure:
        return ok, "unreconstructible"
    return ok, "correct" if out == (s ^ beta,) else "wrong"


def sweep_detection(zetas, fractions, trials: int, seed: int = 0, opened: int | None = None) -> list[dict]:
    rows = []
    root = SeedTree(seed).child("sweep-detection")
    for zeta in zetas:
        if zeta % 16:
            raise ConfigError(f"zeta {zeta} is not a multiple of 16")
        m = opened if opened is not None else zeta // 16
        for frac in fractions:
            c = round(frac * zeta)
            node = root.child(f"{zeta}:{frac}")
            detected = sum(not _sabotaged_trial(zeta, c, 0, node.child(t), opened, False)[0]
                           for t in range(trials))
            rows.append({"zeta": zeta, "fraction": frac, "corrupt": c, "opened": m, "trials": trials,
                         "detected": detected, "rate": detected / trials if trials else 0.0,
                         "closed_form": closed_form_detection(zeta, frac, m),
                         "exact": exact_detection(zeta, c, m)})
    return rows


def sweep_frontier(zeta: int, corrupt_counts, trials: int, seed: int = 0) -> list[dict]:
    """Verified-but-unreconstructible events per corruption count, next to the counting oracle."""
    rows = []
    root = SeedTree(seed).child("sweep-frontier")
    m = zeta // 16
    for c in corrupt_counts:
        node = root.child(f"{zeta}:{c}")
        counts = {"rejected": 0, "correct": 0, "unreconstructible": 0, "wrong": 0}
        for t in range(trials):
            tn = node.child(t)
            beta = tn.child("bit").rng().getrandbits(1)
            ok, outcome = _sabotaged_trial(zeta, c, beta, tn, None, True)
            counts["rejected" if not ok else outcome] += 1
        rows.append({"zeta": zeta, "corrupt": c, "trials": trials, **counts,
                     "event_rate": counts["unreconstructible"] / trials if trials else 0.0,
                     "oracle_event": unreconstructible_probability(zeta, c, m),
                     "oracle_detect": exact_detection(zeta, c, m)})
    return rows


def rows_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


# -- equivalence suite ------------------------------------------------------

def random_case(seeds: SeedTree, app: str, zeta: int, sabotage_p: float = 0.25) -> ScenarioConfig:
    rng = seeds.child("case").rng()
    k = rng.randint(2, 5)
    n_max = k - 1 if app == "propose" else k
    n = rng.randint(0, n_max)
    senders = []
    for i in range(n):
        s: dict[str, Any] = {}
        if app == "sum":
            s["value"] = rng.randrange(1 << 8)
        elif app == "auction":
            s["bid"] = rng.randrange(1 << 8)
        elif app == "dp":
            s["datum"] = rng.randrange(1 << 8)
        if app in ("propose", "auction") and rng.random() < 0.15:
            s["credential"] = "forged"
        if rng.random() < sabotage_p:
            kind = rng.choice(SABOTAGE_KINDS[1:])
            if kind == "corrupt-shares":
                # either inside the always-evaluable region or fully corrupt
                m = rng.choice([rng.randint(1, zeta // 8), zeta])
                s["behavior"] = {"kind": kind, "m": m, "wire": rng.randrange(k * 8), "bit": rng.randrange(2)}
            else:
                s["behavior"] = kind
        senders.append(s)
    raw = {"app": app, "senders": senders, "seed": rng.getrandbits(32),
           "params": {"zeta": zeta}, "receiver": {"strategy": "random"}}
    if app in ("sum", "dp"):
        raw["k"] = k
        raw["a"] = 8
    else:
        raw["board_size"] = max(n_max, 1)
    return ScenarioConfig.from_dict(raw)


def run_equivalence_suite(seed: int, cases: int, zeta: int = 64, inject_skip_verify: bool = False,
                          sabotage_p: float = 0.25, progress: Callable[[int, dict], None] | None = None) -> dict:
    root = SeedTree(seed).child("equivalence")
    per_app = {app: {"cases": 0, "mismatches": 0} for app in APPS}
    mismatches = []
    for j in range(cases):
        app = APPS[j % len(APPS)]
        cfg = random_case(root.child(j), app, zeta, sabotage_p)
        result = run_scenario(cfg, inject_skip_verify)
        rep = result.records["report"]
        per_app[app]["cases"] += 1
        ok = rep["match"]
        if not ok:
            per_app[app]["mismatches"] += 1
            mismatches.append({"case": j, "config": cfg.echo(), "report": rep})
        if progress:
            progress(j, {"app": app, "match": ok})
    return {"seed": seed, "cases": cases, "zeta": zeta, "inject_skip_verify": inject_skip_verify,
            "mismatch_count": len(mismatches), "per_app": per_app, "mismatches": mismatches}


# -- self test --------------------------------------------------------------

def selftest(seed: int = 0) -> list[tuple[str, bool]]:
    out = []
    world = World.create(SeedTree(seed).child("selftest"))
    params = VerOtpParams(b=1, zeta=16)
    rng = random.Random(seed)
    ok_all = True
    for s in (0, 1):
        for x in (0, 1):
            b = ver_otp.create((s,), b"", world.crs, XOR_GATE, ANY, params, world, rng)
            ok, v = ver_otp.verify(b, b"", world.crs, XOR_GATE, ANY, params, world, rng)
            ok_all &= ok and ver_otp.eval(v, (x,), world) == (s ^ x,)
    out.append(("ver-otp round trip", ok_all))
    row = sweep_detection([16], [1.0], 20, seed)[0]
    out.append(("full corruption always detected", row["detected"] == 20))
    row = sweep_detection([16], [0.0], 20, seed)[0]
    out.append(("no corruption never detected", row["detected"] == 0))
    clean = run_equivalence_suite(seed, 8, zeta=16)
    out.append(("equivalence on random cases", clean["mismatch_count"] == 0))
    bugged = run_equivalence_suite(seed, 8, zeta=16, inject_skip_verify=True, sabotage_p=1.0)
    out.append(("checker flags skipped verification", bugged["mismatch_count"] > 0))
    cfg = random_case(SeedTree(seed).child("determinism"), "auction", 16)
    out.append(("byte-identical reruns", run_scenario(cfg).to_json() == run_scenario(cfg).to_json()))
    return out
