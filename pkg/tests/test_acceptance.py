"""Acceptance criteria C1..C9. Each test records one PASS/FAIL line.

Expected values come from independent oracles: the plain circuit evaluator,
scipy's hypergeometric and Laplace distributions, sympy's Bell numbers, and
the ideal OSC functionality.
"""

import itertools
import math
import random
import time
from pathlib import Path

import pytest
import sympy
from scipy import stats
from sympy.utilities.iterables import multiset_partitions

from vosc import apps, harness, ver_otp
from vosc.garbling import random_circuit
from vosc.harness import ScenarioConfig, run_scenario
from vosc.mhe import MheCircuit, MheRegistry
from vosc.otp import OneTimeViolation, OtpStore
from vosc.rng import SeedTree
from vosc.ver_otp import Relation, VerOtpParams
from vosc.world import World

ANY = Relation("any", lambda s, z: True)
SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


# -- C1 ---------------------------------------------------------------------

def test_c1_honest_path_correctness(acceptance):
    root = SeedTree(1).child("c1")
    failures, t0 = 0, time.perf_counter()
    for n in range(1000):
        node = root.child(n)
        rnd = node.child("case").rng()
        world = World.create(node.child("world"))
        n_secret, b = rnd.randint(0, 4), rnd.randint(1, 8)
        f = random_circuit(n_secret + b, rnd.randint(1, 4), rnd.randint(0, 30), rnd)
        s = tuple(rnd.getrandbits(1) for _ in range(n_secret))
        x = tuple(rnd.getrandbits(1) for _ in range(b))
        params = VerOtpParams(b=b, zeta=64, lam=128)
        bundle = ver_otp.create(s, b"c1", world.crs, f, ANY, params, world, node.child("create").rng())
        ok, verified = ver_otp.verify(bundle, b"c1", world.crs, f, ANY, params, world,
                                      node.child("verify").rng())
        if not ok or ver_otp.eval(verified, x, world) != f.evaluate(s + x):
            failures += 1
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 300
    assert acceptance("C1", ok, f"1000 random circuits (b<=8, zeta=64): {failures} failures, {elapsed:.1f}s")


# -- C2 ---------------------------------------------------------------------

def _wire_fixture(zeta: int, seed: int):
    """One honest bundle with b=1; returns the wire's programs and a validity map keyed by output identity."""
    world = World.create(SeedTree(seed).child("c2"))
    params = VerOtpParams(b=1, zeta=zeta)
    bundle = ver_otp.create((1,), b"c2", world.crs, harness.XOR_GATE, ANY, params, world, random.Random(seed))
    # test fixture: replant the stored programs so every pattern starts from unconsumed handles
    programs = [world.otps._programs[h.id] for h in bundle.otps[0]]
    valid = {}
    for alpha, prog in enumerate(programs, start=1):
        for beta in (0, 1):
            out = prog((beta,))
            share = ver_otp._check_share(world, out, 0, beta, alpha, bundle.comms, bundle.comms_r, zeta)
            valid[id(out)] = (beta, share is not None)
    assert all(v for _, v in valid.values())
    return programs, valid


def _consume(programs, valid, requests):
    """Run (handle, bit) requests against a fresh store; distinct valid shares per bit."""
    store = OtpStore()
    handles = [store.create(p, 1) for p in programs]
    got = ({}, {})
    for alpha, bit in requests:
        try:
            out = store.execute(handles[alpha], bit)
        except OneTimeViolation:
            continue
        beta, good = valid[id(out)]
        assert beta == bit
        if good:
            got[beta][alpha] = True
    return len(got[0]), len(got[1])


def test_c2_one_time_enforcement(acceptance):
    zeta, t = 16, 9
    programs, valid = _wire_fixture(zeta, 3)
    # skipping a handle only lowers both counts, so full assignments dominate;
    # every pattern then replays each handle with the opposite bit
    dual_exhaustive, best = 0, 0
    for mask in range(1 << zeta):
        bits = [(mask >> a) & 1 for a in range(zeta)]
        req = [(a, bits[a]) for a in range(zeta)] + [(a, 1 - bits[a]) for a in range(zeta)]
        n0, n1 = _consume(programs, valid, req)
        assert n0 + n1 == zeta
        best = max(best, min(n0, n1))
        dual_exhaustive += n0 >= t and n1 >= t

    zeta, t = 128, 65
    programs, valid = _wire_fixture(zeta, 4)
    rng = SeedTree(5).child("c2-random").rng()
    dual_random = 0
    for _ in range(10000):
        kind = rng.randrange(3)
        if kind == 0:
            req = [(rng.randrange(zeta), rng.getrandbits(1)) for _ in range(rng.randint(1, 3 * zeta))]
        elif kind == 1:
            # greedy: a threshold for bit 0, then every handle for bit 1
            order = rng.sample(range(zeta), zeta)
            req = [(a, 0) for a in order[:t]] + [(a, 1) for a in order]
        else:
            req = [(a, b) for a in rng.sample(range(zeta), zeta) for b in rng.sample((0, 1), 2)]
        n0, n1 = _consume(programs, valid, req)
        dual_random += n0 >= t and n1 >= t
    ok = dual_exhaustive == 0 and dual_random == 0
    assert acceptance("C2", ok, f"zeta=16 exhaustive 65536 patterns: {dual_exhaustive} dual recoveries "
                                f"(max min-count {best} < 9); zeta=128 10000 random: {dual_random}")


# -- C3 ---------------------------------------------------------------------

def test_c3_cut_and_choose_detection(acceptance):
    row = harness.sweep_detection([128], [1 / 8], 10000, seed=0)[0]
    scipy_exact = 1 - stats.hypergeom.pmf(0, 128, row["corrupt"], row["opened"])
    oracle_ok = abs(scipy_exact - row["exact"]) < 1e-12
    closed_ok = abs(row["rate"] - row["closed_form"]) <= 0.02
    exact_ok = abs(row["rate"] - row["exact"]) <= 0.01
    rates = [harness.sweep_detection([z], [1 / 8], 2000, seed=0)[0]["rate"] for z in (16, 64)]
    rates += [row["rate"], harness.sweep_detection([256], [1 / 8], 2000, seed=0)[0]["rate"]]
    mono = all(a < b for a, b in zip(rates, rates[1:]))
    ok = oracle_ok and closed_ok and exact_ok and mono
    assert acceptance("C3", ok, f"rate {row['rate']:.4f} vs closed form {row['closed_form']:.4f} (±0.02) and "
                                f"exact {row['exact']:.4f} (±0.01); zeta 16/64/128/256 rates "
                                f"{', '.join(f'{r:.3f}' for r in rates)}")


# -- C4 ---------------------------------------------------------------------

def _binomial_ok(events: int, trials: int, p: float) -> bool:
    """Two-sided binomial test at 1e-3; with p == 0 no event may occur."""
    if p == 0.0:
        return events == 0
    return stats.binomtest(events, trials, p).pvalue > 1e-3


def test_c4_verified_implies_evaluable_frontier(acceptance):
    region = harness.sweep_frontier(128, range(1, 17), 625, seed=0)
    region_events = sum(r["unreconstructible"] + r["wrong"] for r in region)
    region_trials = sum(r["trials"] for r in region)

    loose = harness.sweep_frontier(128, [17, 24, 32, 40, 47, 48, 52], 300, seed=0)
    loose_ok = all(_binomial_ok(r["unreconstructible"], r["trials"], r["oracle_event"]) and r["wrong"] == 0
                   for r in loose)
    first_nonzero = next(c for c in range(129) if harness.unreconstructible_probability(128, c, 8) > 0)

    # zeta=32 puts the frontier where events are frequent enough to compare rates
    small = harness.sweep_frontier(32, range(8, 15), 1500, seed=0)
    small_ok = all(_binomial_ok(r["unreconstructible"], r["trials"], r["oracle_event"]) and r["wrong"] == 0
                   for r in small)
    for r in loose + small:
        print(f"  frontier zeta={r['zeta']} c={r['corrupt']}: events {r['unreconstructible']}/{r['trials']} "
              f"oracle {r['oracle_event']:.5f}")
    ok = region_events == 0 and region_trials == 10000 and loose_ok and small_ok and first_nonzero == 48
    small_desc = " ".join(f"{r['corrupt']}:{r['unreconstructible']}/{r['oracle_event'] * r['trials']:.0f}"
                          for r in small)
    assert acceptance("C4", ok, f"c<=16 at zeta=128: {region_events} events in {region_trials} trials; "
                                f"counting oracle frontier at c={first_nonzero}; zeta=128 c in 17..52 "
                                f"consistent={loose_ok}; zeta=32 observed/expected {small_desc}")


# -- C5 ---------------------------------------------------------------------

MHE_FNS = {"sum": sum, "xor": lambda xs: __import__("functools").reduce(lambda a, b: a ^ b, xs),
           "max": max, "poly": lambda xs: sum((i + 1) * x * x for i, x in enumerate(xs)) % (1 << 40)}


def test_c5_mhe_correctness_and_masking(acceptance):
    rng = SeedTree(11).child("c5").rng()
    wrong = 0
    for trial in range(1000):
        reg = MheRegistry(random.Random(trial))
        n = rng.randint(1, 6)
        keys = [reg.keygen() for _ in range(n)]
        xs = [rng.randrange(1 << 16) for _ in range(n)]
        cts = [reg.enc(k.pk, x) for k, x in zip(keys, xs)]
        K = sorted(rng.sample(range(n), rng.randint(1, n)))
        kind = rng.choice(sorted(MHE_FNS))
        c = MheCircuit(kind, MHE_FNS[kind], 48)
        ct_hat = reg.eval(c, [cts[i] for i in K])
        parts = [reg.part_dec(keys[i].sk, i, ct_hat) for i in K]
        wrong += reg.fin_dec(c, parts) != MHE_FNS[kind]([xs[i] for i in K])

    withheld_trials, decoded = 20000, 0
    for trial in range(withheld_trials):
        reg = MheRegistry(random.Random(10**6 + trial))
        n = rng.randint(2, 6)
        keys = [reg.keygen() for _ in range(n)]
        c = MheCircuit("sum", sum, 48)
        ct_hat = reg.eval(c, [reg.enc(k.pk, rng.randrange(1 << 16)) for k in keys])
        parts = [reg.part_dec(k.sk, i, ct_hat) for i, k in enumerate(keys)]
        del parts[rng.randrange(n)]
        decoded += reg.fin_dec(c, parts) is not None
    fail_rate = 1 - decoded / withheld_trials

    # toy field, three parties: the sum of any two visible shares has the same law for every result
    M, hist = 17, {0: [0] * 17, 9: [0] * 17}
    for trial in range(20000):
        for y in hist:
            reg = MheRegistry(random.Random(7 * trial + y), toy_modulus=M)
            keys = [reg.keygen() for _ in range(3)]
            c = MheCircuit("id", lambda v: v[0], 8)
            ct_hat = reg.eval(c, [reg.enc(keys[0].pk, y)] + [reg.enc(k.pk, 0) for k in keys[1:]])
            visible = [reg.part_dec(k.sk, i, ct_hat) for i, k in enumerate(keys)][:2]
            hist[y][sum(p.value for p in visible) % M] += 1
    p_contingency = stats.chi2_contingency([hist[0], hist[9]]).pvalue
    p_uniform = stats.chisquare(hist[9]).pvalue
    ok = wrong == 0 and fail_rate >= 1 - 2**-30 and p_contingency > 0.01 and p_uniform > 0.01
    assert acceptance("C5", ok, f"{wrong}/1000 wrong decryptions; withheld-partial decode failure "
                                f"{withheld_trials - decoded}/{withheld_trials}; toy chi-square p="
                                f"{p_uniform:.3f} (uniform), {p_contingency:.3f} (result-independent)")


# -- C6 ---------------------------------------------------------------------

def test_c6_real_equals_ideal(acceptance):
    t0 = time.perf_counter()
    summary = harness.run_equivalence_suite(7, 500, zeta=64)
    elapsed = time.perf_counter() - t0
    apps_seen = sorted(summary["per_app"])
    ok = summary["mismatch_count"] == 0 and elapsed < 600 and {"propose", "auction", "dp"} <= set(apps_seen)
    assert acceptance("C6", ok, f"500 scenarios over {', '.join(apps_seen)}: {summary['mismatch_count']} "
                                f"mismatches, {elapsed:.0f}s at zeta=64")


# -- C7 ---------------------------------------------------------------------

def _partial_partitions(n: int):
    """Every way the receiver can group some of the n senders into disjoint rounds."""
    yield []
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            yield from multiset_partitions(list(subset))


def _partition_run(app: str, senders: list[dict], board_size: int, blocks, seed: int):
    raw = {"app": app, "seed": seed, "params": {"zeta": 16}, "board_size": board_size, "senders": senders,
           "receiver": {"strategy": "script", "rounds": [{"senders": b} for b in blocks] or [{"senders": []}]}}
    if app == "propose":
        raw["value"] = "atomic"
    return run_scenario(ScenarioConfig.from_dict(raw))


@pytest.mark.parametrize("app,board_size,senders", [
    ("propose", 4, [{}, {}, {}, {}]),
    ("propose", 4, [{}, {}, {}, {"credential": "forged"}]),
    ("auction", 5, [{"bid": b} for b in (3, 9, 4, 7, 1)]),
    ("auction", 5, [{"bid": 3}, {"bid": 9, "credential": "forged"}, {"bid": 4}, {"bid": 7}, {"bid": 1}]),
])
def test_c7_partition_immunity(acceptance, app, board_size, senders):
    n = len(senders)
    majority = board_size // 2 + 1
    valid = [s.get("credential", "valid") == "valid" for s in senders]
    partitions = list(_partial_partitions(n))
    assert len(partitions) == sympy.bell(n + 1)
    bad = []
    for j, blocks in enumerate(partitions):
        res = _partition_run(app, senders, board_size, blocks, seed=j)
        Y = res.records["report"]["real"]
        assert Y is not None and len(Y) == len(blocks)
        for block, y in zip(blocks, Y):
            honest = sum(valid[i] for i in block)
            if (honest >= majority) != (y is not None):
                bad.append((blocks, block, y))
        if sum(y is not None for y in Y) > 1 or not res.passed:
            bad.append((blocks, "multiple outputs or failed checks"))
    label = f"{app} N={board_size} valid={sum(valid)}/{n}"
    assert acceptance("C7", not bad, f"{label}: {len(partitions)} receiver partitions, {len(bad)} violations")


# -- C8 ---------------------------------------------------------------------

def test_c8_dp_noise_distribution(acceptance):
    scale, k = 2.0, 4
    rng = SeedTree(13).child("c8").rng()
    fixed = [rng.getrandbits(apps.SEED_BITS) for _ in range(k - 1)]
    f = apps.f_dp_aggregate(k, scale=scale)
    direct, through_f = [], []
    for _ in range(10000):
        u = rng.getrandbits(apps.SEED_BITS)
        seed = (sum(fixed) + u) % (1 << apps.SEED_BITS)
        direct.append(apps.noise_prg(seed, scale))
        slots = [apps.pack_dp(s, 0) for s in fixed + [u]]
        through_f.append(f.describe(f.fn(slots))["value"])
    p_direct = stats.kstest(direct, stats.laplace(scale=scale).cdf).pvalue
    p_f = stats.kstest(through_f, stats.laplace(scale=scale).cdf).pvalue
    cfg = ScenarioConfig.load(SCENARIOS / "dp_aggregate.yaml")
    same = run_scenario(cfg).to_json() == run_scenario(cfg).to_json()
    ok = p_direct > 0.01 and p_f > 0.01 and same
    assert acceptance("C8", ok, f"KS p={p_direct:.3f} (noise PRG), p={p_f:.3f} (through f_dp); "
                                f"repeat run byte-identical={same}")


# -- C9 ---------------------------------------------------------------------

def test_c9_scenario_determinism(acceptance):
    paths = sorted(SCENARIOS.glob("*.yaml"))
    differing = []
    for p in paths:
        cfg = ScenarioConfig.load(p)
        if run_scenario(cfg).to_json() != run_scenario(cfg).to_json():
            differing.append(p.name)
    for seed in range(5):
        cfg = harness.random_case(SeedTree(seed), harness.APPS[seed % len(harness.APPS)], 16)
        if run_scenario(cfg).to_json() != run_scenario(cfg).to_json():
            differing.append(f"random-{seed}")
    assert acceptance("C9", not differing and len(paths) > 0,
                      f"{len(paths)} scenario files and 5 random cases re-run: {len(differing)} differ")
