import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from vosc import harness
from vosc.cli import main
from vosc.harness import ConfigError, ScenarioConfig, run_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def load(name, **over):
    cfg = ScenarioConfig.load(SCENARIOS / name)
    for k, v in over.items():
        setattr(cfg, k, v)
    return cfg


def test_auction_scenario_outputs_top_bid():
    res = run_scenario(load("auction_honest.yaml"))
    real = res.records["report"]["real"]
    assert len(real) == 1 and real[0]["bid"] == 9 and real[0]["winner"] == 1
    assert res.passed


def test_same_seed_same_bytes():
    cfg = load("sum_mixed.yaml")
    assert run_scenario(cfg).to_json() == run_scenario(cfg).to_json()
    other = load("sum_mixed.yaml", seed=99)
    assert run_scenario(other).to_json() != run_scenario(cfg).to_json()


def test_partition_script_all_bottom_and_flagged_pass():
    res = run_scenario(load("propose_partition.yaml"))
    assert res.records["report"]["real"] == [None, None]
    checks = res.aggregates["checks"]
    assert checks["minority_rounds_bottom"] and checks["at_most_one_output"] and res.passed


def test_double_eval_blocked():
    res = run_scenario(load("double_eval.yaml"))
    assert res.aggregates["checks"]["double_use_blocked"]
    assert len(res.records["report"]["real"]) == 1


def test_result_file_has_no_wall_clock():
    res = run_scenario(load("dp_aggregate.yaml"))
    assert "wall" not in res.to_json()
    assert res.wall_clock > 0


@pytest.mark.parametrize("raw,msg", [
    ({"app": "nope", "senders": []}, "app"),
    ({"app": "sum"}, "senders"),
    ({"app": "sum", "senders": [], "params": {"zeta": 24}}, "zeta"),
    ({"app": "sum", "senders": [{"behavior": "teleport"}]}, "behavior"),
    ({"app": "sum", "senders": [{}], "receiver": {"strategy": "script"}}, "rounds"),
    ({"app": "sum", "senders": [{}], "receiver": {"strategy": "script", "rounds": [{"senders": [3]}]}}, "outside"),
    ({"app": "auction", "senders": [{}, {}], "board_size": 1}, "board"),
])
def test_schema_violations(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        ScenarioConfig.from_dict(raw)


def test_sweep_trivial_rates():
    rows = harness.sweep_detection([16], [0.0, 1.0], 30, seed=1)
    assert [r["rate"] for r in rows] == [0.0, 1.0]
    assert harness.sweep_detection([128], [1.0], 5)[0]["rate"] == 1.0
    with pytest.raises(ConfigError):
        harness.sweep_detection([20], [0.1], 1)


def test_exact_detection_matches_scipy():
    for zeta, c, m in [(128, 16, 8), (64, 24, 4), (16, 3, 1), (256, 32, 16)]:
        assert harness.exact_detection(zeta, c, m) == pytest.approx(1 - stats.hypergeom.pmf(0, zeta, c, m))


def test_unreconstructible_oracle_by_enumeration():
    """Brute force over every (opened-for-bit, opened-for-other) pair at zeta=16."""
    import itertools
    zeta, m, t = 16, 1, 9
    for c in range(zeta + 1):
        bad = set(range(c))
        hits = total = 0
        for a, b in itertools.permutations(range(zeta), 2):
            total += 1
            if a in bad:
                continue
            survivors = set(range(zeta)) - {a, b}
            hits += len(survivors - bad) < t
        assert harness.unreconstructible_probability(zeta, c, m) == pytest.approx(hits / total)


def test_empty_sender_set():
    cfg = ScenarioConfig.from_dict({"app": "sum", "senders": [], "params": {"zeta": 16}})
    rep = run_scenario(cfg).records["report"]
    assert rep["real"] == rep["ideal"] == [] and rep["match"]


def test_equivalence_suite_small_and_injected_bug():
    clean = harness.run_equivalence_suite(3, 12, zeta=16)
    assert clean["mismatch_count"] == 0
    assert all(v["cases"] == 3 for v in clean["per_app"].values())
    bugged = harness.run_equivalence_suite(3, 12, zeta=16, inject_skip_verify=True, sabotage_p=1.0)
    assert bugged["mismatch_count"] > 0


@settings(max_examples=15)
@given(st.sampled_from(harness.APPS), st.integers(0, 10**6))
def test_random_cases_equivalent(app, seed):
    cfg = harness.random_case(harness.SeedTree(seed), app, 16)
    assert run_scenario(cfg).records["report"]["match"]


# -- CLI --------------------------------------------------------------------

def test_cli_run_and_determinism(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["run", "--scenario", str(SCENARIOS / "auction_honest.yaml"), "--seed", "1",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["pass"] is True


def test_cli_csv(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["run", "--scenario", str(SCENARIOS / "sum_mixed.yaml"), "--out", str(tmp_path / "r.json"),
                 "--csv", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "round,S,J,y"


def test_cli_config_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("app: sum\nsenders: 3\n")
    assert main(["run", "--scenario", str(bad)]) == 2
    assert main(["run", "--scenario", str(tmp_path / "missing.yaml")]) == 2
    assert main(["sweep-detection", "--zeta", "20"]) == 2
    assert main(["bogus"]) == 2


def test_cli_sweep_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep-detection", "--zeta", "16", "--fractions", "1/8,1", "--trials", "10",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("zeta,fraction,corrupt") and len(lines) == 3


def test_cli_equivalence_exit_codes(tmp_path):
    assert main(["equivalence", "--cases", "4", "--zeta", "16", "--out", str(tmp_path / "e.json")]) == 0
    assert main(["equivalence", "--cases", "8", "--zeta", "16", "--seed", "1", "--inject-skip-verify",
                 "--out", str(tmp_path / "e2.json")]) in (0, 1)


def test_cli_selftest(capsys):
    assert main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def _within(rate: float, p: float, n: int) -> bool:
    return stats.binomtest(round(rate * n), n, p).pvalue > 1e-3


def test_detection_lower_bound_at_three_eighths():
    """At 3/8 corruption the rejection rate is at least the closed-form bound and matches the exact oracle."""
    for zeta in (64, 128):
        row = harness.sweep_detection([zeta], [3 / 8], 1500, seed=2)[0]
        assert row["exact"] >= row["closed_form"]
        assert _within(row["rate"], row["exact"], 1500)
        assert row["rate"] >= row["closed_form"] - 3 * (row["closed_form"] * (1 - row["closed_form"]) / 1500) ** 0.5


def test_detection_sweep_with_wider_opened_subsets():
    """Opening zeta/8 per bit instead of zeta/16 tracks its own exact oracle."""
    row = harness.sweep_detection([64], [1 / 8], 1500, seed=3, opened=8)[0]
    assert row["opened"] == 8
    assert row["exact"] == pytest.approx(1 - stats.hypergeom.pmf(0, 64, 8, 8))
    assert _within(row["rate"], row["exact"], 1500)
