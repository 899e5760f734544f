"""Acceptance criteria, each at its stated budget and tolerance.

Every test prints one PASS/FAIL line and writes the JSON verdict next to the
pytest temp root, so a full run doubles as the verdict artifact set. Budgets
follow the stated trial counts; the whole module takes on the order of ten
minutes of CPU.
"""

import numpy as np
import pytest

from voterlab import suites

SEED = 20240811


@pytest.fixture(scope="module")
def verdict_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("verdicts")


def _report(verdict, verdict_dir):
    suites.write_verdict(verdict, verdict_dir)
    status = "PASS" if verdict["passed"] else "FAIL"
    print(f"\n[acceptance] {verdict['claim']}: {status}")
    return verdict


def test_criterion_01_cycle_scaling(verdict_dir):
    v = _report(suites.claim_cycle_scaling(seed=SEED), verdict_dir)
    assert v["passed"], f"log-log exponent {v['exponent']:.3f} outside [1.85, 2.15]"


def test_criterion_02_static_upper_bound(verdict_dir):
    v = _report(suites.claim_static_upper(seed=SEED), verdict_dir)
    assert v["passed"], f"bound constants: {[c['c_min'] for c in v['cases']]}"


def test_criterion_03_duality(verdict_dir):
    v = _report(suites.suite_duality(seed=SEED), verdict_dir)
    assert v["passed"], {k: r["pvalue"] for k, r in v["graphs"].items()}


def test_criterion_04_fixation_law(verdict_dir):
    v = _report(suites.suite_fixation(seed=SEED), verdict_dir)
    bad = [r for r in v["instances"] if not r["passed"]]
    assert v["passed"], f"failing instances: {bad}"


def test_criterion_05_drift_upper(verdict_dir):
    v = _report(suites.suite_drift_upper(seed=SEED), verdict_dir)
    assert v["passed"], f"{v['violations']} violations"


def test_criterion_05_drift_lower(verdict_dir):
    v = _report(suites.suite_drift_lower(seed=SEED), verdict_dir)
    assert v["passed"], v["violations_by_c"]
    print(f"[acceptance]   fitted constant c = {v['c_fit']}, "
          f"violations at c=1: {v['violations_by_c'][1]} "
          f"(near balance: {v['violations_at_c1_near_balance']})")


def test_criterion_06_step_schedule_invariants(verdict_dir):
    v = _report(suites.suite_balance(seed=SEED), verdict_dir)
    assert v["passed"], v


def test_criterion_07_biased_consensus(verdict_dir):
    v = _report(suites.claim_biased_consensus(seed=SEED), verdict_dir)
    assert v["passed"], {
        "rates": [r["prevail_rate"] for r in v["rows"]],
        "exponent": v["semilog_exponent"],
    }
    print(f"[acceptance]   fitted C (99th pct): "
          f"{[round(r['c_fit_99pct'], 3) for r in v['rows']]}")


def test_criterion_08_good_sequence(verdict_dir):
    v = _report(suites.claim_good_sequence(seed=SEED), verdict_dir)
    assert v["passed"], v


def test_criterion_09_dependent_chernoff(verdict_dir):
    v = _report(suites.suite_chernoff(seed=SEED), verdict_dir)
    bad = [r for r in v["rows"] if not r["passed"]]
    assert v["passed"], f"failing tails: {bad}"


def test_criterion_10_moment_identities(verdict_dir):
    v1 = _report(suites.suite_moments(seed=SEED), verdict_dir)
    v2 = _report(suites.suite_dominance(seed=SEED), verdict_dir)
    assert v1["passed"], f"max deviation {v1['max_abs_deviation']}"
    assert v2["passed"], f"{v2['failures']} dominance failures"


def test_criterion_11_adversary_lower_bound(verdict_dir):
    v = _report(suites.claim_adversary_lower(seed=SEED), verdict_dir)
    assert v["passed"], v
    print(f"[acceptance]   non-consensus fraction {v['non_consensus_fraction']:.3f} "
          f"at tau'' = {v['tau_pp']} (b = {v['b']:.4f})")


def test_criterion_11_submartingale(verdict_dir):
    v = _report(suites.suite_submartingale(seed=SEED), verdict_dir)
    assert v["passed"], v["by_c"]
    print(f"[acceptance]   bookkeeping constant c = {v['c_fit']}")


def test_observation_surrogate_degree_adversary(verdict_dir):
    v = _report(suites.claim_degree_adversary_marginals(), verdict_dir)
    assert v["passed"], v["rows"]
    worst_shrink = max(r["p_minority_shrinks"] for r in v["rows"])
    worst_major = min(r["p_majority_flip"] for r in v["rows"])
    assert worst_shrink <= 4 / 12
    assert worst_major >= 1 / 4
