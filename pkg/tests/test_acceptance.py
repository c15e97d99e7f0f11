"""End-to-end acceptance runs: one test per verification suite.

Each suite pins its own seeds and uses 3*CI tolerances for Monte Carlo
quantities and exact equality for deterministic constructions. A failure
prints the full detail dict for the offending checks.
"""

import json

import pytest

from repeated_games.suites import SUITES, run_suite


def _run(name):
    result = run_suite(name)
    print(result.line())
    if not result.passed:
        failing = {k: v for k, v in result.details.items() if not v.get("passed")}
        pytest.fail(f"{name} failed:\n{json.dumps(failing, indent=2, default=str)}")
    return result


def test_criterion_01_example1_values_and_regret():
    result = _run("example1")
    assert result.seconds < 60


def test_criterion_02_fictitious_play_inflexibility_witness():
    _run("prop1-witness")


def test_criterion_03_fictitious_play_best_response_horizon():
    result = _run("prop3")
    assert result.seconds < 60


def test_criterion_04_flexibility_implies_open_endedness():
    _run("prop2-crosscheck")


def test_criterion_05_switching_partner_defeats_etc():
    _run("theorem2")


def test_criterion_06_exploiter_defeats_strategic_experts():
    _run("theorem3")


def test_criterion_07_composite_adversary_defeats_mixed_learner():
    _run("theorem1")


def test_criterion_08_open_ended_regret_consistency():
    _run("corollary1")


def test_criterion_09_machine_game_exact_suite():
    _run("machine-games")


def test_criterion_10_reproducibility_and_bounds():
    _run("infrastructure")


def test_suite_registry_is_complete():
    assert set(SUITES) == {
        "example1", "prop1-witness", "prop3", "prop2-crosscheck",
        "theorem2", "theorem3", "theorem1", "corollary1",
        "machine-games", "infrastructure",
    }
