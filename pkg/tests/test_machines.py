import itertools
import json
import random
from fractions import Fraction

import numpy as np
import pytest

from repeated_games.core import Game, coordination_game, example1_game
from repeated_games.learners import FixedAction
from repeated_games.machines import (
    Belief,
    FSMBehavioral,
    FSMStrategy,
    NotEncodable,
    exact_value,
    fsm_encode,
    is_computationally_rational,
    machine_game_value,
)
from repeated_games.metrics import EstimatorParams, estimate_value
from repeated_games.partners import GrimTrigger, GrimTriggerSpec


GRIM_FSM = fsm_encode("grim_trigger", expected_alice_action=0, cooperate_action=0,
                      punish_action=2, n_opponent_actions=2)


def test_fsm_validation():
    with pytest.raises(ValueError):
        FSMStrategy(2, 0, (0,), ((0,), (0,)))  # output length mismatch
    with pytest.raises(ValueError):
        FSMStrategy(2, 5, (0, 0), ((0,), (0,)))  # initial out of range
    with pytest.raises(ValueError):
        FSMStrategy(2, 0, (0, 0), ((0,), (3,)))  # transition target out of range


def test_fsm_json_round_trip():
    m = GRIM_FSM
    m2 = FSMStrategy.from_json(m.to_json())
    assert m2.states == m.states and m2.output == m.output
    assert m2.transition == m.transition
    parsed = json.loads(m.to_json())
    assert set(parsed) >= {"states", "initial", "output", "transition"}


def test_grim_fsm_equals_behavioral_on_all_histories():
    """The 2-state encoding reproduces the behavioral grim trigger on every
    Alice sequence of length <= 8."""
    for length in range(9):
        for seq in itertools.product((0, 1), repeat=length):
            fsm = FSMBehavioral(GRIM_FSM, 3, side="bob")
            beh = GrimTrigger(GrimTriggerSpec(0, 0, 2, 3))
            for a in seq:
                bf, bb = fsm.decide(), beh.decide()
                assert bf == bb
                fsm.observe(a, bf)
                beh.observe(a, bb)
            assert fsm.decide() == beh.decide()


def test_mirror_fsm_copies_last_opponent_action():
    m = fsm_encode("mirror", n_actions=3)
    assert m.states == 4
    strat = FSMBehavioral(m, 3, side="bob")
    assert strat.decide() == 0  # initial output before anything observed
    for a in (2, 0, 1, 1):
        strat.observe(a, strat.decide())
        assert strat.decide() == a


def test_switching_deterministic_fsm():
    m = fsm_encode("switching_deterministic", tau=3, target_action=1, n_actions=2,
                   fallback_action=0)
    strat = FSMBehavioral(m, 2, side="bob")
    outs = []
    for _ in range(8):
        b = strat.decide()
        outs.append(b)
        strat.observe(1, b)  # opponent always plays the target
    assert outs[:3] == [0, 0, 0]  # counting phase plays the fallback
    assert all(b == 1 for b in outs[4:])  # then mirrors the target


def test_not_encodable():
    with pytest.raises(NotEncodable):
        fsm_encode("uniform", n_actions=3)
    with pytest.raises(NotEncodable):
        fsm_encode("switching", tau=5, target_action=0, n_actions=3)


def test_exact_value_example_grid():
    g = example1_game()
    fa1 = fsm_encode("fixed", action=0, n_opponent_actions=3)
    fa2 = fsm_encode("fixed", action=1, n_opponent_actions=3)
    g2 = fsm_encode("grim_trigger", expected_alice_action=1, cooperate_action=1,
                    punish_action=2, n_opponent_actions=2)
    assert exact_value(g, fa1, GRIM_FSM) == Fraction(2)
    assert exact_value(g, fa2, GRIM_FSM) == Fraction(1)
    assert exact_value(g, fa2, g2) == Fraction(2)
    assert exact_value(g, fa1, g2) == Fraction(1)


def test_exact_value_terminates_within_pigeonhole_budget():
    rng = random.Random(4)
    for _ in range(50):
        n_a, n_b = rng.randint(1, 4), rng.randint(1, 4)
        sa, sb = rng.randint(1, 5), rng.randint(1, 5)
        m_pi = _random_fsm(rng, sa, n_out=n_a, n_in=n_b)
        m_phi = _random_fsm(rng, sb, n_out=n_b, n_in=n_a)
        g = Game(n_a, n_b, np.arange(n_a * n_b, dtype=float).reshape(n_a, n_b),
                 (0.0, float(n_a * n_b)))
        exact_value(g, m_pi, m_phi)  # asserts its own step budget internally


def _random_fsm(rng, states, n_out, n_in):
    return FSMStrategy(
        states,
        rng.randrange(states),
        tuple(rng.randrange(n_out) for _ in range(states)),
        tuple(tuple(rng.randrange(states) for _ in range(n_in)) for _ in range(states)),
    )


def test_exact_value_invariant_to_unreachable_states():
    g = example1_game()
    fa1 = fsm_encode("fixed", action=0, n_opponent_actions=3)
    base = exact_value(g, fa1, GRIM_FSM)
    # prepend a junk state (index 2) that nothing transitions into
    padded = FSMStrategy(3, 0, GRIM_FSM.output + (1,),
                         GRIM_FSM.transition + ((2, 2),))
    assert exact_value(g, fa1, padded) == base
    assert padded.reachable_size() == 2


def test_monte_carlo_agrees_with_exact_value():
    """Long-tail Monte Carlo on deterministic machine pairs matches the exact
    cycle average up to the truncation error of the tail window."""
    rng = random.Random(11)
    g = coordination_game(3)
    checked = 0
    for _ in range(100):
        m_pi = _random_fsm(rng, rng.randint(1, 4), n_out=3, n_in=3)
        m_phi = _random_fsm(rng, rng.randint(1, 4), n_out=3, n_in=3)
        want = exact_value(g, m_pi, m_phi)
        est = estimate_value(
            g,
            lambda s=None, m=m_pi: FSMBehavioral(m, 3, side="alice"),
            lambda s=None, m=m_phi: FSMBehavioral(m, 3, side="bob"),
            None,
            EstimatorParams(trials=1, horizon=4000, seed=0),
        )
        cycle_bound = (m_pi.states * m_phi.states) / est.tail_window  # worst drift
        assert abs(est.tail_mean - float(want)) <= max(est.tail_ci_half_width, cycle_bound)
        checked += 1
    assert checked == 100


def test_belief_normalization_and_validation():
    fa1 = fsm_encode("fixed", action=0, n_opponent_actions=3)
    fa2 = fsm_encode("fixed", action=1, n_opponent_actions=3)
    b = Belief(((fa1, Fraction(1, 2)), (fa2, 0.5)))
    assert sum(p for _, p in b.items()) == 1
    with pytest.raises(ValueError):
        Belief(((fa1, 0.7), (fa2, 0.7)))


def test_machine_game_value_mixes_exactly():
    g = example1_game()
    fa1 = fsm_encode("fixed", action=0, n_opponent_actions=3)
    fa2 = fsm_encode("fixed", action=1, n_opponent_actions=3)
    rho = Belief(((fa1, Fraction(1, 2)), (fa2, Fraction(1, 2))))
    assert machine_game_value(g, rho, GRIM_FSM) == Fraction(3, 2)


def test_rationality_verdict_is_order_independent():
    g = example1_game()
    fa1 = fsm_encode("fixed", action=0, n_opponent_actions=3)
    bob_fixed = [fsm_encode("fixed", action=b, n_opponent_actions=2) for b in range(3)]
    mirror = fsm_encode("mirror", n_actions=2)
    rho = Belief(((fa1, 1),))
    candidates = bob_fixed + [GRIM_FSM, mirror]
    verdicts = []
    for perm in itertools.permutations(range(len(candidates)), len(candidates)):
        shuffled = [candidates[i] for i in perm]
        v = is_computationally_rational(g, GRIM_FSM, rho, shuffled)
        verdicts.append((v.passed, v.witness.label if v.witness else None))
        if len(verdicts) >= 24:
            break
    assert len(set(verdicts)) == 1
    assert verdicts[0] == (False, "fixed-0")


def test_rationality_requires_candidates():
    g = example1_game()
    fa1 = fsm_encode("fixed", action=0, n_opponent_actions=3)
    with pytest.raises(ValueError):
        is_computationally_rational(g, GRIM_FSM, Belief(((fa1, 1),)), [])


def test_fsm_behavioral_vs_live_strategy():
    """Product-walk values agree with driving the FSMs as live strategies."""
    g = example1_game()
    fa2 = fsm_encode("fixed", action=1, n_opponent_actions=3)
    alice = FSMBehavioral(fa2, 2, side="alice")
    bob = FSMBehavioral(GRIM_FSM, 3, side="bob")
    payoffs = []
    for _ in range(500):
        a, b = alice.decide(), bob.decide()
        payoffs.append(g.payoff[a, b])
        alice.observe(a, b)
        bob.observe(a, b)
    assert np.mean(payoffs[-100:]) == float(exact_value(g, fa2, GRIM_FSM))
