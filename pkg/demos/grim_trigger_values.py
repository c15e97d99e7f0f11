"""The grim-trigger warm-up: why 'no regret' already fails in a 2x3 game.

Two grim-trigger partners each reward one row with payoff 2 and punish any
deviation with the middling column worth 1. A learner facing a fair coin
over the two triggers cannot probe without poisoning one of them, so its
value is capped at 3/2 while the best expert in hindsight earns 2.
"""

from repeated_games import (
    EstimatorParams,
    FixedAction,
    GrimTrigger,
    GrimTriggerSpec,
    RandomChoiceStrategy,
    adaptive_regret,
    estimate_value,
    example1_game,
)
from repeated_games import machines as M

game = example1_game()
print("payoff matrix:\n", game.payoff)

# --- exact values via the machine-game product walk -------------------------
fixed = [M.fsm_encode("fixed", action=a, n_opponent_actions=3) for a in (0, 1)]
grims = [
    M.fsm_encode("grim_trigger", expected_alice_action=a, cooperate_action=a,
                 punish_action=2, n_opponent_actions=2)
    for a in (0, 1)
]
for a in (0, 1):
    for p in (0, 1):
        v = M.exact_value(game, fixed[a], grims[p])
        print(f"V(row {a + 1}, trigger {p + 1}) = {v}")

# --- the coin-commit learner against the equal mixture -----------------------


def coin_commit(seed=None):
    return RandomChoiceStrategy([FixedAction(0, 2), FixedAction(1, 2)], None, seed)


def mixture(seed=None):
    return RandomChoiceStrategy(
        [GrimTrigger(GrimTriggerSpec(0, 0, 2, 3)), GrimTrigger(GrimTriggerSpec(1, 1, 2, 3))],
        None, seed,
    )


params = EstimatorParams(trials=500, horizon=5000, seed=1, expert_trials=4)
value = estimate_value(game, coin_commit, mixture, None, params)
print(f"\ncoin-commit value vs the mixture: {value.tail_mean:.3f} "
      f"(+/- {value.tail_ci_half_width:.3f}), ideal 1.5")


def grim1(seed=None):
    return GrimTrigger(GrimTriggerSpec(0, 0, 2, 3), seed)


reg = adaptive_regret(game, coin_commit, grim1, (0, 1), params)
print(f"adaptive regret vs trigger 1: {reg.regret:.3f} "
      f"(+/- {reg.ci_half_width:.3f}), ideal 0.5")
