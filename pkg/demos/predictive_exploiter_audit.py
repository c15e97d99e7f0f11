"""Exploiting restlessness: the interval-based predictive exploiter.

Against a learner that keeps re-evaluating its experts forever, the partner
simulates a pool of the learner's own rebuilds to predict, at each interval,
how long the learner will hold its current action. It plays uniformly just
past that horizon and only then offers cooperation -- which the restless
learner, by its own prediction, almost never stays to collect.
"""

import json

from repeated_games import (
    EstimatorParams,
    ExpertSet,
    OracleParams,
    PredictiveExploiter,
    StrategicExperts,
    coordination_game,
    estimate_value,
    rollout,
)

N = 3
game = coordination_game(N)
experts = ExpertSet.fixed_actions(N)


def learner(seed=None):
    return StrategicExperts(game, experts, 0.2, None, seed)


def exploiter(seed=None):
    return PredictiveExploiter(learner, game, 0.05,
                               OracleParams(trials=32, sigma_cap=600, seed=0), seed)


params = EstimatorParams(trials=32, horizon=3000, tail_window=750, seed=4)
value = estimate_value(game, learner, exploiter, None, params)
print(f"learner value vs exploiter: {value.tail_mean:.3f} "
      f"(+/- {value.tail_ci_half_width:.3f}); chance level is {1 / N:.3f}")

# an expert that simply commits gets cooperated with soon after sigma_0
from repeated_games import FixedAction  # noqa: E402

fixed = estimate_value(game, lambda s=None: FixedAction(0, N, s), exploiter, None,
                       EstimatorParams(trials=8, horizon=3000, tail_window=750, seed=5))
print(f"committed expert value:     {fixed.tail_mean:.3f} (cooperation arrives)")

# the audit log shows the receding evaluation horizon and the delta budget
ex = exploiter(7)
rollout(game, learner(11), ex, 3000)
print("\nfirst intervals of one audit log:")
for rec in ex.audit_log[:6]:
    print(" ", json.dumps(rec))
print(f"sum of delta_i = {sum(r['delta_i'] for r in ex.audit_log):.6f} <= 0.05")
