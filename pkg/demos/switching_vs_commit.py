"""Punishing commitment: the switching partner against explore-then-commit.

A learner that settles on one action by some stage tau can be measured: we
estimate tau and the convergence profile p_e under uniform play, then build
the partner that plays uniformly until tau and afterwards cooperates only
with the action the learner is least likely to have committed to. The
committed learner is stuck near chance while the right expert earns 1.
"""

import numpy as np

from repeated_games import (
    EstimatorParams,
    ExpertSet,
    ExploreThenCommit,
    SwitchingPartner,
    SwitchingSpec,
    UniformPartner,
    adaptive_regret,
    check_open_ended,
    coordination_game,
    derive_trial_seed,
    estimate_commit_time,
)

N = 4
game = coordination_game(N)
experts = ExpertSet.fixed_actions(N)


def learner(seed=None):
    return ExploreThenCommit(game, experts, 300, seed)


def uniform(seed=None):
    return UniformPartner(N, seed)


commit = estimate_commit_time(game, learner, uniform, delta=0.05,
                              trials=300, horizon=1500, seed=0)
print(f"estimated commit time tau = {commit.tau}, gamma_hat = {commit.gamma_hat}")

finals = []
for t in range(300):
    lr, ph = learner(derive_trial_seed(0, t, "l")), uniform(derive_trial_seed(0, t, "p"))
    for _ in range(1500):
        a, b = lr.decide(), ph.decide()
        lr.observe(a, b)
        ph.observe(a, b)
    finals.append(a)
p_e = np.bincount(finals, minlength=N) / len(finals)
target = int(np.argmin(p_e))
print(f"convergence profile p_e = {p_e.round(3)}, targeting action {target}")

spec = SwitchingSpec(commit.tau, target, N)


def switching(seed=None):
    return SwitchingPartner(spec, seed)


params = EstimatorParams(trials=400, horizon=8000, seed=2, expert_trials=50)
reg = adaptive_regret(game, learner, switching, experts.actions, params)
print(f"\nlearner value  {reg.learner.tail_mean:.3f}")
print(f"expert values  {({e: round(v.tail_mean, 3) for e, v in reg.per_expert.items()})}")
print(f"adaptive regret {reg.regret:.3f} (+/- {reg.ci_half_width:.3f}); "
      f"theory promises (N-2)/N - delta = {(N - 2) / N - 0.05}")

oe = check_open_ended(game, switching, experts.actions,
                      params=EstimatorParams(trials=50, horizon=4000, seed=3))
print(f"\nopen-ended? {oe.passed}; per-expert limit values {oe.mu_hat}")
