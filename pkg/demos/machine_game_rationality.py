"""Machine games: exact limit values and size-aware best responses.

When both players are finite-state machines the joint walk is eventually
periodic, so limit-average payoffs are exact rationals. With machine size as
a secondary objective, the grim trigger is *not* a rational choice against
an opponent known to cooperate: a 1-state machine collects the same payoff.
"""

from fractions import Fraction

from repeated_games import Belief, example1_game, fsm_encode
from repeated_games import exact_value, is_computationally_rational, machine_game_value

game = example1_game()

fixed_rows = [fsm_encode("fixed", action=a, n_opponent_actions=3) for a in (0, 1)]
fixed_cols = [fsm_encode("fixed", action=b, n_opponent_actions=2) for b in range(3)]
grim = fsm_encode("grim_trigger", expected_alice_action=0, cooperate_action=0,
                  punish_action=2, n_opponent_actions=2)
mirror = fsm_encode("mirror", n_actions=2)

print("exact values of the column machines vs each committed row:")
for m in fixed_cols + [grim, mirror]:
    vals = [exact_value(game, fr, m) for fr in fixed_rows]
    print(f"  {m.label:>12}: vs row1 = {vals[0]}, vs row2 = {vals[1]}")

# Against a point belief on row 1, grim ties the 1-state always-cooperate
# machine on value but loses on size.
point = Belief(((fixed_rows[0], 1),))
verdict = is_computationally_rational(game, grim, point, fixed_cols + [grim, mirror])
print(f"\ngrim rational vs certain row-1 opponent? {verdict.passed}")
print(f"  witness: {verdict.witness.label} "
      f"(value {verdict.witness_value}, {verdict.witness.reachable_size()} state)")

# Under a 50/50 belief the mirror machine's extra states pay for themselves.
half = Fraction(1, 2)
rho = Belief(((fixed_rows[0], half), (fixed_rows[1], half)))
print(f"\n50/50 belief values: mirror = {machine_game_value(game, rho, mirror)}, "
      f"grim = {machine_game_value(game, rho, grim)}")
verdict2 = is_computationally_rational(game, mirror, rho, fixed_cols + [grim, mirror])
print(f"mirror rational under the 50/50 belief? {verdict2.passed}")
