"""
Deferral economics: the reward table and the exploration schedule
=================================================================

The agent's only teacher is a scalar reward paid when it defers an alert
to the analyst.  This script prints the full payoff table and the decay
of the exploration rate, the two dials that shape everything the agent
later does.
"""

from defer_soc.agent import AgentConfig, epsilon, reward
from defer_soc.domain import PRIORITIES, RewardParams

params = RewardParams()

# --- payoff table -----------------------------------------------------------
# Rows: what the machine said.  Columns: what the analyst rules.  Agreeing
# with the machine wastes analyst time and costs q; correcting it pays a
# base z plus a bonus that grows with the severity the analyst assigns.

print("reward for a deferred alert (machine priority x analyst verdict)\n")
print(f"{'':>10}" + "".join(f"{p.label:>10}" for p in PRIORITIES))
for ai in PRIORITIES:
    row = [reward(ai, analyst, True, params) for analyst in PRIORITIES]
    print(f"{ai.label:>10}" + "".join(f"{v:>10.1f}" for v in row))

print("\naccepting (not deferring) always pays 0: the agent only learns "
      "from the alerts\nit sends to a human.")

# --- exploration schedule ---------------------------------------------------
# Early on the agent defers mostly at random; the schedule decays toward a
# floor so late-run behaviour is driven by the learned Q-values.

cfg = AgentConfig()
print("\nexploration rate eps(t) = max(eps_min, eps0 / (1 + d*t))\n")
width = 52
for t in (0, 50, 100, 200, 500, 1000, 2000, 5000, 14800, 50000):
    e = epsilon(t, cfg)
    bar = "#" * round(e * width)
    print(f"  t={t:>6}  eps={e:0.3f}  {bar}")

print("\nthe floor (0.01) is reached exactly at t=14800 and held from there on.")
