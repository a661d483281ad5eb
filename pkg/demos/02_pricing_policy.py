"""Walkthrough 2: the grid's pricing policy for one hour of the built-in
six-data-center scenario.

The grid leads a Stackelberg game: it publishes a billing-reference action
(one of four scalings of the providers' standalone draws), and the
federation structure of the providers responds through the merge/split
chain.  Over (partition, action) pairs this is a constrained MDP: maximize
the grid's long-run average utility subject to each provider's expected
electricity price staying inside the legal band.  The LP over occupancy
measures solves it exactly; the policy is read off the optimal measure.

Run:  python demos/02_pricing_policy.py   (one LP solve; tens of seconds)
"""

import numpy as np

from gridcoal.policy import average_profits, solve_pricing_policy
from gridcoal.scenario import paper6

scenario = paper6()
slot = 12  # early afternoon, near the diurnal peak
model = scenario.slot_model(slot)

S, A = len(model.space), len(model.action_grid)
print(f"slot {slot}: {S} partition states x {A} actions "
      f"(scales {', '.join(model.action_grid.labels)})")
print(f"price band [{model.price_lo}, {model.price_hi}] $/kWh")
print()

policy = solve_pricing_policy(model)
print(f"LP optimum (expected grid utility): {policy.expected_utility:.3f} $/slot")
print()

print("expected electricity price per provider (all inside the band):")
for j, price in sorted(policy.expected_prices.items()):
    print(f"  provider {j}: {price:.4f} $/kWh")
print()

print("action distribution in the most-visited partition states:")
top = np.argsort(-policy.stationary)[:5]
for k in top:
    dist = ", ".join(
        f"{model.action_grid.labels[a]}: {policy.varphi[k, a]:.2f}"
        for a in range(A) if policy.varphi[k, a] > 1e-6
    )
    print(f"  {str(model.space.states[k]):24} p={policy.stationary[k]:.3f}  "
          f"action -> {dist}")
print()

sg_avg, cp_avg = average_profits(policy, model)
print(f"long-run grid profit under the policy: {sg_avg:.3f} $/slot")
print("long-run provider profits (Shapley shares of coalition value):")
for j, v in sorted(cp_avg.items()):
    print(f"  provider {j}: {v:10.3f} $/slot")
