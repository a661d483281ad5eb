"""Exact Shapley division of a coalition's value among its members."""

import math
from itertools import combinations

MAX_COALITION = 12


def shapley_values(members, value_oracle) -> dict:
    """Shapley payoff of every member of a coalition.

    ``value_oracle`` maps a frozenset of members to the coalition value;
    the empty set is taken as 0 without consulting the oracle.  Exact
    subset-sum evaluation, 2^|S| oracle calls.
    """
    members = tuple(sorted(members))
    s = len(members)
    if s == 0:
        raise ValueError("coalitions are non-empty")
    if s > MAX_COALITION:
        raise ValueError(f"coalition of size {s} exceeds exact-Shapley cap {MAX_COALITION}")

    def v(subset):
        return 0.0 if not subset else value_oracle(frozenset(subset))

    fact = [math.factorial(k) for k in range(s + 1)]
    payoff = {}
    for j in members:
        others = [m for m in members if m != j]
        total = 0.0
        for r in range(len(others) + 1):
            weight = fact[r] * fact[s - r - 1] / fact[s]
            for sub in combinations(others, r):
                total += weight * (v(sub + (j,)) - v(sub))
        payoff[j] = total
    return payoff
