"""Smart-grid side: utility, occupancy-measure LP, policy extraction, baselines.

The grid picks a per-bus billing reference (one vector per action) and the
providers' coalition structure responds through the merge/split chain.  The
long-run pricing policy is the solution of an occupancy-measure LP over
(partition state, action) pairs: maximize expected grid utility subject to
per-provider expected-price bounds, stationarity balance, and normalization.
CENT (centralized argmax) and NoCoop (fixed demand, price maximization)
serve as the upper-bound and no-cooperation baselines.
"""

from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .allocation import CoalitionEvaluator
from .dynamics import (DynamicsParams, StateSpace, build_transition_matrix,
                       stationary_distribution)
from .model import BusPricing, electricity_price, power_draw
from .shapley import shapley_values

_PRICE_TOL = 1e-9
_MASS_TOL = 1e-12


@dataclass(frozen=True)
class ActionGrid:
    """Finite action set: each action maps bus id -> billing reference (kW)."""

    actions: tuple  # tuple of dicts
    labels: tuple   # human-readable tag per action (e.g. the scale factor)

    def __post_init__(self):
        seen = set()
        for a in self.actions:
            key = tuple(sorted(a.items()))
            if key in seen:
                raise ValueError("action grid contains duplicate actions")
            seen.add(key)

    def __len__(self):
        return len(self.actions)


def build_action_grid(reference, scales=(0.6, 0.8, 1.0, 1.2)) -> ActionGrid:
    """Scale a per-bus reference level by each factor in ``scales``."""
    actions = tuple({bus: s * ref for bus, ref in reference.items()} for s in scales)
    return ActionGrid(actions=actions, labels=tuple(str(s) for s in scales))


class SlotModel:
    """All per-slot quantities the pricing layer needs, memoized per action.

    ``bus_params`` maps bus id -> (beta, base_price); the price band and the
    grid weights come from ``grid``.  Every derived quantity (coalition
    values, Shapley payoffs, per-partition power vectors, transition
    matrices) is cached by action id, which keeps the state x action sweep
    affordable.
    """

    def __init__(self, specs, workloads, bus_params, price_lo, price_hi,
                 grid, migration, dyn_params: DynamicsParams,
                 action_grid: ActionGrid, exact_pivot=None):
        self.specs = specs
        self.workloads = workloads
        self.bus_params = bus_params
        self.price_lo = price_lo
        self.price_hi = price_hi
        self.grid = grid
        self.migration = migration
        self.dyn_params = dyn_params
        self.action_grid = action_grid
        self.providers = tuple(sorted(specs))
        self.space = StateSpace(len(self.providers))
        self.exact_pivot = exact_pivot
        self._evaluators = {}
        self._payoffs = {}
        self._matrices = {}

    def pricing_for_action(self, a: int) -> dict:
        """Provider id -> BusPricing under action ``a``."""
        action = self.action_grid.actions[a]
        out = {}
        for j in self.providers:
            bus = self.specs[j].bus
            beta, z = self.bus_params[bus]
            out[j] = BusPricing(
                beta=beta, base_price=z, billing_ref=action[bus],
                price_lo=self.price_lo, price_hi=self.price_hi,
            )
        return out

    def evaluator(self, a: int) -> CoalitionEvaluator:
        ev = self._evaluators.get(a)
        if ev is None:
            kwargs = {}
            if self.exact_pivot is not None:
                kwargs["exact_pivot"] = self.exact_pivot
            ev = CoalitionEvaluator(
                self.workloads, self.specs, self.pricing_for_action(a),
                self.migration, **kwargs,
            )
            self._evaluators[a] = ev
        return ev

    def payoffs(self, partition, a: int) -> dict:
        """Per-provider Shapley payoff under ``partition`` and action ``a``."""
        out = {}
        ev = self.evaluator(a)
        for block in partition.blocks:
            key = (block, a)
            psi = self._payoffs.get(key)
            if psi is None:
                psi = shapley_values(block, ev.value)
                self._payoffs[key] = psi
            out.update(psi)
        return out

    def power_vector(self, partition, a: int) -> dict:
        """Provider id -> power draw (kW) under the partition's optimal
        allocations at action ``a``."""
        ev = self.evaluator(a)
        e = {}
        for block in partition.blocks:
            alloc = ev.evaluate(block).allocation
            for j in block:
                e[j] = alloc.draws[j].power
        return e

    def prices(self, partition, a: int) -> dict:
        pricing = self.pricing_for_action(a)
        e = self.power_vector(partition, a)
        return {j: electricity_price(pricing[j], e[j]) for j in self.providers}

    def utility(self, partition, a: int) -> float:
        return sg_utility(
            partition, self.evaluator(a), self.pricing_for_action(a),
            self.grid, self.specs,
        )

    def utility_components(self, partition, a: int):
        """(revenue sum, mismatch sum) making up the utility of one pair."""
        e = self.power_vector(partition, a)
        pr = self.prices(partition, a)
        revenue = sum(pr[j] * e[j] for j in self.providers)
        mismatch = sum(
            abs(e[j] - self.grid.supply[self.specs[j].bus]) for j in self.providers
        )
        return revenue, mismatch

    def transition_matrix(self, a: int) -> np.ndarray:
        T = self._matrices.get(a)
        if T is None:
            T = build_transition_matrix(
                self.space, self.dyn_params, lambda p: self.payoffs(p, a)
            )
            self._matrices[a] = T
        return T

    # dense tables used by the LP builder and the baselines

    def utility_table(self) -> np.ndarray:
        S, A = len(self.space), len(self.action_grid)
        U = np.empty((S, A))
        for k, p in enumerate(self.space.states):
            for a in range(A):
                U[k, a] = self.utility(p, a)
        return U

    def price_table(self) -> np.ndarray:
        """(provider, state, action) electricity prices."""
        S, A = len(self.space), len(self.action_grid)
        theta = np.empty((len(self.providers), S, A))
        for k, p in enumerate(self.space.states):
            for a in range(A):
                pr = self.prices(p, a)
                for idx, j in enumerate(self.providers):
                    theta[idx, k, a] = pr[j]
        return theta

    def payoff_table(self) -> np.ndarray:
        """(provider, state, action) Shapley payoffs."""
        S, A = len(self.space), len(self.action_grid)
        psi = np.empty((len(self.providers), S, A))
        for k, p in enumerate(self.space.states):
            for a in range(A):
                pay = self.payoffs(p, a)
                for idx, j in enumerate(self.providers):
                    psi[idx, k, a] = pay[j]
        return psi


def sg_utility(partition, evaluator, pricing, grid, specs) -> float:
    """Grid utility: weighted revenue minus normalized supply/demand mismatch."""
    revenue = 0.0
    mismatch = 0.0
    e = {}
    for block in partition.blocks:
        alloc = evaluator.evaluate(block).allocation
        for j in block:
            e[j] = alloc.draws[j].power
    for j, ej in e.items():
        theta = electricity_price(pricing[j], ej)
        revenue += theta * ej
        mismatch += abs(ej - grid.supply[specs[j].bus])
    return grid.alpha1 * revenue - grid.alpha2 * grid.k_norm * mismatch


@dataclass
class PricingPolicy:
    """Occupancy measure and the per-state action distribution it induces."""

    phi: np.ndarray             # (S, A) occupancy measure
    varphi: np.ndarray          # (S, A) conditional action distribution
    expected_utility: float     # LP objective, $ per slot
    expected_prices: dict       # provider id -> expected $/kWh
    fallback_states: tuple      # states with zero occupancy mass
    transition: np.ndarray      # (S, S) policy-induced chain
    stationary: np.ndarray      # stationary vector of ``transition``


def build_cmdp_lp(utilities, prices, transitions, price_lo, price_hi):
    """Occupancy-measure LP over (state, action) pairs.

    utilities: (S, A); prices: (N, S, A); transitions: list of (S, S) per
    action.  One balance row per state, with the last state's row dropped
    (it is implied by the others plus normalization).
    """
    S, A = utilities.shape
    n = S * A

    def var(k, a):
        return k * A + a

    c = utilities.reshape(n)
    n_prov = prices.shape[0]
    a_ub = prices.reshape(n_prov, n)
    b_ub = np.full(n_prov, price_hi)
    a_lb = prices.reshape(n_prov, n)
    b_lb = np.full(n_prov, price_lo)

    a_eq = np.zeros((S, n))
    for kp in range(S):
        for a in range(A):
            a_eq[kp, var(kp, a)] += 1.0
    for a, T in enumerate(transitions):
        for k in range(S):
            col = var(k, a)
            a_eq[:, col] -= T[k, :]
    a_eq = a_eq[:-1]  # drop one redundant balance row
    b_eq = np.zeros(S - 1)

    norm = np.ones((1, n))
    a_eq = np.vstack([a_eq, norm])
    b_eq = np.append(b_eq, 1.0)
    return simplex.LinearProgram(
        c=c, a_eq=a_eq, b_eq=b_eq, a_ub=a_ub, b_ub=b_ub, a_lb=a_lb, b_lb=b_lb
    )


def extract_policy(solution, utilities, prices, transitions) -> PricingPolicy:
    """Per-state action distribution from the optimal occupancy measure.

    States with zero occupancy mass get a point mass on the action with the
    best immediate utility (and are flagged in ``fallback_states``).
    """
    if solution.status != "optimal":
        raise ValueError(f"cannot extract a policy from status {solution.status}")
    S, A = utilities.shape
    phi = np.clip(solution.x.reshape(S, A), 0.0, None)
    varphi = np.zeros_like(phi)
    fallback = []
    for k in range(S):
        mass = phi[k].sum()
        if mass > _MASS_TOL:
            varphi[k] = phi[k] / mass
        else:
            fallback.append(k)
            varphi[k, int(np.argmax(utilities[k]))] = 1.0
    T_pi = np.zeros((S, S))
    for a, T in enumerate(transitions):
        T_pi += varphi[:, a:a + 1] * T
    p = stationary_distribution(T_pi)
    expected_prices = {
        i: float((prices[idx] * phi).sum())
        for idx, i in enumerate(_provider_axis(prices))
    }
    return PricingPolicy(
        phi=phi,
        varphi=varphi,
        expected_utility=float((utilities * phi).sum()),
        expected_prices=expected_prices,
        fallback_states=tuple(fallback),
        transition=T_pi,
        stationary=p,
    )


def _provider_axis(prices):
    # prices carries no ids; callers wanting real ids should use solve_pricing_policy
    return range(prices.shape[0])


def solve_pricing_policy(model: SlotModel) -> PricingPolicy:
    """Full ICG pipeline for one slot: tables, LP, extraction."""
    U = model.utility_table()
    theta = model.price_table()
    transitions = [model.transition_matrix(a) for a in range(len(model.action_grid))]
    lp = build_cmdp_lp(U, theta, transitions, model.price_lo, model.price_hi)
    sol = simplex.solve(lp)
    if sol.status != "optimal":
        raise RuntimeError(f"occupancy LP terminated with status {sol.status}")
    policy = extract_policy(sol, U, theta, transitions)
    policy.expected_prices = {
        j: float((theta[idx] * policy.phi).sum())
        for idx, j in enumerate(model.providers)
    }
    return policy


def average_profits(policy: PricingPolicy, model: SlotModel):
    """Long-run per-slot averages of grid utility and provider payoffs."""
    U = model.utility_table()
    psi = model.payoff_table()
    weights = policy.stationary[:, None] * policy.varphi
    sg_avg = float((weights * U).sum())
    cp_avg = {
        j: float((weights * psi[idx]).sum())
        for idx, j in enumerate(model.providers)
    }
    return sg_avg, cp_avg


def cent_solve(model: SlotModel):
    """Centralized benchmark: argmax of immediate utility over all
    (partition, action) pairs whose prices stay inside the band."""
    best = None
    for k, p in enumerate(model.space.states):
        for a in range(len(model.action_grid)):
            pr = model.prices(p, a)
            if any(t < model.price_lo - _PRICE_TOL or t > model.price_hi + _PRICE_TOL
                   for t in pr.values()):
                continue
            u = model.utility(p, a)
            if best is None or u > best[0] + 1e-12:
                best = (u, k, a)
    if best is None:
        raise RuntimeError("no feasible (partition, action) pair for CENT")
    u, k, a = best
    payoffs = model.payoffs(model.space.states[k], a)
    return model.space.states[k], a, u, payoffs


def nocoop_solve(model: SlotModel):
    """No-cooperation baseline.

    Every provider serves its own workload, so power draws are fixed; the
    grid picks one action from its grid (the same shared billing-reference
    vector it would use in the other schemes) maximizing utility subject to
    every price staying inside the band.  Mirroring the other schemes'
    action space keeps the baseline configuration inside the centralized
    scheme's feasible set.  Returns (per-provider action index, utility,
    per-provider profit, per-provider price).
    """
    e_fixed = {j: power_draw(model.specs[j], model.workloads[j]).power
               for j in model.providers}

    def action_prices(action):
        out = {}
        for j in model.providers:
            beta, z = model.bus_params[model.specs[j].bus]
            out[j] = beta * (e_fixed[j] - action[model.specs[j].bus]) + z
        return out

    best = None
    fallback = None
    for a, action in enumerate(model.action_grid.actions):
        prices = action_prices(action)
        revenue = sum(prices[j] * e_fixed[j] for j in model.providers)
        violation = sum(
            max(t - model.price_hi, model.price_lo - t, 0.0)
            for t in prices.values()
        )
        if fallback is None or violation < fallback[0] - 1e-12:
            fallback = (violation, revenue, a, prices)
        if violation > _PRICE_TOL:
            continue
        if best is None or revenue > best[0] + 1e-12:
            best = (revenue, a, prices)
    if best is None:  # no action keeps every bus in band; least violating
        _, revenue, a, prices = fallback
        best = (revenue, a, prices)
    revenue, a_star, theta = best
    chosen = {j: a_star for j in model.providers}
    mismatch = sum(abs(e_fixed[j] - model.grid.supply[model.specs[j].bus])
                   for j in model.providers)
    utility = model.grid.alpha1 * revenue - model.grid.alpha2 * model.grid.k_norm * mismatch
    profits = {
        j: model.workloads[j] * model.specs[j].revenue_rate - theta[j] * e_fixed[j]
        for j in model.providers
    }
    return chosen, utility, profits, theta
