"""Coalition revenue/cost/value via optimal VM migration inside a federation.

A coalition's cost splits into an energy term that depends only on the
per-destination VM totals (column sums of the migration matrix) and a linear
migration term.  The solver searches over column totals, pricing the energy
term exactly with the consolidated-host power model, and settles the
migration term with a min-cost transportation assignment.  Small instances
are solved exactly by enumeration; larger ones by greedy marginal-cost
filling plus multi-scale local repair (the objective is near-convex: a
convex quadratic in power, with only the idle-power staircase breaking
convexity).
"""

import math
from dataclasses import dataclass

import numpy as np

from .model import electricity_price, power_draw

EXACT_PIVOT_DEFAULT = 10_000  # total VMs above which the heuristic path is used
_EXACT_ENUM_CAP = 200_000  # max column-total vectors we are willing to enumerate


class InfeasibleCoalitionError(ValueError):
    """Coalition demand exceeds coalition capacity."""

    def __init__(self, members, demand, capacity):
        self.members = tuple(members)
        super().__init__(
            f"coalition {set(members)} infeasible: demand {demand} "
            f"exceeds capacity {capacity}"
        )


@dataclass(frozen=True)
class MigrationCostMatrix:
    """Per-VM hourly migration cost between providers; zero on the diagonal."""

    cost: dict  # (i, j) -> $ per VM per slot

    def __post_init__(self):
        for (i, j), c in self.cost.items():
            if i == j and c != 0.0:
                raise ValueError(f"migration cost ({i},{i}) must be 0")
            if c < 0:
                raise ValueError(f"migration cost ({i},{j}) must be >= 0")

    def __call__(self, i, j):
        if i == j:
            return 0.0
        return self.cost[(i, j)]

    @staticmethod
    def zero(ids) -> "MigrationCostMatrix":
        return MigrationCostMatrix({(i, j): 0.0 for i in ids for j in ids if i != j})

    @staticmethod
    def sample(ids, rng, cost_per_gb=0.001, rate_mbit=100.0,
               time_mean=554.0, time_std=364.0, time_floor=60.0):
        """Random migration costs: data cost rate x link rate x transfer time.

        Transfer times are Normal(time_mean, time_std), resampled below
        ``time_floor`` seconds (a physical lower bound; the published mean
        stays approximately intact).
        """
        rate_gb_per_s = rate_mbit / 8.0 / 1000.0
        cost = {}
        for i in ids:
            for j in ids:
                if i == j:
                    continue
                t = rng.normal(time_mean, time_std)
                while t < time_floor:
                    t = rng.normal(time_mean, time_std)
                cost[(i, j)] = cost_per_gb * rate_gb_per_s * t
        return MigrationCostMatrix(cost)


@dataclass(frozen=True)
class Allocation:
    """Optimal migration matrix for one coalition under one price action."""

    members: tuple
    omega: dict          # (i, j) -> VM count, source i serves at destination j
    column_loads: dict   # j -> total VMs hosted at j
    draws: dict          # j -> PowerDraw at the column load
    objective: float     # minimized coalition cost C(S), $


@dataclass(frozen=True)
class CoalitionEvaluation:
    members: tuple
    revenue: float
    cost: float
    value: float
    allocation: Allocation


def coalition_revenue(members, workloads, specs) -> float:
    """Total revenue of a coalition: sum of W_j * r_j over members."""
    members = tuple(members)
    if not members:
        raise ValueError("coalitions are non-empty")
    return float(sum(workloads[j] * specs[j].revenue_rate for j in members))


def _energy_cost_fn(spec, pricing):
    """$ per slot of hosting n VMs at one DC: unit price times power."""

    def cost(n):
        e = power_draw(spec, n).power
        return electricity_price(pricing, e) * e

    return cost


def coalition_cost(members, alloc: Allocation, pricing, migration, specs) -> float:
    """Energy plus migration cost of a given allocation.

    ``pricing`` maps provider id -> BusPricing of its bus.  The energy term
    prices each destination's power at the tiered rate induced by its own
    column load; the migration term counts off-diagonal entries only.
    """
    total = 0.0
    for j in members:
        e = alloc.draws[j].power
        total += electricity_price(pricing[j], e) * e
    for (i, j), w in alloc.omega.items():
        if i != j:
            total += w * migration(i, j)
    return total


def _min_cost_transport(supplies, demands, cost_fn):
    """Exact min-cost transportation via successive shortest augmenting paths.

    supplies/demands: list of (id, amount).  Returns (total_cost, flows)
    with flows as {(src_id, dst_id): amount}.  Sizes here are tiny (at most
    a dozen nodes), so a dense Bellman-Ford per augmentation is plenty.
    """
    srcs = [i for i, a in supplies if a > 0]
    dsts = [j for j, a in demands if a > 0]
    sup = {i: a for i, a in supplies}
    dem = {j: a for j, a in demands}
    # nodes: 0 = source, 1 = sink, then srcs, then dsts
    n_nodes = 2 + len(srcs) + len(dsts)
    s_idx = {i: 2 + k for k, i in enumerate(srcs)}
    d_idx = {j: 2 + len(srcs) + k for k, j in enumerate(dsts)}
    graph = [[] for _ in range(n_nodes)]  # edges: [to, cap, cost, flow, rev_pos]

    def add_edge(u, v, cap, cost):
        graph[u].append([v, cap, cost, 0, len(graph[v])])
        graph[v].append([u, 0, -cost, 0, len(graph[u]) - 1])

    for i in srcs:
        add_edge(0, s_idx[i], sup[i], 0.0)
    for j in dsts:
        add_edge(d_idx[j], 1, dem[j], 0.0)
    for i in srcs:
        for j in dsts:
            add_edge(s_idx[i], d_idx[j], min(sup[i], dem[j]), cost_fn(i, j))

    total_flow_target = sum(dem.values())
    pushed = 0
    total_cost = 0.0
    INF = float("inf")
    while pushed < total_flow_target:
        dist = [INF] * n_nodes
        dist[0] = 0.0
        in_queue = [False] * n_nodes
        prev = [None] * n_nodes  # (node, edge index)
        queue = [0]
        in_queue[0] = True
        while queue:
            u = queue.pop()
            in_queue[u] = False
            du = dist[u]
            for ei, e in enumerate(graph[u]):
                v, cap, cost, flow, _ = e
                if cap - flow > 0 and du + cost < dist[v] - 1e-15:
                    dist[v] = du + cost
                    prev[v] = (u, ei)
                    if not in_queue[v]:
                        queue.append(v)
                        in_queue[v] = True
        if prev[1] is None:
            raise InfeasibleCoalitionError(srcs, total_flow_target, pushed)
        bottleneck = INF
        v = 1
        while v != 0:
            u, ei = prev[v]
            e = graph[u][ei]
            bottleneck = min(bottleneck, e[1] - e[3])
            v = u
        v = 1
        while v != 0:
            u, ei = prev[v]
            e = graph[u][ei]
            e[3] += bottleneck
            graph[e[0]][e[4]][3] -= bottleneck
            v = u
        pushed += bottleneck
        total_cost += bottleneck * dist[1]
    flows = {}
    for i in srcs:
        for e in graph[s_idx[i]]:
            v, cap, cost, flow, _ = e
            if flow > 0 and v >= 2 + len(srcs):
                j = dsts[v - 2 - len(srcs)]
                flows[(i, j)] = flows.get((i, j), 0) + flow
    return total_cost, flows


def _compositions(total, caps):
    """Yield integer vectors n with sum(n) == total and 0 <= n[k] <= caps[k]."""
    k = len(caps)

    def rec(idx, remaining, acc):
        if idx == k - 1:
            if remaining <= caps[idx]:
                yield acc + (remaining,)
            return
        tail_cap = sum(caps[idx + 1:])
        lo = max(0, remaining - tail_cap)
        hi = min(caps[idx], remaining)
        for v in range(lo, hi + 1):
            yield from rec(idx + 1, remaining - v, acc + (v,))

    yield from rec(0, total, ())


def _composition_count(total, caps):
    # DP count, used only to guard exact enumeration.  counts[s] is the
    # number of ways to reach partial sum s; each member extends it by a
    # sliding-window sum of width cap+1.  Counts are clamped at the cap + 1:
    # any clamped state that still feeds the final total keeps it above the
    # cap, so the <= _EXACT_ENUM_CAP decision is unaffected while the floats
    # stay exactly representable.
    ceiling = float(_EXACT_ENUM_CAP + 1)
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for cap in caps:
        w = min(cap, total)
        csum = np.cumsum(counts)
        new = np.empty_like(counts)
        new[: w + 1] = csum[: w + 1]
        new[w + 1:] = csum[w + 1:] - csum[: total - w]
        counts = np.minimum(new, ceiling)
        if counts.min() > _EXACT_ENUM_CAP:
            return _EXACT_ENUM_CAP + 1
    return int(counts[total])


def _solve_exact(members, workloads, specs, energy, migration):
    total = sum(workloads[i] for i in members)
    caps = [specs[j].capacity for j in members]
    supplies = [(i, workloads[i]) for i in members]
    best = None
    for n_vec in _compositions(total, caps):
        e_cost = sum(energy[j](n) for j, n in zip(members, n_vec))
        if best is not None and e_cost > best[0]:
            continue  # migration cost is nonnegative, so this vector cannot win
        m_cost, flows = _min_cost_transport(
            supplies, list(zip(members, n_vec)), migration
        )
        obj = e_cost + m_cost
        if best is None or obj < best[0] - 1e-12:
            best = (obj, e_cost, n_vec, flows)
    obj, _, n_vec, flows = best
    return obj, dict(zip(members, n_vec)), flows


def _solve_heuristic(members, workloads, specs, energy, migration):
    """Greedy marginal-cost fill over (source, destination) pairs, then
    multi-scale local repair with destination-shift and two-opt source swaps."""
    caps = {j: specs[j].capacity for j in members}
    total = sum(workloads[i] for i in members)
    omega = {}
    loads = {j: 0 for j in members}
    remaining = {i: workloads[i] for i in members if workloads[i] > 0}
    chunk = max(1, total // 200)
    while remaining:
        best = None
        for i in remaining:
            for j in members:
                free = caps[j] - loads[j]
                if free <= 0:
                    continue
                q = min(chunk, remaining[i], free)
                marginal = (energy[j](loads[j] + q) - energy[j](loads[j])) / q \
                    + migration(i, j)
                if best is None or marginal < best[0]:
                    best = (marginal, i, j, q)
        if best is None:
            raise InfeasibleCoalitionError(members, total, sum(caps.values()))
        _, i, j, q = best
        omega[(i, j)] = omega.get((i, j), 0) + q
        loads[j] += q
        remaining[i] -= q
        if remaining[i] == 0:
            del remaining[i]

    def try_shift(i, j, k, step):
        # move `step` VMs of source i from destination j to destination k
        have = omega.get((i, j), 0)
        step = min(step, have, caps[k] - loads[k])
        if step <= 0 or j == k:
            return False
        delta = (
            energy[j](loads[j] - step) - energy[j](loads[j])
            + energy[k](loads[k] + step) - energy[k](loads[k])
            + step * (migration(i, k) - migration(i, j))
        )
        if delta < -1e-9:
            omega[(i, j)] = have - step
            if omega[(i, j)] == 0:
                del omega[(i, j)]
            omega[(i, k)] = omega.get((i, k), 0) + step
            loads[j] -= step
            loads[k] += step
            return True
        return False

    def try_swap(i1, j1, i2, j2, step):
        # exchange destinations between two sources; loads are unchanged
        step = min(step, omega.get((i1, j1), 0), omega.get((i2, j2), 0))
        if step <= 0 or i1 == i2 or j1 == j2:
            return False
        delta = step * (
            migration(i1, j2) + migration(i2, j1)
            - migration(i1, j1) - migration(i2, j2)
        )
        if delta < -1e-9:
            for key, amt in (((i1, j1), -step), ((i2, j2), -step),
                             ((i1, j2), step), ((i2, j1), step)):
                omega[key] = omega.get(key, 0) + amt
                if omega[key] == 0:
                    del omega[key]
            return True
        return False

    steps = []
    s = max(1, total // 8)
    while s > 1:
        steps.append(s)
        s = max(1, s // 4)
    steps.extend(sorted({specs[j].vms_per_host for j in members}, reverse=True))
    steps.append(1)
    for step in steps:
        for _ in range(40):  # passes per scale; loop exits early at a local optimum
            improved = False
            pairs = sorted(omega)
            for (i, j) in pairs:
                for k in members:
                    if try_shift(i, j, k, step):
                        improved = True
            pairs = sorted(omega)
            for a in range(len(pairs)):
                for b in range(a + 1, len(pairs)):
                    if try_swap(*pairs[a], *pairs[b], step):
                        improved = True
            if not improved:
                break
    obj = sum(energy[j](loads[j]) for j in members) \
        + sum(w * migration(i, j) for (i, j), w in omega.items())
    return obj, loads, omega


def solve_allocation(members, workloads, specs, pricing, migration,
                     exact_pivot=EXACT_PIVOT_DEFAULT) -> Allocation:
    """Feasible migration matrix minimizing coalition cost C(S).

    Exact (enumeration over destination totals + transportation) when the
    instance is small; greedy + local repair above ``exact_pivot`` total VMs.
    """
    members = tuple(sorted(members))
    if not members:
        raise ValueError("coalitions are non-empty")
    total = sum(workloads[i] for i in members)
    cap = sum(specs[j].capacity for j in members)
    if total > cap:
        raise InfeasibleCoalitionError(members, total, cap)
    energy = {j: _energy_cost_fn(specs[j], pricing[j]) for j in members}

    if len(members) == 1:
        j = members[0]
        n = workloads[j]
        return Allocation(
            members=members,
            omega={(j, j): n} if n else {},
            column_loads={j: n},
            draws={j: power_draw(specs[j], n)},
            objective=energy[j](n),
        )

    caps = [specs[j].capacity for j in members]
    use_exact = total <= exact_pivot and _composition_count(total, caps) <= _EXACT_ENUM_CAP
    if use_exact:
        obj, loads, omega = _solve_exact(members, workloads, specs, energy, migration)
    else:
        obj, loads, omega = _solve_heuristic(members, workloads, specs, energy, migration)
    omega = {k: v for k, v in omega.items() if v > 0}
    return Allocation(
        members=members,
        omega=omega,
        column_loads={j: loads.get(j, 0) for j in members},
        draws={j: power_draw(specs[j], loads.get(j, 0)) for j in members},
        objective=obj,
    )


class CoalitionEvaluator:
    """Memoized coalition evaluation for one (slot, price action) context.

    Coalition value depends only on the member set (characteristic form),
    so results are cached per canonical member set.
    """

    def __init__(self, workloads, specs, pricing, migration,
                 exact_pivot=EXACT_PIVOT_DEFAULT):
        self.workloads = workloads
        self.specs = specs
        self.pricing = pricing
        self.migration = migration
        self.exact_pivot = exact_pivot
        self._cache = {}

    def evaluate(self, members) -> CoalitionEvaluation:
        key = frozenset(members)
        if not key:
            raise ValueError("coalitions are non-empty")
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        alloc = solve_allocation(
            members, self.workloads, self.specs, self.pricing, self.migration,
            exact_pivot=self.exact_pivot,
        )
        revenue = coalition_revenue(alloc.members, self.workloads, self.specs)
        result = CoalitionEvaluation(
            members=alloc.members,
            revenue=revenue,
            cost=alloc.objective,
            value=revenue - alloc.objective,
            allocation=alloc,
        )
        self._cache[key] = result
        return result

    def value(self, members) -> float:
        """Characteristic function v(S); v(empty) = 0 by convention."""
        if not members:
            return 0.0
        return self.evaluate(members).value


def evaluate_coalition(members, workloads, specs, pricing, migration,
                       exact_pivot=EXACT_PIVOT_DEFAULT) -> CoalitionEvaluation:
    """One-shot, uncached version of CoalitionEvaluator.evaluate."""
    return CoalitionEvaluator(
        workloads, specs, pricing, migration, exact_pivot=exact_pivot
    ).evaluate(members)
