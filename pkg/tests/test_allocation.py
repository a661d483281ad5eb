import itertools
import time

import numpy as np
import pytest

from gridcoal.allocation import (CoalitionEvaluator, InfeasibleCoalitionError,
                                 MigrationCostMatrix, coalition_cost,
                                 coalition_revenue, evaluate_coalition,
                                 solve_allocation)
from gridcoal.model import BusPricing, DataCenterSpec, electricity_price, power_draw


def make_spec(j, bus=None, hosts=4, vms_per_host=2, pue=1.3,
              p_idle=0.2, p_peak=0.6, revenue_rate=0.10):
    return DataCenterSpec(id=j, bus=bus if bus is not None else j,
                          hosts=hosts, vms_per_host=vms_per_host, pue=pue,
                          p_idle=p_idle, p_peak=p_peak, revenue_rate=revenue_rate)


def make_pricing(beta=0.01, z=0.12, ref=1.0):
    return BusPricing(beta=beta, base_price=z, billing_ref=ref,
                      price_lo=0.08, price_hi=0.25)


def brute_force_optimum(members, workloads, specs, pricing, migration):
    """Exhaustive search over every integer migration matrix (the oracle).

    Enumerates, per source, every split of its workload across destinations,
    rejects capacity violations, and prices each complete matrix directly.
    """
    members = tuple(sorted(members))

    def splits(amount, k):
        if k == 1:
            yield (amount,)
            return
        for first in range(amount + 1):
            for rest in splits(amount - first, k - 1):
                yield (first, *rest)

    best = None
    per_source = [list(splits(workloads[i], len(members))) for i in members]
    for combo in itertools.product(*per_source):
        loads = {j: 0 for j in members}
        for i_idx, row in enumerate(combo):
            for j_idx, w in enumerate(row):
                loads[members[j_idx]] += w
        if any(loads[j] > specs[j].capacity for j in members):
            continue
        cost = 0.0
        for j in members:
            e = power_draw(specs[j], loads[j]).power
            cost += electricity_price(pricing[j], e) * e
        for i_idx, i in enumerate(members):
            for j_idx, j in enumerate(members):
                if i != j:
                    cost += combo[i_idx][j_idx] * migration(i, j)
        if best is None or cost < best:
            best = cost
    return best


class TestOracleEquivalence:
    def test_200_random_small_instances(self):
        rng = np.random.default_rng(11)
        t0 = time.perf_counter()
        for trial in range(200):
            n_members = int(rng.integers(1, 4))
            members = tuple(range(1, n_members + 1))
            specs = {}
            workloads = {}
            pricing = {}
            for j in members:
                hosts = int(rng.integers(1, 4))
                vph = int(rng.integers(1, 4))
                specs[j] = make_spec(
                    j, hosts=hosts, vms_per_host=vph,
                    pue=float(rng.uniform(1.1, 2.0)),
                    p_idle=float(rng.uniform(0.05, 0.3)),
                    p_peak=float(rng.uniform(0.35, 1.2)),
                )
                pricing[j] = make_pricing(
                    beta=float(rng.uniform(0.001, 0.05)),
                    z=float(rng.uniform(0.08, 0.25)),
                    ref=float(rng.uniform(0.0, 5.0)),
                )
            total_cap = sum(specs[j].capacity for j in members)
            budget = min(12, total_cap)
            remaining = int(rng.integers(0, budget + 1))
            for j in members:
                w = int(rng.integers(0, min(remaining, specs[j].capacity) + 1))
                workloads[j] = w
                remaining -= w
            migration = MigrationCostMatrix({
                (i, j): float(rng.uniform(0.0, 0.2))
                for i in members for j in members if i != j
            })
            alloc = solve_allocation(members, workloads, specs, pricing, migration)
            oracle = brute_force_optimum(members, workloads, specs, pricing, migration)
            assert alloc.objective == pytest.approx(oracle, abs=1e-9), (
                f"trial {trial}: solver {alloc.objective} vs oracle {oracle}"
            )
        assert time.perf_counter() - t0 < 30.0


class TestAllocationStructure:
    def test_singleton_serves_itself(self):
        specs = {1: make_spec(1)}
        pricing = {1: make_pricing()}
        alloc = solve_allocation((1,), {1: 5}, specs, pricing,
                                 MigrationCostMatrix.zero([1]))
        assert alloc.omega == {(1, 1): 5}
        assert alloc.column_loads == {1: 5}

    def test_conservation(self):
        rng = np.random.default_rng(3)
        members = (1, 2, 3)
        specs = {j: make_spec(j, hosts=3, vms_per_host=2) for j in members}
        pricing = {j: make_pricing(ref=float(j)) for j in members}
        migration = MigrationCostMatrix({
            (i, j): float(rng.uniform(0, 0.1))
            for i in members for j in members if i != j
        })
        workloads = {1: 4, 2: 2, 3: 5}
        alloc = solve_allocation(members, workloads, specs, pricing, migration)
        # every VM is served somewhere, per source and in total
        for i in members:
            assert sum(w for (s, _), w in alloc.omega.items() if s == i) == workloads[i]
        assert sum(alloc.column_loads.values()) == sum(workloads.values())
        # column loads match the migration matrix
        for j in members:
            assert alloc.column_loads[j] == sum(
                w for (_, d), w in alloc.omega.items() if d == j
            )

    def test_respects_capacity(self):
        members = (1, 2)
        specs = {1: make_spec(1, hosts=1, vms_per_host=2),
                 2: make_spec(2, hosts=5, vms_per_host=2)}
        pricing = {j: make_pricing() for j in members}
        alloc = solve_allocation(members, {1: 2, 2: 8}, specs, pricing,
                                 MigrationCostMatrix.zero(members))
        for j in members:
            assert alloc.column_loads[j] <= specs[j].capacity

    def test_infeasible_demand(self):
        specs = {1: make_spec(1, hosts=1, vms_per_host=1)}
        with pytest.raises(InfeasibleCoalitionError):
            solve_allocation((1,), {1: 2}, specs, {1: make_pricing()},
                             MigrationCostMatrix.zero([1]))

    def test_consolidation_beats_spreading_when_free(self):
        # with zero migration cost and one cheap destination, everything
        # migrates to the cheap bus
        members = (1, 2)
        specs = {j: make_spec(j, hosts=5, vms_per_host=2) for j in members}
        pricing = {
            1: make_pricing(beta=0.001, z=0.10, ref=100.0),  # cheap (below ref)
            2: make_pricing(beta=0.05, z=0.24, ref=0.0),     # expensive
        }
        alloc = solve_allocation(members, {1: 3, 2: 3}, specs, pricing,
                                 MigrationCostMatrix.zero(members))
        assert alloc.column_loads[1] == 6
        assert alloc.column_loads[2] == 0

    def test_migration_cost_can_pin_vms_home(self):
        members = (1, 2)
        specs = {j: make_spec(j, hosts=5, vms_per_host=2) for j in members}
        pricing = {
            1: make_pricing(beta=0.001, z=0.10, ref=100.0),
            2: make_pricing(beta=0.05, z=0.24, ref=0.0),
        }
        # prohibitive migration cost keeps provider 2's load at home
        expensive = MigrationCostMatrix({(1, 2): 1e6, (2, 1): 1e6})
        alloc = solve_allocation(members, {1: 3, 2: 3}, specs, pricing, expensive)
        assert alloc.column_loads == {1: 3, 2: 3}

    def test_heuristic_close_to_exact_on_medium_instance(self):
        rng = np.random.default_rng(5)
        members = (1, 2, 3)
        specs = {j: make_spec(j, hosts=20, vms_per_host=3) for j in members}
        pricing = {j: make_pricing(beta=0.002, ref=10.0 * j) for j in members}
        migration = MigrationCostMatrix({
            (i, j): float(rng.uniform(0.0, 0.01))
            for i in members for j in members if i != j
        })
        workloads = {1: 40, 2: 25, 3: 30}
        exact = solve_allocation(members, workloads, specs, pricing, migration)
        heur = solve_allocation(members, workloads, specs, pricing, migration,
                                exact_pivot=0)
        assert heur.objective >= exact.objective - 1e-9
        assert heur.objective <= exact.objective * 1.02 + 1e-9

    def test_exact_pivot_switches_paths(self):
        members = (1, 2)
        specs = {j: make_spec(j, hosts=10, vms_per_host=2) for j in members}
        pricing = {j: make_pricing() for j in members}
        mig = MigrationCostMatrix.zero(members)
        a = solve_allocation(members, {1: 6, 2: 6}, specs, pricing, mig,
                             exact_pivot=100)
        b = solve_allocation(members, {1: 6, 2: 6}, specs, pricing, mig,
                             exact_pivot=0)
        assert b.objective >= a.objective - 1e-9


class TestRevenueAndValue:
    def test_revenue_sums_member_workloads(self):
        specs = {1: make_spec(1, revenue_rate=0.10), 2: make_spec(2, revenue_rate=0.20)}
        assert coalition_revenue((1, 2), {1: 5, 2: 3}, specs) == pytest.approx(1.1)

    def test_empty_coalition_rejected(self):
        with pytest.raises(ValueError):
            coalition_revenue((), {}, {})

    def test_value_is_revenue_minus_cost(self):
        members = (1, 2)
        specs = {j: make_spec(j) for j in members}
        pricing = {j: make_pricing() for j in members}
        ev = evaluate_coalition(members, {1: 3, 2: 2}, specs, pricing,
                                MigrationCostMatrix.zero(members))
        assert ev.value == pytest.approx(ev.revenue - ev.cost)

    def test_migration_cost_added_not_subtracted(self):
        # identical setups except for the migration price: when VMs do move,
        # a costlier link must never yield a cheaper coalition
        members = (1, 2)
        specs = {j: make_spec(j, hosts=5, vms_per_host=2) for j in members}
        pricing = {
            1: make_pricing(beta=0.001, z=0.10, ref=100.0),
            2: make_pricing(beta=0.05, z=0.24, ref=0.0),
        }
        free = solve_allocation(members, {1: 2, 2: 2}, specs, pricing,
                                MigrationCostMatrix.zero(members))
        paid = solve_allocation(members, {1: 2, 2: 2}, specs, pricing,
                                MigrationCostMatrix({(1, 2): 0.01, (2, 1): 0.01}))
        assert paid.objective >= free.objective

    def test_superadditivity_with_zero_migration(self):
        # with free migration the merged coalition can always replicate the
        # split coalitions' allocations, so v is superadditive
        specs = {j: make_spec(j, hosts=4, vms_per_host=2, p_idle=0.1 * j,
                              p_peak=0.5 + 0.1 * j) for j in (1, 2, 3)}
        pricing = {j: make_pricing(beta=0.01 * j, ref=2.0 * j) for j in (1, 2, 3)}
        workloads = {1: 3, 2: 4, 3: 2}
        ev = CoalitionEvaluator(workloads, specs, pricing,
                                MigrationCostMatrix.zero((1, 2, 3)))
        v12 = ev.value((1, 2))
        v3 = ev.value((3,))
        v123 = ev.value((1, 2, 3))
        assert v123 >= v12 + v3 - 1e-9


class TestCoalitionCost:
    def test_matches_components(self):
        members = (1, 2)
        specs = {j: make_spec(j) for j in members}
        pricing = {j: make_pricing(ref=2.0) for j in members}
        migration = MigrationCostMatrix({(1, 2): 0.05, (2, 1): 0.07})
        alloc = solve_allocation(members, {1: 3, 2: 1}, specs, pricing, migration)
        recomputed = coalition_cost(members, alloc, pricing, migration, specs)
        assert recomputed == pytest.approx(alloc.objective, abs=1e-9)


class TestMigrationCostMatrix:
    def test_diagonal_zero(self):
        m = MigrationCostMatrix({(1, 2): 0.1, (2, 1): 0.2})
        assert m(1, 1) == 0.0
        assert m(1, 2) == 0.1

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            MigrationCostMatrix({(1, 2): -0.1})

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError):
            MigrationCostMatrix({(1, 1): 0.5})

    def test_sample_respects_floor(self):
        rng = np.random.default_rng(0)
        m = MigrationCostMatrix.sample([1, 2, 3], rng)
        rate_gb_per_s = 100.0 / 8.0 / 1000.0
        floor_cost = 0.001 * rate_gb_per_s * 60.0
        for (i, j), c in m.cost.items():
            assert c >= floor_cost - 1e-12

    def test_evaluator_caches(self):
        members = (1, 2)
        specs = {j: make_spec(j) for j in members}
        pricing = {j: make_pricing() for j in members}
        ev = CoalitionEvaluator({1: 2, 2: 2}, specs, pricing,
                                MigrationCostMatrix.zero(members))
        first = ev.evaluate(members)
        second = ev.evaluate(frozenset(members))
        assert first is second
