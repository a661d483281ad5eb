from itertools import combinations

import numpy as np
import pytest

from gridcoal.simplex import LinearProgram, solve


def vertex_enumeration_optimum(lp):
    """Oracle: enumerate basic solutions of the standard-form system.

    Converts the LP to equalities with slack/surplus variables (all variables
    nonnegative after bound shifts must not be needed: callers only build
    default-bound LPs), takes every square column subset, solves, keeps
    feasible points, and maximizes c.x over them.  Returns (status, value):
    'optimal', 'infeasible', or 'unbounded' decided by also probing
    recession directions on the feasible cone.
    """
    n = lp.c.size
    rows = []
    senses = []
    if lp.a_eq is not None:
        for r in range(lp.a_eq.shape[0]):
            rows.append((lp.a_eq[r], lp.b_eq[r]))
            senses.append(0)
    if lp.a_ub is not None:
        for r in range(lp.a_ub.shape[0]):
            rows.append((lp.a_ub[r], lp.b_ub[r]))
            senses.append(1)
    if lp.a_lb is not None:
        for r in range(lp.a_lb.shape[0]):
            rows.append((lp.a_lb[r], lp.b_lb[r]))
            senses.append(-1)
    m = len(rows)
    n_slack = sum(1 for s in senses if s != 0)
    A = np.zeros((m, n + n_slack))
    b = np.zeros(m)
    at = n
    for r, ((coeffs, rhs), sense) in enumerate(zip(rows, senses)):
        A[r, :n] = coeffs
        b[r] = rhs
        if sense != 0:
            A[r, at] = 1.0 if sense == 1 else -1.0
            at += 1
    total = n + n_slack
    c_full = np.concatenate([lp.c, np.zeros(n_slack)])

    best = None
    feasible = False
    for cols in combinations(range(total), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        xb = np.linalg.solve(B, b)
        if (xb < -1e-9).any():
            continue
        x = np.zeros(total)
        x[list(cols)] = xb
        feasible = True
        val = float(c_full @ x)
        if best is None or val > best:
            best = val
    if not feasible:
        return "infeasible", None
    # unboundedness: a recession direction d >= 0 with A d = 0 and c.d > 0.
    # probe via the nullspace restricted to nonnegative directions (small
    # sizes only: check extreme rays through column subsets of size m+1)
    for cols in combinations(range(total), m + 1):
        sub = A[:, cols]
        ns = _nullspace(sub)
        for d in ns.T:
            for sgn in (1.0, -1.0):
                v = sgn * d
                if (v >= -1e-9).all() and float(c_full[list(cols)] @ v) > 1e-7:
                    return "unbounded", None
    return "optimal", best


def _nullspace(a, tol=1e-10):
    _, s, vt = np.linalg.svd(a)
    rank = int((s > tol).sum()) if s.size else 0
    return vt[rank:].T


class TestReferenceProblems:
    def test_bounded_optimum(self):
        lp = LinearProgram(c=[3, 2], a_ub=[[1, 1], [1, 0]], b_ub=[4, 2])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert sol.objective_value == pytest.approx(10.0)
        assert sol.x == pytest.approx([2.0, 2.0])

    def test_equality_constrained(self):
        lp = LinearProgram(c=[1, 1], a_eq=[[1, 1]], b_eq=[1])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert sol.objective_value == pytest.approx(1.0)

    def test_infeasible(self):
        lp = LinearProgram(c=[1], a_ub=[[1]], b_ub=[-1])
        assert solve(lp).status == "infeasible"

    def test_infeasible_conflicting_rows(self):
        lp = LinearProgram(c=[1, 0], a_ub=[[1, 0]], b_ub=[1],
                           a_lb=[[1, 0]], b_lb=[2])
        assert solve(lp).status == "infeasible"

    def test_unbounded(self):
        lp = LinearProgram(c=[1])
        assert solve(lp).status == "unbounded"

    def test_unbounded_with_constraint(self):
        lp = LinearProgram(c=[1, 0], a_ub=[[0, 1]], b_ub=[5])
        assert solve(lp).status == "unbounded"

    def test_degenerate_vertex(self):
        # three constraints meet at (1, 1)
        lp = LinearProgram(c=[1, 1],
                           a_ub=[[1, 0], [0, 1], [1, 1]], b_ub=[1, 1, 2])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert sol.objective_value == pytest.approx(2.0)

    def test_redundant_equalities(self):
        lp = LinearProgram(c=[2, 1], a_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert sol.objective_value == pytest.approx(2.0)


class TestBounds:
    def test_finite_box(self):
        lp = LinearProgram(c=[-1, 2], lower=[-5, -np.inf], upper=[5, 3])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert sol.x == pytest.approx([-5.0, 3.0])
        assert sol.objective_value == pytest.approx(11.0)

    def test_free_variable(self):
        lp = LinearProgram(c=[-1], a_lb=[[1]], b_lb=[-7],
                           lower=[-np.inf])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(-7.0)

    def test_crossed_bounds_infeasible(self):
        lp = LinearProgram(c=[1], lower=[2], upper=[1])
        assert solve(lp).status == "infeasible"

    def test_fixed_variable(self):
        lp = LinearProgram(c=[1, 1], lower=[2, 0], upper=[2, 1])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert sol.objective_value == pytest.approx(3.0)


class TestOracleAgreement:
    def test_100_random_small_lps(self):
        rng = np.random.default_rng(17)
        checked = 0
        trials = 0
        while checked < 100:
            trials += 1
            n = int(rng.integers(1, 4))
            m_ub = int(rng.integers(0, 3))
            m_lb = int(rng.integers(0, 2))
            m_eq = int(rng.integers(0, 2))
            kwargs = {"c": rng.normal(0, 2, n)}
            if m_ub:
                kwargs["a_ub"] = rng.normal(0, 1, (m_ub, n))
                kwargs["b_ub"] = rng.normal(1, 2, m_ub)
            if m_lb:
                kwargs["a_lb"] = rng.normal(0, 1, (m_lb, n))
                kwargs["b_lb"] = rng.normal(-1, 2, m_lb)
            if m_eq:
                kwargs["a_eq"] = rng.normal(0, 1, (m_eq, n))
                kwargs["b_eq"] = rng.normal(0, 1, m_eq)
            lp = LinearProgram(**kwargs)
            ref_status, ref_val = vertex_enumeration_optimum(lp)
            sol = solve(lp)
            assert sol.status == ref_status, (
                f"trial {trials}: solver {sol.status} vs oracle {ref_status}"
            )
            if ref_status == "optimal":
                assert sol.objective_value == pytest.approx(ref_val, abs=1e-7)
                # returned point satisfies its own constraints
                x = sol.x
                if lp.a_ub is not None:
                    assert (lp.a_ub @ x - lp.b_ub <= 1e-8).all()
                if lp.a_lb is not None:
                    assert (lp.b_lb - lp.a_lb @ x <= 1e-8).all()
                if lp.a_eq is not None:
                    assert np.abs(lp.a_eq @ x - lp.b_eq).max() <= 1e-8
                assert (x >= -1e-9).all()
            checked += 1


class TestValidation:
    def test_mismatched_pair(self):
        with pytest.raises(ValueError):
            LinearProgram(c=[1], a_ub=[[1]])

    def test_wrong_width(self):
        with pytest.raises(ValueError):
            LinearProgram(c=[1, 2], a_ub=[[1]], b_ub=[1])

    def test_wrong_rhs_length(self):
        with pytest.raises(ValueError):
            LinearProgram(c=[1], a_ub=[[1]], b_ub=[1, 2])

    def test_bad_bound_length(self):
        with pytest.raises(ValueError):
            LinearProgram(c=[1, 2], lower=[0])
