"""Dense two-phase revised primal simplex with anti-cycling pivoting.

Small-scale by design: the CMDP occupancy LP tops out around a thousand
variables and a couple of hundred rows, so the basis is refactorized from
the original data at every iteration and there is no drifting tableau to
maintain.  Basis solves are sharpened by extended-precision iterative
refinement, which keeps pivot decisions honest even when the basis is badly
conditioned (occupancy LPs routinely produce dual values around 1e8).
Entering variables are chosen by largest reduced cost with lowest-index
tie-breaks; when the objective stalls on degenerate pivots the rule falls
back to Bland's (lowest improving index).  Optimality is only declared
after a final extended-precision pricing pass certifies every reduced
cost.  A vertex solution is returned, which keeps the extracted pricing
policy close to deterministic per state.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

_TOL = 1e-9
_STALL_LIMIT = 40  # degenerate pivots before switching to Bland's rule


@dataclass
class LinearProgram:
    """max c.x subject to equality / <= / >= rows and variable bounds."""

    c: np.ndarray
    a_eq: np.ndarray = None
    b_eq: np.ndarray = None
    a_ub: np.ndarray = None
    b_ub: np.ndarray = None
    a_lb: np.ndarray = None
    b_lb: np.ndarray = None
    lower: np.ndarray = None  # default 0
    upper: np.ndarray = None  # default +inf

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        for name in ("a_eq", "a_ub", "a_lb"):
            a = getattr(self, name)
            if a is not None:
                a = np.atleast_2d(np.asarray(a, dtype=float))
                if a.shape[1] != n:
                    raise ValueError(f"{name} has {a.shape[1]} columns, expected {n}")
                setattr(self, name, a)
        for aname, bname in (("a_eq", "b_eq"), ("a_ub", "b_ub"), ("a_lb", "b_lb")):
            a, b = getattr(self, aname), getattr(self, bname)
            if (a is None) != (b is None):
                raise ValueError(f"{aname} and {bname} must be given together")
            if b is not None:
                b = np.atleast_1d(np.asarray(b, dtype=float))
                if b.size != a.shape[0]:
                    raise ValueError(f"{bname} length mismatch")
                setattr(self, bname, b)
        self.lower = (np.zeros(n) if self.lower is None
                      else np.asarray(self.lower, dtype=float))
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.asarray(self.upper, dtype=float))
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound vectors must match the variable count")


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray = None
    objective_value: float = None


_PIV_TOL = 1e-7  # smallest column entry accepted as a pivot element
_REFINE_STEPS = 1  # extended-precision refinement passes per basis solve

_trace = None  # optional diagnostics hook: called as _trace(event, **info)


def _refined_solve(lu, basis_ld, rhs_ld, trans=0):
    """Solve B x = rhs (or B.T x = rhs) with iterative refinement.

    The factorization is double precision; residuals are accumulated in
    extended precision, so the result stays accurate to far below the
    pivoting tolerances even when B is badly conditioned.
    """
    x = lu_solve(lu, np.asarray(rhs_ld, dtype=float), trans=trans,
                 check_finite=False)
    x = x.astype(np.longdouble)
    for _ in range(_REFINE_STEPS):
        if trans == 0:
            r = rhs_ld - basis_ld @ x
        else:
            r = rhs_ld - basis_ld.T @ x
        x = x + lu_solve(lu, np.asarray(r, dtype=float), trans=trans,
                         check_finite=False)
    return x


def _run_simplex(A, b, c, basis, n_enter=None):
    """Maximize c.x over {A x = b, x >= 0} from a starting basis.

    ``basis`` must index m linearly independent columns whose basic solution
    is feasible (phase 1 arranges this).  Columns at index >= ``n_enter``
    (phase-1 artificials) may leave the basis but never enter it.  Returns
    (status, x) with status 'optimal' or 'unbounded'.

    Revised simplex: the basis is refactorized from the original data at
    every iteration and the basic solution, duals, and pivot column are
    solved with extended-precision refinement, so no update drift can
    accumulate.  Pricing runs in extended precision with a per-column noise
    floor on the reduced costs, so huge duals cannot fake or mask an
    improving column and the returned optimum is certified as priced.
    """
    m, n = A.shape
    if n_enter is None:
        n_enter = n
    if m == 0:
        if np.max(c[:n_enter], initial=-np.inf) > _TOL:
            return "unbounded", None
        return "optimal", np.zeros(n)

    A_ld = np.asarray(A, dtype=np.longdouble)
    b_ld = np.asarray(b, dtype=np.longdouble)
    c_ld = np.asarray(c, dtype=np.longdouble)
    abs_A = np.abs(A)
    eps_ld = float(np.finfo(np.longdouble).eps)
    eps_f = float(np.finfo(float).eps)
    in_basis = np.zeros(n, dtype=bool)
    in_basis[basis] = True
    stall = 0
    obj = -np.inf
    # Devex reference weights: pricing picks the candidate with the best
    # reduced-cost-per-step ratio red^2 / w instead of the raw largest
    # reduced cost, which avoids the long degenerate walks Dantzig's rule
    # takes on occupancy LPs.  The weights are heuristic only - they steer
    # column choice, never the optimality decision.
    devex = np.ones(n)

    while True:
        basis_arr = np.asarray(basis)
        B = A[:, basis_arr]
        try:
            lu = lu_factor(B, check_finite=False)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise RuntimeError("simplex basis became singular") from exc
        basis_ld = A_ld[:, basis_arr]
        xb = _refined_solve(lu, basis_ld, b_ld)
        y = _refined_solve(lu, basis_ld, c_ld[basis_arr], trans=1)
        y_f = np.asarray(y, dtype=float)
        abs_yA = np.abs(y_f) @ abs_A
        # Per-column pricing noise floor: a reduced cost is only trusted as
        # improving when it clears the rounding error of the dual product,
        # which grows with the dual magnitudes (around 1e8 on occupancy LPs).
        tol_col = _TOL + 8.0 * eps_ld * abs_yA

        obj_now = float(c_ld[basis_arr] @ xb)
        if obj_now > obj + 1e-9 * (1.0 + abs(obj)):
            stall = 0
        else:
            stall += 1
        obj = obj_now

        # Pricing runs in two tiers.  A double-precision BLAS pass with a
        # rigorous per-column error radius screens the candidates (anything
        # outside the radius is certifiably non-improving); each candidate
        # is then re-priced individually in extended precision until one
        # clears its noise floor.  The full extended-precision pricing pass
        # only runs when the screen floods with near-ties, so the common
        # iteration never pays for an extended-precision matrix product
        # while the stopping decision is still certified column by column.
        redf = c - y_f @ A
        err_f = _TOL + 2.0 * m * eps_f * abs_yA
        col = -1
        cand = np.flatnonzero((redf[:n_enter] > -err_f[:n_enter])
                              & ~in_basis[:n_enter])
        if cand.size <= 200:
            if stall < _STALL_LIMIT:
                score = redf[cand] ** 2 / devex[cand]
                order = cand[np.argsort(-score)]
            else:  # Bland's rule: lowest certified improving index
                order = cand
            for j in order:
                if float(c_ld[j] - y @ A_ld[:, j]) > tol_col[j]:
                    col = int(j)
                    break
        else:
            reduced = np.asarray(c_ld - y @ A_ld, dtype=float)
            eligible = reduced[:n_enter] - tol_col[:n_enter]
            eligible[in_basis[:n_enter]] = -np.inf
            if stall < _STALL_LIMIT:
                ok = eligible > 0.0
                if ok.any():
                    score = np.where(ok, reduced[:n_enter] ** 2
                                     / devex[:n_enter], -np.inf)
                    col = int(np.argmax(score))
                else:
                    col = -1
            else:
                idx = np.flatnonzero(eligible > 0.0)
                col = int(idx[0]) if idx.size else -1
        if col < 0:
            if _trace:
                reduced_ld = np.asarray(c_ld - y @ A_ld, dtype=float)
                elig = reduced_ld[:n_enter] - tol_col[:n_enter]
                elig[in_basis[:n_enter]] = -np.inf
                jmax = int(np.argmax(elig))
                _trace("exit", obj=obj, cand=int(cand.size),
                       max_elig=float(elig[jmax]), jmax=jmax,
                       red=float(reduced_ld[jmax]), tol=float(tol_col[jmax]),
                       abs_yA_max=float(abs_yA.max()),
                       ymax=float(np.abs(y_f).max()))
            x = np.zeros(n)
            x[basis_arr] = np.clip(np.asarray(xb, dtype=float), 0.0, None)
            return "optimal", x

        colvec = np.asarray(_refined_solve(lu, basis_ld, A_ld[:, col]),
                            dtype=float)
        # Every positive entry bounds the step, however small: skipping one
        # would drive its basic variable negative.  _PIV_TOL only steers
        # which of the (near-)tied rows supplies the pivot element.
        pos = colvec > 1e-11 * (1.0 + np.abs(colvec).max(initial=0.0))
        if not pos.any():
            return "unbounded", None
        # Two-pass Harris ratio test.  Pass 1 finds the tightest step bound
        # after granting every row a tiny feasibility slack; pass 2 picks,
        # among all rows whose exact ratio fits inside that relaxed bound,
        # the one with the largest pivot element.  On heavily degenerate
        # bases this trades a bounded (~1e-9) feasibility slip for a well
        # conditioned pivot, where an exact min-ratio rule is forced onto
        # noise-level pivot elements and the basis turns near singular.
        rhs = np.asarray(xb, dtype=float)
        rhs_pos = np.clip(rhs, 0.0, None)
        feas = 1e-9 * (1.0 + rhs_pos.max(initial=0.0))
        # Rows whose column entry is noise-scale cannot usefully bound the
        # step: pivoting on one wrecks the basis, while stepping through one
        # moves its variable by at most entry * step.  When that worst-case
        # slip stays at the feasibility slack the strong rows alone set the
        # bound.
        strong_pos = pos & (colvec > 1e-4 * (1.0 + np.abs(colvec).max()))
        if strong_pos.any() and not strong_pos.all():
            t_strong = np.min((rhs_pos[strong_pos] + feas) / colvec[strong_pos])
            weak_max = colvec[pos & ~strong_pos].max(initial=0.0)
            if t_strong * weak_max <= 16.0 * feas:
                pos = strong_pos
        t_max = np.min((rhs_pos[pos] + feas) / colvec[pos])
        ratios = np.full(m, np.inf)
        ratios[pos] = rhs_pos[pos] / colvec[pos]
        cand = np.flatnonzero(pos & (ratios <= t_max))
        # The entering variable takes the value rhs[row] / colvec[row]; a
        # candidate row whose true rhs is slightly negative (degeneracy
        # noise) must not hand that noise a large magnification through a
        # small pivot element, or feasibility is quietly destroyed.
        safe = cand[rhs[cand] / colvec[cand] >= -feas]
        if safe.size == 0:
            # Every candidate row carries a noise-negative rhs (a fully
            # degenerate corner): take the best-conditioned pivot so the
            # entering variable lands at noise scale instead of having the
            # noise magnified through a tiny pivot element.
            row = int(cand[np.argmax(colvec[cand])])
        else:
            # Never pivot on an element far below the best on offer - a
            # noise-level entry admitted by the step-bound scan would wreck
            # the next basis.
            decent = safe[colvec[safe] >= 1e-2 * colvec[safe].max()]
            if stall < _STALL_LIMIT:
                row = int(decent[np.argmax(colvec[decent])])
            else:
                row = int(decent[np.argmin(basis_arr[decent])])
        # Devex weight update from the pivot row (reference reset on blowup).
        piv = colvec[row]
        z_r = lu_solve(lu, np.eye(m, 1, -row)[:, 0], trans=1,
                       check_finite=False)
        alpha = z_r @ A
        np.maximum(devex, (alpha / piv) ** 2 * devex[col], out=devex)
        devex[basis[row]] = max(devex[col] / piv ** 2, 1.0)
        if devex.max() > 1e10:
            devex[:] = 1.0

        in_basis[basis[row]] = False
        basis[row] = col
        in_basis[col] = True
        if _trace:
            _trace("pivot", obj=obj, stall=stall, col=col, row=row,
                   minxb=float(rhs.min()), feas=feas, t=float(ratios[row]),
                   enter_val=float(rhs[row] / colvec[row]),
                   piv=float(colvec[row]), tmax=float(t_max))


def _dual_cleanup(A, b, c, basis, n_enter):
    """Restore primal feasibility of a dual-feasible basis via dual simplex.

    Used to undo the rhs perturbation: the perturbed-optimal basis prices
    out correctly for any rhs, but its basic solution at the true ``b`` may
    have gone slightly negative.  Dual pivots drive those variables out
    while keeping every reduced cost nonpositive, so the endpoint is the
    true optimum.  Returns the primal solution vector.
    """
    m, n = A.shape
    if m == 0:
        return np.zeros(n)
    A_ld = np.asarray(A, dtype=np.longdouble)
    b_ld = np.asarray(b, dtype=np.longdouble)
    c_ld = np.asarray(c, dtype=np.longdouble)
    in_basis = np.zeros(n, dtype=bool)
    in_basis[basis] = True
    for _ in range(10 * m):
        basis_arr = np.asarray(basis, dtype=int)
        lu = lu_factor(A[:, basis_arr])
        basis_ld = A_ld[:, basis_arr]
        xb = np.asarray(_refined_solve(lu, basis_ld, b_ld), dtype=float)
        scale = 1.0 + np.abs(xb).max(initial=0.0)
        r = int(np.argmin(xb))
        if xb[r] >= -1e-9 * scale:
            break
        y = _refined_solve(lu, basis_ld, c_ld[basis_arr], trans=1)
        reduced = np.asarray(c_ld - y @ A_ld, dtype=float)
        e_r = np.zeros(m)
        e_r[r] = 1.0
        z = _refined_solve(lu, basis_ld, e_r.astype(np.longdouble), trans=1)
        alpha = np.asarray(z @ A_ld, dtype=float)
        cand = np.flatnonzero(
            (~in_basis[:n_enter])
            & (alpha[:n_enter] < -1e-9 * (1.0 + np.abs(alpha).max())))
        if cand.size == 0:
            break  # no dual step available; fall back to clipping
        ratios = reduced[cand] / alpha[cand]
        best = ratios.min()
        ties = cand[ratios <= best + 1e-10 * (1.0 + abs(best))]
        col = int(ties[np.argmax(-alpha[ties])])
        in_basis[basis[r]] = False
        basis[r] = col
        in_basis[col] = True
    basis_arr = np.asarray(basis, dtype=int)
    lu = lu_factor(A[:, basis_arr])
    xb = _refined_solve(lu, A_ld[:, basis_arr], b_ld)
    x = np.zeros(n)
    x[basis_arr] = np.clip(np.asarray(xb, dtype=float), 0.0, None)
    return x


def solve(lp: LinearProgram) -> LpSolution:
    """Two-phase simplex.  Infeasible/unbounded are reported via status."""
    n = lp.c.size

    # Substitute out the bounds so every internal variable is >= 0:
    # finite lower l: x = l + y; lower -inf with finite upper u: x = u - y;
    # free: x = y+ - y-.  Finite (l, u) additionally emits a row y <= u - l.
    col_map = []  # per original var: (kind, data)
    n_y = 0
    extra_ub = []  # (y_col, bound)
    for j in range(n):
        lo, up = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            col_map.append(("shift", n_y, lo, 1.0))
            if np.isfinite(up):
                if up < lo:
                    return LpSolution(status="infeasible")
                extra_ub.append((n_y, up - lo))
            n_y += 1
        elif np.isfinite(up):
            col_map.append(("shift", n_y, up, -1.0))
            n_y += 1
        else:
            col_map.append(("free", n_y, 0.0, 1.0))
            n_y += 2

    def expand(a_row):
        out = np.zeros(n_y)
        shift = 0.0
        for j, (kind, col, off, sign) in enumerate(col_map):
            if kind == "shift":
                out[col] = sign * a_row[j]
                shift += a_row[j] * off
            else:
                out[col] = a_row[j]
                out[col + 1] = -a_row[j]
        return out, shift

    rows = []  # (coeffs in y, rhs, sense)
    for a, b, sense in ((lp.a_eq, lp.b_eq, 0), (lp.a_ub, lp.b_ub, 1),
                        (lp.a_lb, lp.b_lb, -1)):
        if a is None:
            continue
        for r in range(a.shape[0]):
            coeffs, shift = expand(a[r])
            rows.append((coeffs, b[r] - shift, sense))
    for col, bound in extra_ub:
        coeffs = np.zeros(n_y)
        coeffs[col] = 1.0
        rows.append((coeffs, bound, 1))

    c_y, c_shift = expand(lp.c)

    # Orthonormalize the equality block.  Row operations keep the feasible
    # set unchanged while giving the block unit-norm, mutually orthogonal
    # rows, so later basis matrices stay well conditioned even when the
    # original equalities are nearly dependent.  Numerically dependent rows
    # are dropped after checking their right-hand sides for consistency.
    eq = [(coeffs, rhs) for coeffs, rhs, s in rows if s == 0]
    if eq:
        E = np.vstack([coeffs for coeffs, _ in eq])
        be = np.array([rhs for _, rhs in eq])
        u, sv, vt = np.linalg.svd(E, full_matrices=False)
        cutoff = max(E.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
        rank = int((sv > cutoff).sum())
        proj = u[:, :rank] @ (u[:, :rank].T @ be)
        scale = max(1.0, float(np.abs(be).max(initial=0.0)))
        if np.abs(be - proj).max(initial=0.0) > 1e-7 * scale:
            return LpSolution(status="infeasible")
        new_rhs = (u[:, :rank].T @ be) / sv[:rank]
        rows = [(vt[i], float(new_rhs[i]), 0) for i in range(rank)] + \
               [(coeffs, rhs, s) for coeffs, rhs, s in rows if s != 0]

    m = len(rows)
    n_slack = sum(1 for _, _, s in rows if s != 0)
    n_cols = n_y + n_slack
    A = np.zeros((m, n_cols))
    b = np.zeros(m)
    slack_at = n_y
    for r, (coeffs, rhs, sense) in enumerate(rows):
        A[r, :n_y] = coeffs
        b[r] = rhs
        if sense != 0:
            A[r, slack_at] = 1.0 if sense == 1 else -1.0
            slack_at += 1
        if b[r] < 0:
            A[r] = -A[r]
            b[r] = -b[r]

    # Degeneracy-breaking rhs perturbation.  Occupancy-measure LPs sit on
    # vertices where most basic variables are exactly zero, which makes the
    # ratio test a minefield of ties, zero steps, and noise-level pivots.
    # A tiny positive random perturbation of b gives every vertex strictly
    # positive basic values, so min-ratio rows are essentially unique and
    # the walk cannot cycle or drift infeasible.  Pricing never involves b,
    # so the final perturbed-optimal basis is dual feasible for the true
    # problem as well; the true solution is recovered from that basis with
    # the unperturbed right-hand side at the end.
    # Perturbing b along the column space (b + A w, w >= 0) keeps every
    # feasible problem feasible: if A x = b has a nonnegative solution x,
    # then x + w solves the perturbed system.  A raw random perturbation
    # would instead step off the occupancy polytope's affine hull.
    rng = np.random.default_rng(181093)
    w = 1e-7 * (1.0 + np.abs(b).max(initial=0.0)) * rng.uniform(
        0.5, 1.5, size=n_cols)
    b1 = b + A @ w
    flip = b1 < 0
    A[flip] *= -1.0
    b1[flip] = -b1[flip]
    b = b.copy()
    b[flip] *= -1.0

    # Phase 1: artificial variable per row, drive their sum to zero.
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.zeros(n_cols + m)
    c1[n_cols:] = -1.0
    basis = list(range(n_cols, n_cols + m))
    status, x1 = _run_simplex(A1, b1, c1, basis, n_enter=n_cols)
    shortfall = float(c1 @ x1) if status == "optimal" else -np.inf
    if shortfall < -1e-7:
        if shortfall > -(1e-4 * (1.0 + np.abs(b).max(initial=0.0))):
            # Small shortfall could be an artifact of the perturbation:
            # re-judge phase 1 against the true right-hand side.
            status, x1 = _run_simplex(A1, b, c1, basis, n_enter=n_cols)
            if status != "optimal" or float(c1 @ x1) < -1e-7:
                return LpSolution(status="infeasible")
            b1 = b  # continue unperturbed from this feasible basis
        else:
            return LpSolution(status="infeasible")

    # Drive leftover zero-level artificials out of the basis via
    # degenerate swaps.  An artificial whose tableau row has no real
    # nonzero entry sits in a redundant row; it stays basic at zero and
    # is inert from here on because artificials are barred from entering
    # in phase 2.
    pending = [i for i, bv in enumerate(basis) if bv >= n_cols]
    while pending:
        tab = np.linalg.solve(A1[:, basis], A1[:, :n_cols])
        in_basis = set(basis)
        swapped = False
        for i in pending:
            for j in np.flatnonzero(np.abs(tab[i]) > 1e-9):
                if j not in in_basis:
                    basis[i] = int(j)
                    swapped = True
                    break
            if swapped:
                break
        if not swapped:
            break
        pending = [i for i, bv in enumerate(basis) if bv >= n_cols]

    # Artificial columns stay as inert basic placeholders for redundant
    # rows during phase 2.
    c2 = np.zeros(n_cols + m)
    c2[:n_y] = c_y

    # Phase 2 on the original objective.
    status, y = _run_simplex(A1, b1, c2, basis, n_enter=n_cols)
    if status == "unbounded":
        return LpSolution(status="unbounded")

    # Undo the perturbation: the final basis is dual feasible for any rhs,
    # so dual simplex pivots against the true b land on the true optimum.
    if b1 is not b:
        y = _dual_cleanup(A1, b, c2, basis, n_enter=n_cols)

    x = np.zeros(n)
    for j, (kind, col, off, sign) in enumerate(col_map):
        if kind == "shift":
            x[j] = off + sign * y[col]
        else:
            x[j] = y[col] - y[col + 1]
    return LpSolution(status="optimal", x=x,
                      objective_value=float(lp.c @ x))
