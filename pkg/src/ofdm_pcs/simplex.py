"""Dense two-phase simplex for small equality-constrained linear programs.

Solves ``minimize c @ x  subject to  A x = b, x >= 0`` with a plain tableau
and Bland's anti-cycling rule.  Intended for problems with a handful of rows
and at most a few hundred columns; exactness and determinism matter here,
speed does not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9


class SimplexError(RuntimeError):
    pass


class InfeasibleProblem(SimplexError):
    pass


class UnboundedProblem(SimplexError):
    pass


class IterationLimit(SimplexError):
    pass


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    iterations: int


def solve_lp(c, a_eq, b_eq, max_iter: int = 10_000) -> LpResult:
    """Minimize ``c @ x`` over ``a_eq @ x = b_eq, x >= 0``.

    Raises :class:`InfeasibleProblem`, :class:`UnboundedProblem` or
    :class:`IterationLimit`.  Redundant equality rows are detected during
    phase 1 and dropped.
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a_eq, dtype=float)
    b = np.asarray(b_eq, dtype=float)
    if a.ndim != 2:
        raise ValueError("a_eq must be a matrix")
    m, n = a.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")

    a = a.copy()
    b = b.copy()
    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0

    # Phase 1: artificial basis, minimize the sum of artificials.
    tableau = np.hstack([a, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    iters1 = _run_simplex(tableau, basis, cost1, artificial_from=n, max_iter=max_iter)
    phase1_obj = cost1[basis] @ tableau[:, -1]
    if phase1_obj > FEAS_TOL * max(1.0, np.abs(b).sum()):
        raise InfeasibleProblem(f"phase-1 objective {phase1_obj:.3e} > 0: no feasible point")

    tableau, basis = _drop_artificials(tableau, basis, n)

    cost2 = np.concatenate([c, np.zeros(tableau.shape[1] - 1 - n)])
    iters2 = _run_simplex(tableau, basis, cost2, artificial_from=n, max_iter=max_iter)

    x = np.zeros(tableau.shape[1] - 1)
    x[basis] = tableau[:, -1]
    x = x[:n]
    return LpResult(x=x, objective=float(c @ x), iterations=iters1 + iters2)


def _reduced_costs(tableau, basis, cost):
    y = cost[basis] @ tableau[:, :-1]
    return cost[: tableau.shape[1] - 1] - y


def _run_simplex(tableau, basis, cost, artificial_from, max_iter):
    """Iterate pivots in place until optimal; returns the iteration count.

    Bland's rule (lowest eligible index for both entering and leaving
    variables) guarantees termination on degenerate problems.  Artificial
    columns are never re-entered once phase 1 is done; callers pass ``cost``
    with zeros there, and phase 2 runs on a tableau without them.
    """
    m = tableau.shape[0]
    for it in range(max_iter):
        red = _reduced_costs(tableau, basis, cost)
        entering = -1
        for j in range(red.size):
            if red[j] < -PIVOT_TOL and j not in basis:
                entering = j
                break
        if entering < 0:
            return it
        col = tableau[:, entering]
        best_ratio, leaving = None, -1
        for i in range(m):
            if col[i] > PIVOT_TOL:
                ratio = tableau[i, -1] / col[i]
                if (
                    best_ratio is None
                    or ratio < best_ratio - PIVOT_TOL
                    or (abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < basis[leaving])
                ):
                    best_ratio, leaving = ratio, i
        if leaving < 0:
            raise UnboundedProblem(f"column {entering} is unbounded below")
        _pivot(tableau, leaving, entering)
        basis[leaving] = entering
    raise IterationLimit(f"simplex did not converge within {max_iter} pivots")


def _pivot(tableau, row, col):
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and tableau[i, col] != 0.0:
            tableau[i] -= tableau[i, col] * tableau[row]
    # Guard against drift: the RHS stays nonnegative in exact arithmetic.
    np.clip(tableau[:, -1], 0.0, None, out=tableau[:, -1])


def _drop_artificials(tableau, basis, n):
    """Pivot zero-level artificials out of the basis, dropping redundant rows."""
    keep_rows = []
    for i in range(tableau.shape[0]):
        if basis[i] < n:
            keep_rows.append(i)
            continue
        pivot_col = -1
        for j in range(n):
            if j not in basis and abs(tableau[i, j]) > PIVOT_TOL:
                pivot_col = j
                break
        if pivot_col >= 0:
            _pivot(tableau, i, pivot_col)
            basis[i] = pivot_col
            keep_rows.append(i)
        # else: the row is redundant (all-zero over structural columns).
    tableau = np.hstack([tableau[keep_rows, :n], tableau[keep_rows, -1:]])
    basis = [basis[i] for i in keep_rows]
    return tableau, basis
