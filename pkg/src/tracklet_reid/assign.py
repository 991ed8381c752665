"""Rectangular assignment: optimal (shortest augmenting path) and greedy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class AssignmentInputError(ValueError):
    pass


@dataclass
class AssignmentResult:
    matches: list = field(default_factory=list)
    unmatched_rows: list = field(default_factory=list)
    unmatched_columns: list = field(default_factory=list)

    def total_cost(self, cost) -> float:
        return float(sum(cost[r][c] for r, c in sorted(self.matches)))


def _check(cost) -> np.ndarray:
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        if cost.size == 0:
            return cost.reshape(0, 0)
        raise AssignmentInputError(f"cost must be a 2-D matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise AssignmentInputError("cost matrix contains non-finite entries")
    return cost


def _result(n_rows, n_cols, matches) -> AssignmentResult:
    matches.sort()
    rows = {r for r, _ in matches}
    cols = {c for _, c in matches}
    return AssignmentResult(
        matches=matches,
        unmatched_rows=[r for r in range(n_rows) if r not in rows],
        unmatched_columns=[c for c in range(n_cols) if c not in cols],
    )


def solve_optimal(cost, infeasible_above: float = math.inf) -> AssignmentResult:
    """Maximum-cardinality feasible matching of minimum total cost.

    Entries ``>= infeasible_above`` are never matched. Infeasible entries and
    the square padding share one penalty larger than any feasible total, so
    the square solve first maximizes the number of feasible pairs and then
    minimizes their cost.
    """
    cost = _check(cost)
    n_rows, n_cols = cost.shape
    if n_rows == 0 or n_cols == 0:
        return _result(n_rows, n_cols, [])
    feasible = cost < infeasible_above
    if not feasible.any():
        return _result(n_rows, n_cols, [])
    n = max(n_rows, n_cols)
    lo = float(cost[feasible].min())
    hi = float(cost[feasible].max())
    penalty = (hi - lo) * n + 1.0
    square = np.full((n, n), penalty)
    square[:n_rows, :n_cols] = np.where(feasible, cost - lo, penalty)
    col_of = kernels.solve_square(square)
    matches = [
        (r, int(c))
        for r, c in enumerate(col_of[:n_rows])
        if c < n_cols and feasible[r, c]
    ]
    return _result(n_rows, n_cols, matches)


def solve_greedy(cost, infeasible_above: float = math.inf) -> AssignmentResult:
    """Repeatedly take the smallest feasible entry; ties go to lowest row, then column."""
    cost = _check(cost)
    n_rows, n_cols = cost.shape
    rows, cols = np.nonzero(cost < infeasible_above)
    # lexsort: last key is primary
    order = np.lexsort((cols, rows, cost[rows, cols]))
    used_r, used_c, matches = set(), set(), []
    for k in order:
        r, c = int(rows[k]), int(cols[k])
        if r in used_r or c in used_c:
            continue
        used_r.add(r)
        used_c.add(c)
        matches.append((r, c))
    return _result(n_rows, n_cols, matches)
