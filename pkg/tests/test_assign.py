import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tracklet_reid import _pykernels, kernels
from tracklet_reid.assign import AssignmentInputError, solve_greedy, solve_optimal


def brute_force(cost, threshold=math.inf):
    """(cardinality, total) of the best feasible matching by exhaustive search."""
    cost = np.asarray(cost, dtype=float)
    r, c = cost.shape
    best = (0, 0.0)
    rows = list(range(r))
    for k in range(min(r, c), 0, -1):
        totals = []
        for rs in itertools.combinations(rows, k):
            for cs in itertools.permutations(range(c), k):
                vals = [cost[i, j] for i, j in zip(rs, cs)]
                if all(v < threshold for v in vals):
                    totals.append(sum(vals))
        if totals:
            return (k, min(totals))
    return best


def check_partition(res, r, c):
    rows = [m[0] for m in res.matches] + res.unmatched_rows
    cols = [m[1] for m in res.matches] + res.unmatched_columns
    assert sorted(rows) == list(range(r))
    assert sorted(cols) == list(range(c))


def test_two_by_two():
    res = solve_optimal([[1, 2], [2, 1]])
    assert res.matches == [(0, 0), (1, 1)]
    assert res.total_cost([[1, 2], [2, 1]]) == 2


def test_three_by_three():
    cost = [[4, 1, 3], [2, 0, 5], [3, 2, 2]]
    res = solve_optimal(cost)
    assert res.matches == [(0, 1), (1, 0), (2, 2)]
    assert res.total_cost(cost) == 5


def test_empty():
    res = solve_optimal(np.zeros((0, 0)))
    assert res.matches == [] and res.unmatched_rows == [] and res.unmatched_columns == []
    res = solve_optimal(np.zeros((0, 3)))
    assert res.unmatched_columns == [0, 1, 2]


def test_non_finite_rejected():
    with pytest.raises(AssignmentInputError):
        solve_optimal([[1.0, math.nan]])
    with pytest.raises(AssignmentInputError):
        solve_greedy([[math.inf]])


def test_threshold_excludes_entries():
    res = solve_optimal([[0.4, 0.1]], infeasible_above=0.3)
    assert res.matches == [(0, 1)]
    res = solve_optimal([[0.5, 0.6], [0.7, 0.1]], infeasible_above=0.3)
    assert res.matches == [(1, 1)]
    assert res.unmatched_rows == [0] and res.unmatched_columns == [0]


def test_maximum_cardinality_before_cost():
    # matching both rows (total 1.2) beats the cheaper single pair (0.1)
    res = solve_optimal([[0.1, 0.6], [0.6, 0.9]], infeasible_above=0.7)
    assert res.matches == [(0, 1), (1, 0)]


def test_greedy_examples():
    assert solve_greedy([[1, 2], [2, 1]]).total_cost([[1, 2], [2, 1]]) == 2
    g = solve_greedy([[1, 1], [1, 5]])
    assert g.matches == [(0, 0), (1, 1)] and g.total_cost([[1, 1], [1, 5]]) == 6
    o = solve_optimal([[1, 1], [1, 5]])
    assert o.matches == [(0, 1), (1, 0)] and o.total_cost([[1, 1], [1, 5]]) == 2
    assert solve_greedy([[0.4, 0.1]], 0.3).matches == [(0, 1)]


def test_greedy_tie_break():
    assert solve_greedy([[1, 1], [1, 1]]).matches == [(0, 0), (1, 1)]


matrices = st.integers(1, 6).flatmap(
    lambda r: st.integers(1, 6).flatmap(
        lambda c: st.lists(st.floats(0, 10, allow_nan=False), min_size=r * c, max_size=r * c).map(
            lambda v: np.array(v).reshape(r, c)
        )
    )
)


@settings(max_examples=150, deadline=None)
@given(matrices, st.sampled_from([math.inf, 2.0, 5.0, 8.0]))
def test_optimal_matches_brute_force(cost, threshold):
    res = solve_optimal(cost, threshold)
    check_partition(res, *cost.shape)
    assert all(cost[r, c] < threshold for r, c in res.matches)
    k, total = brute_force(cost, threshold)
    assert len(res.matches) == k
    assert res.total_cost(cost) == pytest.approx(total, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(matrices, st.sampled_from([math.inf, 3.0]))
def test_greedy_partition_and_feasibility(cost, threshold):
    res = solve_greedy(cost, threshold)
    check_partition(res, *cost.shape)
    assert all(cost[r, c] < threshold for r, c in res.matches)


def test_deterministic(rng):
    cost = rng.uniform(0, 1, size=(7, 5))
    assert solve_optimal(cost, 0.5) == solve_optimal(cost, 0.5)


def test_backends_agree(rng):
    for _ in range(50):
        n = int(rng.integers(1, 12))
        cost = rng.uniform(-5, 5, size=(n, n))
        np.testing.assert_array_equal(_pykernels.solve_square(cost), kernels.solve_square(cost))
        a = np.column_stack([rng.uniform(0, 50, (n, 2)), rng.uniform(1, 20, (n, 2))])
        b = np.column_stack([rng.uniform(0, 50, (n + 1, 2)), rng.uniform(1, 20, (n + 1, 2))])
        np.testing.assert_array_equal(_pykernels.iou_matrix(a, b), kernels.iou_matrix(a, b))


def test_backends_agree_on_ties(rng):
    for _ in range(200):
        n = int(rng.integers(1, 8))
        cost = rng.integers(0, 3, size=(n, n)).astype(float)
        np.testing.assert_array_equal(_pykernels.solve_square(cost), kernels.solve_square(cost))
