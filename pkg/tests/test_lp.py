import math

import numpy as np
import pytest

from parsimplex.errors import NonPositiveWeight
from parsimplex.lp import (Basis, CompLp, Status, attractiveness, compute_objective, dual_infeasibilities,
                           is_dual_feasible, primal_infeasibilities, primal_infeasibility)

INF = math.inf


@pytest.mark.parametrize("x, lo, up, expected", [(5, 0, 4, 1), (2, 0, 4, 0), (-3, -1, INF, 2)])
def test_primal_infeasibility(x, lo, up, expected):
    assert primal_infeasibility(x, lo, up) == expected


def test_primal_infeasibilities_vectorised():
    out = primal_infeasibilities([5, 2, -3], np.array([0, 0, -1.0]), np.array([4, 4, INF]))
    assert out.tolist() == [1, 0, 2]


@pytest.mark.parametrize("status, c_hat, expected", [
    (Status.AT_LOWER, 0.3, True), (Status.AT_UPPER, 0.3, False), (Status.FIXED, -9, True),
    (Status.FREE, 1e-9, True), (Status.FREE, -1e-3, False), (Status.AT_LOWER, -1e-3, False)])
def test_is_dual_feasible(status, c_hat, expected):
    assert is_dual_feasible(status, c_hat, 1e-7) is expected


def test_dual_infeasibilities_match_scalar_rule():
    rng = np.random.default_rng(3)
    st = rng.choice([Status.AT_LOWER, Status.AT_UPPER, Status.FIXED, Status.FREE], 200).astype(np.int8)
    c = rng.normal(size=200)
    viol = dual_infeasibilities(st, c)
    for s, cj, v in zip(st, c, viol):
        assert (v <= 1e-7) == is_dual_feasible(s, cj, 1e-7)


@pytest.mark.parametrize("dx, w, expected", [(2, 4, 0.5), (0, 7, 0), (1, 1, 1)])
def test_attractiveness(dx, w, expected):
    assert attractiveness(dx, w) == expected


def test_attractiveness_rejects_nonpositive_weight():
    with pytest.raises(NonPositiveWeight):
        attractiveness(1.0, 0.0)


def one_by_two():
    # min -x1 subject to x1 + s = 2 wait-free form: x1 <= 2 gives s in [-2, inf)
    return CompLp.from_rows(np.array([[1.0]]), [-INF], [2.0], [-1.0], [0.0], [2.0])


def test_compute_objective_hand_example():
    lp = one_by_two()
    basis = Basis([0], [Status.BASIC, Status.AT_LOWER])
    assert compute_objective(lp, basis, [2.0]) == -2.0


def test_compute_objective_zero_costs():
    lp = CompLp.from_rows(np.ones((2, 3)), [-INF] * 2, [1.0] * 2, [0.0] * 3, [1.0, 2.0, 3.0], [5.0] * 3)
    basis = Basis.logical(lp)
    assert compute_objective(lp, basis, [0.0, 0.0]) == 0.0


def test_compute_objective_logical_basis_sums_lower_bounds():
    lp = CompLp.from_rows(np.ones((2, 3)), [-INF] * 2, [10.0] * 2, [2.0, -1.0, 4.0], [1.0, 0.0, -2.0], [5.0] * 3)
    basis = Basis.logical(lp)
    assert compute_objective(lp, basis, [-1.0, -1.0]) == 2.0 * 1 + 4.0 * -2


def test_from_rows_logical_convention():
    lp = CompLp.from_rows(np.array([[1.0, 1.0]]), [-INF], [3.0], [0, 0], [0, 0], [INF, INF])
    assert lp.matrix.toarray().tolist() == [[1, 1, 1]]
    assert (lp.lower[2], lp.upper[2]) == (-3.0, INF)
    lp.check()


def test_basis_validate_rejects_bad_status():
    lp = one_by_two()
    Basis.logical(lp).validate(lp)
    with pytest.raises(ValueError):
        Basis([1], [Status.FREE, Status.BASIC]).validate(lp)
