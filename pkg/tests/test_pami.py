import numpy as np
import pytest

from oracle import solve_comp_lp
from parsimplex.dual import Options, SolveStatus, solve_serial
from parsimplex.factor import SparseVector
from parsimplex.generate import random_lp
from parsimplex.lp import CompLp
from parsimplex.pami import (Candidate, PamiEngine, PamiMajorState, combined_bfrt_rhs,
                             merge_top, orphan_guard, solve_pami, top_candidates)


def engine(lp, **kw):
    eng = PamiEngine(lp, Options(**kw))
    eng.setup()
    return eng


# ---------------------------------------------------------------- major CHUZR

def test_top_candidates_sort_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        alpha = np.maximum(rng.normal(size=50), 0).round(2)
        s = int(rng.integers(1, 10))
        expected = sorted([(i, a) for i, a in enumerate(alpha) if a > 0], key=lambda c: (-c[1], c[0]))[:s]
        blocks = [top_candidates(alpha[lo:hi], s, lo) for lo, hi in [(0, 13), (13, 31), (31, 50)]]
        assert merge_top(blocks, s) == expected
        assert top_candidates(alpha, s) == expected


def test_major_chuzr_counts():
    lp = random_lp(20, 40, seed=5)
    eng = engine(lp, workers=4)
    alpha = eng.alpha_of(None)
    k = int(np.count_nonzero(alpha > 0))
    assert len(eng.major_chuzr(8)) == min(k, 8)
    assert len(eng.major_chuzr(k + 5)) == k
    eng.pool.close()


def test_major_chuzr_single_row():
    lp = CompLp.from_rows(np.eye(3), [1.0, -np.inf, -np.inf], [np.inf] * 3, [1.0] * 3, [0.0] * 3, [5.0] * 3)
    eng = engine(lp)
    assert [p for p, _ in eng.major_chuzr(8)] == [0]


# ---------------------------------------------------------------- minor iterations

def test_minor_init_identity_rows_and_worker_invariance():
    lp = random_lp(20, 40, seed=6)
    e1, e8 = engine(lp), engine(lp, workers=8)
    chosen = e1.major_chuzr(8)
    s1, s8 = e1.minor_init(chosen), e8.minor_init(chosen)
    for p in s1.candidates:
        row = s1.candidates[p].row.array
        assert np.array_equal(row, np.eye(20)[p])
        assert np.array_equal(row, s8.candidates[p].row.array)
    e8.pool.close()


def state_with(alpha_init, alpha, t=1):
    st = PamiMajorState(s=8)
    st.candidates[3] = Candidate(3, alpha_init, alpha, SparseVector(4), 0.0)
    st.records = [None] * t
    return st


@pytest.mark.parametrize("alpha, kept", [(0.96, True), (0.94, False), (0.0, False)])
def test_minor_chuzr_cutoff(alpha, kept):
    eng = engine(random_lp(4, 8, seed=1), cutoff=0.95)
    st = state_with(1.0, alpha)
    got = eng.minor_chuzr(st)
    assert (got is not None) == kept
    assert (3 in st.candidates) == kept


def test_minor_chuzr_ignores_cutoff_on_first_minor():
    eng = engine(random_lp(4, 8, seed=1), cutoff=0.95)
    assert eng.minor_chuzr(state_with(1.0, 0.5, t=0)) is not None


def test_minor_ratio_test_worker_invariant():
    lp = random_lp(25, 50, seed=7)
    outs = []
    for w in (1, 2, 5):
        eng = engine(lp, workers=w)
        st = eng.minor_init(eng.major_chuzr(8))
        sigma, out, row = eng.minor_ratio_test(eng.minor_chuzr(st))
        outs.append((out.q, out.theta_dual, out.theta_primal, out.flips.tolist(), row))
        eng.pool.close()
    for o in outs[1:]:
        assert o[:4] == outs[0][:4] and np.array_equal(o[4], outs[0][4])


def test_minor_update_rows_match_fresh_btran():
    lp = random_lp(25, 50, seed=8)
    eng = engine(lp)
    A = lp.matrix.toarray()
    st = eng.minor_init(eng.major_chuzr(8))
    done = 0
    while done < 4:
        cand = eng.minor_chuzr(st)
        if cand is None:
            break
        sigma, out, row = eng.minor_ratio_test(cand)
        eng.minor_update(st, cand, sigma, out, row)
        done += 1
        Binv = np.linalg.inv(A[:, eng.basis.basic])
        xn = np.array([0.0 if j in set(eng.basis.basic) else eng.nonbasic_value(j) for j in range(lp.num_cols)])
        x_true = -Binv @ (A @ xn)
        for p, c in st.candidates.items():
            assert np.max(np.abs(c.row.array - Binv[p])) <= 1e-9
            assert abs(np.dot(c.row.array, c.row.array) - np.dot(Binv[p], Binv[p])) <= 1e-10 * max(
                1.0, np.dot(Binv[p], Binv[p]))
            assert abs(c.x - x_true[p]) <= 1e-8 * max(1.0, abs(x_true[p]))
    assert done >= 2


# ---------------------------------------------------------------- combined BFRT and orphan guard

def test_combined_bfrt_none_and_single():
    assert combined_bfrt_rhs([(np.ones(3), np.ones(3), None)]) is None
    a_f = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(combined_bfrt_rhs([(np.ones(3), np.ones(3), a_f)]), a_f)


@pytest.mark.parametrize("flags, s, cap", [
    ([], 8, 8), ([False] * 7, 8, 8), ([False, False, True], 8, 7), ([True], 2, 2),
    ([False] * 6 + [True], 8, 8)])
def test_orphan_guard(flags, s, cap):
    assert orphan_guard(flags, s) == cap


def test_task_counts_in_a_run():
    for seed in range(5):
        eng = PamiEngine(random_lp(30, 60, seed=seed), Options(workers=3))
        eng.run()
        for rec in eng.task_log:
            assert rec["tasks"] == 2 * rec["t"] + int(rec["flips"])


# ---------------------------------------------------------------- whole solves

def test_width_one_replays_serial():
    for seed in range(8):
        lp = random_lp(20, 40, seed=seed)
        assert solve_pami(lp, Options(s=1)).pivot_log == solve_serial(lp).pivot_log


def test_workers_identical_logs():
    lp = random_lp(30, 60, seed=3)
    logs = {w: solve_pami(lp, Options(workers=w)).pivot_log for w in (1, 2, 8)}
    assert logs[1] == logs[2] == logs[8]


@pytest.mark.parametrize("update", ["ft", "pf", "apf"])
def test_pami_matches_oracle(update):
    for seed in range(4):
        lp = random_lp(20, 40, seed=50 + seed)
        _, f = solve_comp_lp(lp)
        sol = solve_pami(lp, Options(update=update))
        assert sol.status == SolveStatus.OPTIMAL
        assert sol.objective == pytest.approx(f, rel=1e-6, abs=1e-6)
        assert sol.major_iterations <= sol.iterations


def test_pami_infeasible():
    lp = CompLp.from_rows(np.array([[1.0, 1.0]]), [5.0], [np.inf], [1.0, 1.0], [0, 0], [1, 1])
    assert solve_pami(lp).status == SolveStatus.DUAL_UNBOUNDED
