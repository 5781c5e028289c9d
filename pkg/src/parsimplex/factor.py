"""Sparse LU factorization of the basis matrix and its update schemes.

``B`` is factored as ``L U`` under row/column permutations by a Markowitz
threshold-pivoting INVERT. Solves with ``B`` (FTRAN) and ``B^T`` (BTRAN)
choose between a graph-based hyper-sparse triangular solve and a plain
sweep. After a basis change the representation is updated with one of

* PF  -- ``B'^-1 = E^-1 B^-1`` with ``E = I + (a_hat_q - e_p) e_p^T``,
* APF -- ``B'^-1 = B^-1 T^-1`` with ``T = I + (a_q - a_p') e_hat_p^T``,
* FT  -- column ``p`` of ``U`` is replaced by the spike ``L^-1 a_q`` and the
  offending row eliminated with a row eta appended to ``L``.

Basis positions index the columns of ``B`` (and FTRAN results); constraint
rows index BTRAN results. Mutations must not overlap solves; concurrent
solves on a frozen factor are safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FtFailure, SingularBasis, StaleFactors, TinyPivot

HYPER_SWITCH = 0.10
REFACTOR_LIMIT = 100
PIVOT_THRESHOLD = 0.1
SEARCH_LIMIT = 4
FT_GROWTH_LIMIT = 1e8
DROP = 1e-14


class SparseVector:
    """Dense value array with the list of (possibly) nonzero positions."""

    __slots__ = ("array", "index")

    def __init__(self, size: int, index=None, array=None):
        self.array = np.zeros(size) if array is None else array
        self.index = np.zeros(0, dtype=np.int64) if index is None else np.asarray(index, dtype=np.int64)

    @classmethod
    def from_dense(cls, values, zero_drop: float = 0.0) -> "SparseVector":
        arr = np.array(values, dtype=float)
        mask = np.abs(arr) > zero_drop
        arr[~mask] = 0.0
        return cls(len(arr), np.flatnonzero(mask), arr)

    @classmethod
    def unit(cls, size: int, i: int, value: float = 1.0) -> "SparseVector":
        v = cls(size)
        v.array[i] = value
        v.index = np.array([i], dtype=np.int64)
        return v

    @classmethod
    def from_pairs(cls, size: int, index, values) -> "SparseVector":
        v = cls(size)
        index = np.asarray(index, dtype=np.int64)
        np.add.at(v.array, index, np.asarray(values, dtype=float))
        v.index = np.flatnonzero(v.array)
        return v

    @property
    def size(self) -> int:
        return len(self.array)

    @property
    def count(self) -> int:
        return len(self.index)

    @property
    def density(self) -> float:
        return self.count / self.size if self.size else 0.0

    def values(self) -> np.ndarray:
        return self.array[self.index]

    def copy(self) -> "SparseVector":
        return SparseVector(self.size, self.index.copy(), self.array.copy())

    def tidy(self, zero_drop: float = DROP) -> "SparseVector":
        small = np.abs(self.array) <= zero_drop
        self.array[small] = 0.0
        self.index = np.flatnonzero(self.array)
        return self

    def dot(self, other: np.ndarray) -> float:
        return float(np.dot(self.array[self.index], other[self.index]))

    def __repr__(self):
        return f"SparseVector(size={self.size}, nnz={self.count})"


def result_density(v: SparseVector) -> float:
    return v.density


def is_hyper_sparse_result(v: SparseVector, threshold: float = HYPER_SWITCH) -> bool:
    return v.density < threshold


@dataclass
class PfEta:
    p: int
    index: list
    value: list
    pivot: float


@dataclass
class ApfEta:
    e_index: list
    e_value: list
    d_index: list
    d_value: list
    denom: float


@dataclass
class RowEta:
    row: int
    index: list
    value: list


class BasisFactor:
    """LU factors of ``B`` together with the update log since the last INVERT."""

    def __init__(self, m: int, refactor_limit: int = REFACTOR_LIMIT, hyper_switch: float = HYPER_SWITCH,
                 pivot_threshold: float = PIVOT_THRESHOLD, zero_drop: float = DROP, pivot_tol: float = 1e-9):
        self.m = m
        self.refactor_limit = refactor_limit
        self.hyper_switch = hyper_switch
        self.pivot_threshold = pivot_threshold
        self.zero_drop = zero_drop
        self.pivot_tol = pivot_tol
        self.result_counts = {"ftran": [0, 0], "btran": [0, 0]}  # [results, hyper-sparse results]
        self._avg_density = {"ftran": 0.0, "btran": 0.0}
        self._reset_identity()

    # ------------------------------------------------------------------ INVERT

    def _reset_identity(self):
        m = self.m
        self.l_etas: list[tuple[int, list, list]] = []
        self.l_col: dict[int, tuple[list, list]] = {}
        self.l_row: dict[int, list] = {}
        self.r_etas: list[RowEta] = []
        self.ucol: list[dict] = [dict() for _ in range(m)]
        self.urow: list[dict] = [dict() for _ in range(m)]
        self.udiag = [1.0] * m
        self.prow = list(range(m))
        self.pcol = list(range(m))
        self.order = list(range(m))
        self.pf_etas: list[PfEta] = []
        self.apf_etas: list[ApfEta] = []
        self.fill_count = 0
        self._ft_count = 0

    @property
    def update_count(self) -> int:
        return len(self.pf_etas) + len(self.apf_etas) + self._ft_count

    def invert(self, columns) -> None:
        """Factor the basis whose position ``c`` holds ``columns[c] = (rows, values)``.

        Raises :class:`SingularBasis` listing unpivoted positions and rows.
        """
        m = self.m
        if len(columns) != m:
            raise ValueError("basis must have m columns")
        self._reset_identity()
        cols: list[dict] = []
        rows: list[dict] = [dict() for _ in range(m)]
        orig_nnz = 0
        for c, (idx, val) in enumerate(columns):
            d = {}
            for r, v in zip(np.asarray(idx).tolist(), np.asarray(val, dtype=float).tolist()):
                if v != 0.0:
                    d[r] = d.get(r, 0.0) + v
            cols.append(d)
            for r, v in d.items():
                rows[r][c] = v
            orig_nnz += len(d)

        # count buckets (dicts used as insertion-ordered sets)
        cbucket = [dict() for _ in range(m + 2)]
        rbucket = [dict() for _ in range(m + 2)]
        ccount = [len(d) for d in cols]
        rcount = [len(d) for d in rows]
        for c in range(m):
            cbucket[ccount[c]][c] = None
        for r in range(m):
            rbucket[rcount[r]][r] = None
        col_active = [True] * m
        row_active = [True] * m

        def set_ccount(c, new):
            del cbucket[ccount[c]][c]
            ccount[c] = new
            cbucket[new][c] = None

        def set_rcount(r, new):
            del rbucket[rcount[r]][r]
            rcount[r] = new
            rbucket[new][r] = None

        l_etas = []
        order = []
        singular_cols = []
        udiag = [0.0] * m
        prow = [-1] * m
        pcol = [-1] * m
        ucol = self.ucol
        urow = self.urow
        thresh = self.pivot_threshold
        tiny = 1e-11

        for _ in range(m):
            # empty columns are dependent
            while cbucket[0]:
                c = next(iter(cbucket[0]))
                del cbucket[0][c]
                col_active[c] = False
                singular_cols.append(c)
            best = None
            best_cost = math.inf
            searched = 0
            for cnt in range(1, m + 1):
                for c in cbucket[cnt]:
                    col = cols[c]
                    cmax = max(abs(v) for v in col.values())
                    for r, v in col.items():
                        if abs(v) >= thresh * cmax:
                            cost = (cnt - 1) * (rcount[r] - 1)
                            if cost < best_cost or (cost == best_cost and abs(v) > abs(best[2])):
                                best, best_cost = (r, c, v), cost
                    searched += 1
                    if best is not None and (best_cost <= (cnt - 1) ** 2 or searched >= SEARCH_LIMIT):
                        break
                if best is not None and (best_cost <= (cnt - 1) ** 2 or searched >= SEARCH_LIMIT):
                    break
                for r in rbucket[cnt]:
                    for c, v in rows[r].items():
                        col = cols[c]
                        cmax = max(abs(x) for x in col.values())
                        if abs(v) >= thresh * cmax:
                            cost = (cnt - 1) * (ccount[c] - 1)
                            if cost < best_cost or (cost == best_cost and abs(v) > abs(best[2])):
                                best, best_cost = (r, c, v), cost
                    searched += 1
                    if best is not None and (best_cost <= cnt * (cnt - 1) or searched >= SEARCH_LIMIT):
                        break
                if best is not None and (best_cost <= cnt * (cnt - 1) or searched >= SEARCH_LIMIT):
                    break
            if best is None:
                break
            r, c, piv = best
            order.append(c)
            udiag[c] = piv
            prow[c] = r
            pcol[r] = c
            col_active[c] = False
            row_active[r] = False
            # U row r: remaining entries of row r
            urow_r = {cc: v for cc, v in rows[r].items() if cc != c}
            urow[r] = urow_r
            for cc, v in urow_r.items():
                ucol[cc][r] = v
            # L multipliers from column c
            mult = {i: v / piv for i, v in cols[c].items() if i != r}
            # remove row r and column c from the active submatrix
            for cc in rows[r]:
                if cc != c:
                    del cols[cc][r]
                    set_ccount(cc, ccount[cc] - 1)
            for i in cols[c]:
                if i != r:
                    del rows[i][c]
                    set_rcount(i, rcount[i] - 1)
            del cbucket[ccount[c]][c]
            del rbucket[rcount[r]][r]
            rows[r] = {}
            cols[c] = {}
            if mult:
                l_etas.append((r, list(mult.keys()), list(mult.values())))
            # Schur complement update
            for i, li in mult.items():
                row_i = rows[i]
                for cc, u in urow_r.items():
                    old = row_i.get(cc)
                    if old is None:
                        new = -li * u
                        if abs(new) > tiny:
                            row_i[cc] = new
                            cols[cc][i] = new
                            set_rcount(i, rcount[i] + 1)
                            set_ccount(cc, ccount[cc] + 1)
                    else:
                        new = old - li * u
                        if abs(new) > tiny:
                            row_i[cc] = new
                            cols[cc][i] = new
                        else:
                            del row_i[cc]
                            del cols[cc][i]
                            set_rcount(i, rcount[i] - 1)
                            set_ccount(cc, ccount[cc] - 1)

        singular_cols += [c for c in range(m) if col_active[c] and c not in singular_cols]
        if singular_cols:
            bad_rows = [r for r in range(m) if row_active[r]]
            self._reset_identity()
            raise SingularBasis(sorted(singular_cols), bad_rows)

        self.order = order
        self.udiag = udiag
        self.prow = prow
        self.pcol = pcol
        self.l_etas = l_etas
        self.l_col = {r: (idx, val) for r, idx, val in l_etas}
        l_row: dict[int, list] = {}
        for r, idx, val in l_etas:
            for i, v in zip(idx, val):
                l_row.setdefault(i, []).append((r, v))
        self.l_row = l_row
        l_nnz = sum(len(idx) for _, idx, _ in l_etas)
        u_nnz = sum(len(d) for d in ucol)
        self.fill_count = l_nnz + u_nnz + m - orig_nnz

    # ------------------------------------------------------------------ routing

    def _use_hyper(self, kind: str, rhs_density: float, route) -> bool:
        if route is not None:
            return route == "hyper"
        predicted = max(rhs_density, self._avg_density[kind])
        return predicted < self.hyper_switch

    def _record(self, kind: str, result: SparseVector) -> None:
        d = result.density
        self._avg_density[kind] = 0.95 * self._avg_density[kind] + 0.05 * d
        counts = self.result_counts[kind]
        counts[0] += 1
        if d < HYPER_SWITCH:
            counts[1] += 1

    def _check_stale(self):
        if self.update_count > self.refactor_limit:
            raise StaleFactors(f"{self.update_count} updates since INVERT")

    # ------------------------------------------------------------------ FTRAN

    def ftran(self, rhs: SparseVector, partial: bool = False, route=None, record: bool = True):
        """Return ``B^-1 rhs``; with ``partial=True`` also ``L^-1 rhs`` (the FT spike).

        ``route`` forces ``"hyper"`` or ``"dense"`` triangular solves.
        """
        self._check_stale()
        m = self.m
        y = rhs.array.tolist()
        hyper = self._use_hyper("ftran", rhs.density, route)
        touched = set(rhs.index.tolist()) if hyper else None

        for eta in reversed(self.apf_etas):
            s = 0.0
            for i, v in zip(eta.e_index, eta.e_value):
                s += v * y[i]
            if s != 0.0:
                f = s / eta.denom
                for i, v in zip(eta.d_index, eta.d_value):
                    y[i] -= v * f
                if hyper:
                    touched.update(eta.d_index)

        if hyper:
            start = [r for r in touched if y[r] != 0.0]
            l_col = self.l_col
            for r in self._reach(start, self._l_children):
                yr = y[r]
                if yr != 0.0 and r in l_col:
                    idx, val = l_col[r]
                    for i, v in zip(idx, val):
                        y[i] -= v * yr
                    touched.update(idx)
        else:
            for r, idx, val in self.l_etas:
                yr = y[r]
                if yr != 0.0:
                    for i, v in zip(idx, val):
                        y[i] -= v * yr
        for eta in self.r_etas:
            s = 0.0
            for i, v in zip(eta.index, eta.value):
                s += v * y[i]
            if s != 0.0:
                y[eta.row] -= s
                if hyper:
                    touched.add(eta.row)

        spike = None
        if partial:
            spike = self._pack(y, touched if hyper else None)

        x = [0.0] * m
        udiag, prow, ucol = self.udiag, self.prow, self.ucol
        if hyper:
            start = [self.pcol[r] for r in touched if y[r] != 0.0]
            out = []
            for c in self._reach(start, self._u_children):
                r = prow[c]
                yr = y[r]
                if yr != 0.0:
                    xc = yr / udiag[c]
                    x[c] = xc
                    out.append(c)
                    for r2, u in ucol[c].items():
                        y[r2] -= u * xc
            touched = set(out)
        else:
            for c in reversed(self.order):
                yr = y[prow[c]]
                if yr != 0.0:
                    xc = yr / udiag[c]
                    x[c] = xc
                    for r2, u in ucol[c].items():
                        y[r2] -= u * xc

        for eta in self.pf_etas:
            xp = x[eta.p]
            if xp != 0.0:
                xp /= eta.pivot
                x[eta.p] = xp
                for i, v in zip(eta.index, eta.value):
                    x[i] -= v * xp
                if hyper:
                    touched.update(eta.index)

        result = self._pack(x, touched if hyper else None)
        if record:
            self._record("ftran", result)
        return (result, spike) if partial else result

    # ------------------------------------------------------------------ BTRAN

    def btran(self, rhs: SparseVector, partial: bool = False, route=None, record: bool = True):
        """Return ``B^-T rhs``; with ``partial=True`` also ``U^-T rhs`` (row-indexed)."""
        self._check_stale()
        m = self.m
        b = rhs.array.tolist()
        hyper = self._use_hyper("btran", rhs.density, route)
        touched = set(rhs.index.tolist()) if hyper else None

        for eta in reversed(self.pf_etas):
            s = b[eta.p]
            for i, v in zip(eta.index, eta.value):
                s -= v * b[i]
            b[eta.p] = s / eta.pivot
            if hyper and s != 0.0:
                touched.add(eta.p)

        z = [0.0] * m
        udiag, prow, urow = self.udiag, self.prow, self.urow
        if hyper:
            start = [c for c in touched if b[c] != 0.0]
            out = []
            for c in self._reach(start, self._ut_children):
                bc = b[c]
                if bc != 0.0:
                    r = prow[c]
                    zr = bc / udiag[c]
                    z[r] = zr
                    out.append(r)
                    for c2, u in urow[r].items():
                        b[c2] -= u * zr
            touched = set(out)
        else:
            for c in self.order:
                bc = b[c]
                if bc != 0.0:
                    r = prow[c]
                    zr = bc / udiag[c]
                    z[r] = zr
                    for c2, u in urow[r].items():
                        b[c2] -= u * zr

        spike = self._pack(z, touched if hyper else None) if partial else None

        for eta in reversed(self.r_etas):
            zr = z[eta.row]
            if zr != 0.0:
                for i, v in zip(eta.index, eta.value):
                    z[i] -= v * zr
                if hyper:
                    touched.update(eta.index)

        if hyper:
            start = [r for r in touched if z[r] != 0.0]
            l_row = self.l_row
            for i in self._reach(start, self._lt_children):
                zi = z[i]
                if zi != 0.0 and i in l_row:
                    for r, v in l_row[i]:
                        z[r] -= v * zi
                    touched.update(r for r, _ in l_row[i])
        else:
            for r, idx, val in reversed(self.l_etas):
                s = z[r]
                for i, v in zip(idx, val):
                    s -= v * z[i]
                z[r] = s

        for eta in self.apf_etas:
            s = 0.0
            for i, v in zip(eta.d_index, eta.d_value):
                s += v * z[i]
            if s != 0.0:
                f = s / eta.denom
                for i, v in zip(eta.e_index, eta.e_value):
                    z[i] -= v * f
                if hyper:
                    touched.update(eta.e_index)

        result = self._pack(z, touched if hyper else None)
        if record:
            self._record("btran", result)
        return (result, spike) if partial else result

    # ------------------------------------------------------------------ graph helpers

    def _l_children(self, r):
        e = self.l_col.get(r)
        return e[0] if e else ()

    def _lt_children(self, i):
        return [r for r, _ in self.l_row.get(i, ())]

    def _u_children(self, c):
        pcol = self.pcol
        return [pcol[r] for r in self.ucol[c]]

    def _ut_children(self, c):
        return self.urow[self.prow[c]].keys()

    @staticmethod
    def _reach(start, children):
        """Nodes reachable from ``start`` in topological order (iterative DFS)."""
        visited = set()
        post = []
        for s in start:
            if s in visited:
                continue
            visited.add(s)
            stack = [(s, iter(children(s)))]
            while stack:
                node, it = stack[-1]
                for ch in it:
                    if ch not in visited:
                        visited.add(ch)
                        stack.append((ch, iter(children(ch))))
                        break
                else:
                    stack.pop()
                    post.append(node)
        post.reverse()
        return post

    def _pack(self, values: list, touched) -> SparseVector:
        arr = np.array(values, dtype=float)
        if touched is None:
            mask = np.abs(arr) > self.zero_drop
            arr[~mask] = 0.0
            return SparseVector(self.m, np.flatnonzero(mask), arr)
        idx = np.fromiter(sorted(touched), dtype=np.int64, count=len(touched))
        keep = np.abs(arr[idx]) > self.zero_drop
        small = idx[~keep]
        arr[small] = 0.0
        return SparseVector(self.m, idx[keep], arr)

    # ------------------------------------------------------------------ updates

    def append_pf_update(self, p: int, a_hat_q: SparseVector) -> None:
        piv = float(a_hat_q.array[p])
        if abs(piv) < self.pivot_tol:
            raise TinyPivot(f"PF pivot {piv:.3e}")
        idx = [int(i) for i in a_hat_q.index if i != p and a_hat_q.array[i] != 0.0]
        self.pf_etas.append(PfEta(p, idx, [float(a_hat_q.array[i]) for i in idx], piv))

    def append_apf_update(self, e_hat_p: SparseVector, a_q: SparseVector, a_pprime: SparseVector) -> None:
        d = a_q.array - a_pprime.array
        d_idx = np.flatnonzero(d)
        e_idx = e_hat_p.index[e_hat_p.array[e_hat_p.index] != 0.0]
        denom = 1.0 + float(np.dot(e_hat_p.array, d))
        if abs(denom) < self.pivot_tol:
            raise TinyPivot(f"APF pivot {denom:.3e}")
        if len(d_idx) == 0:
            return
        self.apf_etas.append(ApfEta(e_idx.tolist(), e_hat_p.array[e_idx].tolist(),
                                    d_idx.tolist(), d[d_idx].tolist(), denom))

    def append_ft_update(self, partial_ftran: SparseVector, partial_btran: SparseVector, p: int,
                         alpha: float | None = None) -> None:
        """Forrest-Tomlin update replacing basis position ``p``.

        ``partial_ftran`` is ``L^-1 a_q`` (row-indexed) and ``partial_btran``
        is ``e_p^T U^-1`` (row-indexed), both against the current factors.
        ``alpha`` is the pivot ``a_hat_pq`` if known, used as a consistency check.
        """
        if self.pf_etas or self.apf_etas:
            raise FtFailure("FT update cannot follow PF/APF updates")
        rp = self.prow[p]
        diag_old = self.udiag[p]
        v = partial_btran.array
        s = partial_ftran.array
        mu_idx = [int(r) for r in partial_btran.index if r != rp and v[r] != 0.0]
        mu_val = [-float(v[r]) * diag_old for r in mu_idx]
        if mu_val and max(abs(x) for x in mu_val) > FT_GROWTH_LIMIT:
            raise FtFailure("row eta growth too large")
        new_diag = float(s[rp]) - sum(mu * float(s[r]) for r, mu in zip(mu_idx, mu_val))
        if alpha is not None:
            expected = diag_old * alpha
            if abs(new_diag - expected) > 1e-7 * max(1.0, abs(expected)):
                raise FtFailure(f"spike pivot {new_diag:.6e} disagrees with {expected:.6e}")
        if abs(new_diag) < self.pivot_tol * max(1.0, abs(diag_old)):
            raise TinyPivot(f"FT pivot {new_diag:.3e}")
        if partial_ftran.count and np.max(np.abs(s)) > FT_GROWTH_LIMIT * abs(new_diag):
            raise FtFailure("spike growth too large")

        ucol, urow = self.ucol, self.urow
        for r in ucol[p]:
            del urow[r][p]
        ucol[p] = {}
        for c in urow[rp]:
            del ucol[c][rp]
        urow[rp] = {}
        newcol = {}
        for r in partial_ftran.index.tolist():
            val = float(s[r])
            if r != rp and val != 0.0:
                newcol[r] = val
                urow[r][p] = val
        ucol[p] = newcol
        self.udiag[p] = new_diag
        self.order.remove(p)
        self.order.append(p)
        if mu_idx:
            self.r_etas.append(RowEta(rp, mu_idx, mu_val))
        self._ft_count += 1

    def apply_new_row_etas(self, vec: SparseVector, first: int) -> SparseVector:
        """Apply row etas ``r_etas[first:]`` to a row-indexed vector in place."""
        y = vec.array
        touched = set(vec.index.tolist())
        for eta in self.r_etas[first:]:
            s = float(np.dot(eta.value, y[eta.index]))
            if s != 0.0:
                y[eta.row] -= s
                touched.add(eta.row)
        vec.index = np.array(sorted(i for i in touched if y[i] != 0.0), dtype=np.int64)
        return vec

    def partial_btran_unit(self, p: int) -> SparseVector:
        """``e_p^T U^-1`` against the current ``U`` (row-indexed)."""
        _, spike = self.btran(SparseVector.unit(self.m, p), partial=True, record=False)
        return spike

    def collective_ft_update(self, pivots) -> None:
        """Apply ``t`` FT updates from partial FTRAN results taken against ``B_k``.

        ``pivots`` is a sequence of ``(p_i, spike_i)`` or ``(p_i, spike_i, alpha_i)``
        where ``spike_i = L_k^-1 a_{q_i}``. Row etas generated earlier in the
        sequence are folded into later spikes, so one serial pass suffices.
        """
        if self.pf_etas or self.apf_etas:
            raise FtFailure("collective FT cannot follow PF/APF updates")
        first = len(self.r_etas)
        for item in pivots:
            p, spike = item[0], item[1]
            alpha = item[2] if len(item) > 2 else None
            spike = self.apply_new_row_etas(spike.copy(), first)
            self.append_ft_update(spike, self.partial_btran_unit(p), p, alpha)

    # ------------------------------------------------------------------ checks

    def residual(self, columns, rhs: np.ndarray) -> float:
        """``||B ftran(rhs) - rhs||_inf`` for the basis given by ``columns``."""
        x = self.ftran(SparseVector.from_dense(rhs), record=False).array
        bx = np.zeros(self.m)
        for c, (idx, val) in enumerate(columns):
            if x[c] != 0.0:
                bx[idx] += val * x[c]
        return float(np.max(np.abs(bx - rhs))) if self.m else 0.0


def invert(lp, basis, **options) -> BasisFactor:
    """Factor the basis matrix of ``basis`` for ``lp``."""
    factor = BasisFactor(lp.num_rows, **options)
    factor.invert([lp.column(j) for j in basis.basic])
    return factor
