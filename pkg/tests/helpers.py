"""Shared builders for factor-level tests."""

import numpy as np
import scipy.sparse as sp

from parsimplex.factor import BasisFactor, SparseVector


def columns(B):
    return [(np.flatnonzero(B[:, c]), B[np.flatnonzero(B[:, c]), c]) for c in range(B.shape[0])]


def random_basis(rng, m, density=0.3):
    while True:
        B = sp.random(m, m, density=density, random_state=int(rng.integers(1 << 30))).toarray()
        B += np.diag(rng.uniform(0.5, 2.0, m)) * (rng.random(m) < 0.8)
        B = B[:, rng.permutation(m)]
        if abs(np.linalg.det(B)) > 1e-6 and np.linalg.cond(B) < 1e8:
            return B


def factor_of(B):
    f = BasisFactor(B.shape[0])
    f.invert(columns(B))
    return f


def pivot_sequence(rng, B, length):
    """Random admissible pivots: list of (p, a_q) with |pivot| >= 0.1 along the way."""
    m = B.shape[0]
    Bc = B.copy()
    out = []
    used = set()
    for _ in range(length):
        p = int(rng.integers(m))
        if p in used:
            continue
        aq = rng.standard_normal(m) * (rng.random(m) < 0.5)
        aq[p] += 3.0
        ahat = np.linalg.solve(Bc, aq)
        if abs(ahat[p]) < 0.1:
            continue
        used.add(p)
        out.append((p, aq))
        Bc[:, p] = aq
    return out, Bc


def apply_schemes(B, pivots):
    """Factors of the final basis via PF, APF, FT, collective FT and fresh INVERT."""
    m = B.shape[0]
    fpf, fapf, fft, fcft = (factor_of(B) for _ in range(4))
    Bc = B.copy()
    cft = []
    for p, aq in pivots:
        a = SparseVector.from_dense(aq)
        ahat = fpf.ftran(a)
        fpf.append_pf_update(p, ahat)
        e = fapf.btran(SparseVector.unit(m, p))
        fapf.append_apf_update(e, a, SparseVector.from_dense(Bc[:, p]))
        col, spike = fft.ftran(a, partial=True)
        fft.append_ft_update(spike, fft.partial_btran_unit(p), p, float(col.array[p]))
        _, spike_k = fcft.ftran(a, partial=True)
        cft.append((p, spike_k, float(ahat.array[p])))
        Bc[:, p] = aq
    fcft.collective_ft_update(cft)
    return {"pf": fpf, "apf": fapf, "ft": fft, "cft": fcft, "invert": factor_of(Bc)}, Bc


def rel_err(x, ref):
    return float(np.max(np.abs(x - ref)) / max(1.0, np.max(np.abs(ref))))
