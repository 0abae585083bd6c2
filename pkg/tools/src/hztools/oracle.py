"""Exact ReLU-network range oracle by activation-pattern enumeration.

Fixes each ReLU's phase, accumulating the linear constraints that make the
phase pattern consistent, prunes infeasible branches with an LP, and takes
the best LP optimum over all feasible patterns. Independent of any set
machinery; used only to generate golden files for tiny fixtures.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog


def _feasible(a_ub, b_ub, lo, hi) -> bool:
    if not a_ub:
        return True
    res = linprog(np.zeros(lo.size), A_ub=np.array(a_ub), b_ub=np.array(b_ub),
                  bounds=np.column_stack([lo, hi]), method="highs")
    return res.status == 0


def exact_support(layers, lo, hi, d) -> float:
    """max of d @ net(x) over the box [lo, hi]; layers are (W, b, activation)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    best = [-np.inf]

    def leaf(m, c, a_ub, b_ub):
        obj = -(np.asarray(d) @ m)
        res = linprog(obj, A_ub=np.array(a_ub) if a_ub else None,
                      b_ub=np.array(b_ub) if b_ub else None,
                      bounds=np.column_stack([lo, hi]), method="highs")
        if res.status == 0:
            best[0] = max(best[0], -res.fun + float(np.asarray(d) @ c))

    def descend(k, m, c, a_ub, b_ub):
        if k == len(layers):
            leaf(m, c, a_ub, b_ub)
            return
        w, b, act = layers[k]
        mz = np.asarray(w) @ m
        cz = np.asarray(w) @ c + np.asarray(b)
        if act == "identity":
            descend(k + 1, mz, cz, a_ub, b_ub)
            return

        def branch(i, rows_a, rows_b, active):
            if i == mz.shape[0]:
                dmask = np.array(active, dtype=float)
                descend(k + 1, dmask[:, None] * mz, dmask * cz, rows_a, rows_b)
                return
            on = rows_a + [-mz[i]], rows_b + [cz[i]]        # z_i >= 0
            off = rows_a + [mz[i]], rows_b + [-cz[i]]       # z_i <= 0
            if _feasible(on[0], on[1], lo, hi):
                branch(i + 1, on[0], on[1], active + [1.0])
            if _feasible(off[0], off[1], lo, hi):
                branch(i + 1, off[0], off[1], active + [0.0])

        branch(0, a_ub, b_ub, [])

    n = lo.size
    descend(0, np.eye(n), np.zeros(n), [], [])
    return best[0]


def exact_ranges(layers, lo, hi) -> np.ndarray:
    """(m, 2) array of exact per-class output ranges."""
    m = np.asarray(layers[-1][0]).shape[0]
    out = np.empty((m, 2))
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        out[j, 1] = exact_support(layers, lo, hi, e)
        out[j, 0] = -exact_support(layers, lo, hi, -e)
    return out
