"""Dense tableau simplex for the small benchmark LPs.

Solves maximize c.x subject to A x <= b, x >= 0 with b >= 0, so the slack
basis is feasible from the start and no phase-1 is needed.  Bland's rule
keeps degenerate instances from cycling; these problems have at most a few
hundred rows so speed is irrelevant next to robustness.
"""
from __future__ import annotations

import numpy as np

PIVOT_TOL = 1e-10


class SimplexError(Exception):
    """Numeric failure inside the solver."""


def simplex_maximize(c, a, b, pivot_tol: float = PIVOT_TOL,
                     max_iters: int = 50_000) -> tuple[np.ndarray, float, int]:
    """Returns (x, objective, iterations)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    if a.ndim != 2:
        raise SimplexError("constraint matrix must be 2-d")
    m, n = a.shape
    if b.shape != (m,) or c.shape != (n,):
        raise SimplexError("inconsistent system shapes")
    b[(b < 0) & (b > -1e-12)] = 0.0  # rate arithmetic noise
    if np.any(b < 0):
        raise SimplexError("negative right-hand side; slack start infeasible")

    # scale rows to unit max coefficient so the pivot tolerance is meaningful
    # on badly scaled inputs
    scale = np.abs(a).max(axis=1)
    keep = scale > 0
    a, b = a[keep], b[keep]
    scale = scale[keep]
    a = a / scale[:, None]
    b = b / scale
    m = a.shape[0]

    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[-1, :n] = -c
    basis = list(range(n, n + m))

    for it in range(1, max_iters + 1):
        cost = tableau[-1, :-1]
        entering = -1
        for j in range(n + m):  # Bland: lowest improving index
            if cost[j] < -pivot_tol:
                entering = j
                break
        if entering < 0:
            x = np.zeros(n + m)
            for i, v in enumerate(basis):
                x[v] = tableau[i, -1]
            x = x[:n]
            x[(x < 0) & (x > -1e-9)] = 0.0
            return x, float(c @ x), it - 1

        col = tableau[:m, entering]
        best_ratio = np.inf
        leaving = -1
        for i in range(m):
            if col[i] > pivot_tol:
                ratio = tableau[i, -1] / col[i]
                if ratio < best_ratio - 1e-15 or (
                        abs(ratio - best_ratio) <= 1e-15
                        and (leaving < 0 or basis[i] < basis[leaving])):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            raise SimplexError("objective unbounded above")

        pivot = tableau[leaving, entering]
        tableau[leaving] /= pivot
        for i in range(m + 1):
            if i != leaving and tableau[i, entering] != 0.0:
                tableau[i] -= tableau[i, entering] * tableau[leaving]
        basis[leaving] = entering

    raise SimplexError(f"no convergence within {max_iters} iterations")
