"""Dense two-phase simplex for box-constrained problems with few equality rows.

Solves ``min c.x  s.t.  A x = b,  0 <= x <= 1``. Upper bounds are expanded
into slack rows, equality rows get phase-1 artificials, and Bland's rule
(smallest eligible index) is used for both the entering and leaving choices,
which rules out cycling. Intended for small dense problems; no sparse
machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, UnboundedError

_MAX_ITERATIONS = 100_000
_RATIO_TIE = 1e-12


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    objective: float
    iterations: int


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    piv = T[row] / T[row, col]
    column = T[:, col].copy()
    T -= np.outer(column, piv)
    T[row] = piv
    T[:, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


def _run(T: np.ndarray, basis: np.ndarray, num_enterable: int, tol: float) -> int:
    rows = T.shape[0] - 1
    iterations = 0
    while True:
        iterations += 1
        if iterations > _MAX_ITERATIONS:
            raise RuntimeError("simplex iteration cap exceeded")
        reduced = T[-1, :num_enterable]
        negative = np.flatnonzero(reduced < -tol)
        if negative.size == 0:
            return iterations
        enter = int(negative[0])  # Bland: smallest eligible column
        column = T[:rows, enter]
        mask = column > tol
        if not mask.any():
            raise UnboundedError("objective unbounded below")
        ratios = np.full(rows, np.inf)
        ratios[mask] = T[:rows, -1][mask] / column[mask]
        best = float(ratios.min())
        candidates = np.flatnonzero(ratios <= best + _RATIO_TIE)
        leave = int(candidates[np.argmin(basis[candidates])])  # Bland tie-break
        _pivot(T, basis, leave, enter)


def minimize_box(
    c: np.ndarray, A: np.ndarray, b: np.ndarray, *, tol: float = 1e-10, feas_tol: float = 1e-8
) -> SimplexResult:
    """Minimize ``c.x`` over ``{A x = b, 0 <= x <= 1}``.

    Raises InfeasibleError (with a violated row index where identifiable) when
    phase 1 cannot zero out the artificials.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != c.shape[0] or A.shape[0] != b.shape[0]:
        raise ValueError(f"inconsistent problem shapes: c{c.shape}, A{A.shape}, b{b.shape}")
    m, n = A.shape
    num_cols = 2 * n + m
    T = np.zeros((m + n + 1, num_cols + 1))
    for i in range(m):
        sign = -1.0 if b[i] < 0 else 1.0
        T[i, :n] = sign * A[i]
        T[i, 2 * n + i] = 1.0
        T[i, -1] = sign * b[i]
    for j in range(n):
        T[m + j, j] = 1.0
        T[m + j, n + j] = 1.0
        T[m + j, -1] = 1.0
    basis = np.array([2 * n + i for i in range(m)] + [n + j for j in range(n)], dtype=np.int64)

    iterations = 0
    if m > 0:
        # Phase 1: minimize the sum of artificials.
        T[-1, :] = 0.0
        T[-1, 2 * n : 2 * n + m] = 1.0
        for i in range(m):
            T[-1] -= T[i]
        iterations += _run(T, basis, 2 * n, tol)
        infeasibility = -float(T[-1, -1])
        scale = 1.0 + float(np.abs(b).sum())
        if infeasibility > feas_tol * scale:
            violated = None
            for r, col in enumerate(basis):
                if col >= 2 * n and T[r, -1] > feas_tol * scale:
                    violated = int(col - 2 * n)
                    break
            raise InfeasibleError(
                f"equality constraints are infeasible (phase-1 residual {infeasibility:.3e})",
                row=violated,
            )
        # Drive leftover artificials out of the basis; rows that cannot be
        # pivoted are redundant and stay inert.
        for r in range(m + n):
            if basis[r] >= 2 * n:
                nonzero = np.flatnonzero(np.abs(T[r, : 2 * n]) > tol)
                if nonzero.size:
                    _pivot(T, basis, r, int(nonzero[0]))

    # Phase 2: original objective (slacks and artificials cost nothing).
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r in range(m + n):
        col = basis[r]
        if col < n and c[col] != 0.0:
            T[-1] -= c[col] * T[r]
    iterations += _run(T, basis, 2 * n, tol)

    x = np.zeros(n)
    for r, col in enumerate(basis):
        if col < n:
            x[col] = T[r, -1]
    x = np.clip(x, 0.0, 1.0)
    if m > 0:
        residual = float(np.abs(A @ x - b).max())
        if residual > feas_tol * (1.0 + float(np.abs(b).max())):
            raise RuntimeError(f"simplex returned an infeasible point (residual {residual:.3e})")
    return SimplexResult(x=x, objective=float(c @ x), iterations=iterations)
