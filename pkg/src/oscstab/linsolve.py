"""Pivoted LU factorization for the small dense systems of this package.

The bracket matrices here have at most a few tens of rows, so a plain
partial-pivoting elimination in Python is fast enough and has one property
the stock LAPACK wrappers lack: it runs unchanged on object arrays of
:class:`~oscstab.dualnum.Dual` entries, which is how derivatives are pushed
through the feedback synthesis solve.
"""

from __future__ import annotations

import numpy as np

from .dualnum import Dual

__all__ = ["SingularMatrixError", "lu_factor", "lu_solve", "solve",
           "condition_1norm"]


class SingularMatrixError(ValueError):
    """Elimination hit a zero pivot column."""


def _mag(a) -> float:
    return abs(a.val) if isinstance(a, Dual) else abs(a)


def lu_factor(a):
    """Factor ``a`` in place (on a copy) with row partial pivoting.

    Returns ``(lu, perm)`` where ``lu`` stores L below and U on/above the
    diagonal and ``perm`` is the row permutation applied.  Raises
    :class:`SingularMatrixError` on an exactly zero pivot column.
    """
    a = np.array(a, copy=True)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"square matrix required, got {a.shape}")
    perm = np.arange(n)
    for k in range(n):
        piv = k
        best = _mag(a[k, k])
        for r in range(k + 1, n):
            m = _mag(a[r, k])
            if m > best:
                best = m
                piv = r
        if best == 0.0:
            raise SingularMatrixError(f"zero pivot in column {k}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
        inv_piv = 1.0 / a[k, k] if not isinstance(a[k, k], Dual) else None
        for r in range(k + 1, n):
            f = a[r, k] * inv_piv if inv_piv is not None else a[r, k] / a[k, k]
            a[r, k] = f
            for c in range(k + 1, n):
                a[r, c] = a[r, c] - f * a[k, c]
    return a, perm


def lu_solve(lu, perm, b):
    """Back substitution for a factorization from :func:`lu_factor`."""
    n = lu.shape[0]
    x = np.array([b[p] for p in perm], dtype=lu.dtype if lu.dtype == object else float)
    for k in range(1, n):
        acc = x[k]
        for c in range(k):
            acc = acc - lu[k, c] * x[c]
        x[k] = acc
    for k in range(n - 1, -1, -1):
        acc = x[k]
        for c in range(k + 1, n):
            acc = acc - lu[k, c] * x[c]
        x[k] = acc / lu[k, k]
    return x


def solve(a, b):
    """Solve ``a @ x = b`` by pivoted LU; works for float and dual entries."""
    lu, perm = lu_factor(a)
    return lu_solve(lu, perm, b)


def condition_1norm(a) -> float:
    """1-norm condition estimate from the pivoted factorization.

    Computes ``||a||_1 * ||a^-1||_1`` exactly by solving against every unit
    vector; cheap at these sizes.  Returns ``inf`` when elimination finds a
    zero pivot, which is the singularity sentinel used throughout.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    try:
        lu, perm = lu_factor(a)
    except SingularMatrixError:
        return float("inf")
    norm_a = float(np.max(np.sum(np.abs(a), axis=0)))
    norm_inv = 0.0
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        col = lu_solve(lu, perm, e)
        e[j] = 0.0
        norm_inv = max(norm_inv, float(np.sum(np.abs(col))))
    if not np.isfinite(norm_inv):
        return float("inf")
    return norm_a * norm_inv
