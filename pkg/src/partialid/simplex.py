"""A small dense two-phase primal simplex solver.

Solves  min c'x  subject to  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.
Pivoting uses Bland's rule, so the method cannot cycle; problems here are
tiny (tens of variables), making a dense tableau the simplest reliable
choice.
"""

from __future__ import annotations

import numpy as np

from .errors import InternalConsistencyError

_TOL = 1e-10


class InfeasibleError(InternalConsistencyError):
    """The constraint system admits no nonnegative solution."""


class UnboundedError(InternalConsistencyError):
    """The objective is unbounded below on the feasible set."""


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and abs(T[r, col]) > 0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run_simplex(T, basis, ncols):
    """Iterate Bland pivots on tableau T (last row = reduced costs,
    last column = rhs) until optimal; raises on unboundedness."""
    while True:
        cost = T[-1, :ncols]
        enter_candidates = np.flatnonzero(cost < -_TOL)
        if enter_candidates.size == 0:
            return
        col = int(enter_candidates[0])  # Bland: smallest index enters
        ratios = np.full(T.shape[0] - 1, np.inf)
        pos = T[:-1, col] > _TOL
        ratios[pos] = T[:-1, -1][pos] / T[:-1, col][pos]
        if not np.isfinite(ratios).any():
            raise UnboundedError("objective unbounded below")
        best = ratios.min()
        rows = np.flatnonzero(ratios <= best + _TOL)
        # Bland: among minimal ratios, leave the smallest basis index
        row = int(rows[np.argmin([basis[r] for r in rows])])
        _pivot(T, basis, row, col)


def solve_lp(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None):
    """Minimise ``c @ x`` over ``x >= 0`` with equality and/or upper-bound
    constraints.  Returns ``(value, x)``; raises :class:`InfeasibleError`
    or :class:`UnboundedError` when no optimum exists.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    if A_eq is None and A_ub is None:
        # only x >= 0 constrains the problem
        if np.any(c < 0):
            raise UnboundedError("objective decreases without bound")
        return 0.0, np.zeros(n)
    rows = []
    rhs = []
    n_slack = 0 if A_ub is None else np.asarray(A_ub).shape[0]
    if A_eq is not None:
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        b_eq = np.asarray(b_eq, dtype=float)
        for a, b in zip(A_eq, b_eq):
            rows.append(np.concatenate([a, np.zeros(n_slack)]))
            rhs.append(float(b))
    if A_ub is not None:
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        b_ub = np.asarray(b_ub, dtype=float)
        for k, (a, b) in enumerate(zip(A_ub, b_ub)):
            slack = np.zeros(n_slack)
            slack[k] = 1.0
            rows.append(np.concatenate([a, slack]))
            rhs.append(float(b))
    A = np.vstack(rows)
    b = np.array(rhs)
    # normalise to b >= 0 so artificial variables start feasible
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    m, ntot = A.shape

    # phase 1: minimise the sum of artificial variables
    T = np.zeros((m + 1, ntot + m + 1))
    T[:m, :ntot] = A
    T[:m, ntot:ntot + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(ntot, ntot + m))
    T[-1, :ntot] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    _run_simplex(T, basis, ntot)
    if T[-1, -1] < -1e-8:
        raise InfeasibleError("no nonnegative solution satisfies the constraints")
    # drive any lingering artificial variables out of the basis
    for r in range(m):
        if basis[r] >= ntot:
            piv = np.flatnonzero(np.abs(T[r, :ntot]) > _TOL)
            if piv.size:
                _pivot(T, basis, r, int(piv[0]))

    # phase 2 on the original objective (slacks cost zero)
    keep = [r for r in range(m) if basis[r] < ntot]
    T2 = np.zeros((len(keep) + 1, ntot + 1))
    T2[:-1, :ntot] = T[keep][:, :ntot]
    T2[:-1, -1] = T[keep][:, -1]
    basis2 = [basis[r] for r in keep]
    full_c = np.concatenate([c, np.zeros(n_slack)])
    T2[-1, :ntot] = full_c
    for r, bcol in enumerate(basis2):
        T2[-1] -= full_c[bcol] * T2[r]
    _run_simplex(T2, basis2, ntot)

    x = np.zeros(ntot)
    for r, bcol in enumerate(basis2):
        x[bcol] = T2[r, -1]
    value = float(full_c @ x)
    return value, x[:n]
