"""Independent reference solvers used to check the transportation simplex."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, OracleSizeError, ValidationError
from ..measure import CostMatrix, DiscreteMeasure, TransportPlan, check_exponent, power_cost, require_same_space

ORACLE_MAX_VARS = 100
_EPS = 1e-12


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for k in range(T.shape[0]):
        if k != row and T[k, col] != 0.0:
            T[k] -= T[k, col] * T[row]


def _bland_simplex(T, basis, n_allowed):
    """Minimise the objective in the last row of tableau ``T`` in place.

    Columns ``>= n_allowed`` (besides the rhs) are never chosen to enter.
    Bland's rule on both entering and leaving choices, so no cycling.
    """
    while True:
        obj = T[-1, :n_allowed]
        cand = np.flatnonzero(obj < -_EPS)
        if cand.size == 0:
            return
        col = int(cand[0])
        colv = T[:-1, col]
        pos = np.flatnonzero(colv > _EPS)
        if pos.size == 0:
            raise ValidationError("transport LP reported unbounded; inputs are inconsistent")
        ratios = T[pos, -1] / colv[pos]
        best = ratios.min()
        tied = pos[ratios <= best + _EPS * max(1.0, abs(best))]
        row = int(min(tied, key=lambda k: basis[k]))
        _pivot(T, row, col)
        basis[row] = col


def lp_transport(a, b, C):
    """Two-phase dense tableau simplex for the transport LP.

    Returns ``(X, cost)`` with ``X`` the optimal ``(m, n)`` coupling.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    m, n = a.size, b.size
    nv = m * n
    if nv > ORACLE_MAX_VARS:
        raise OracleSizeError(f"oracle limited to {ORACLE_MAX_VARS} variables, got {m}x{n}")
    A = np.zeros((m + n, nv))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A[m + j, j::n] = 1.0
    rhs = np.concatenate([a, b])
    rows = m + n
    # phase I: one artificial per equality
    T = np.zeros((rows + 1, nv + rows + 1))
    T[:rows, :nv] = A
    T[:rows, nv:nv + rows] = np.eye(rows)
    T[:rows, -1] = rhs
    T[-1, :] = -T[:rows].sum(axis=0)
    T[-1, nv:nv + rows] = 0.0
    basis = list(range(nv, nv + rows))
    _bland_simplex(T, basis, nv)
    if -T[-1, -1] > 1e-9 * max(1.0, rhs.sum()):
        raise ValidationError("marginals are incompatible (unequal total mass)")
    # drive remaining artificials out; rows that cannot pivot are redundant
    keep = []
    for k in range(rows):
        if basis[k] >= nv:
            nz = np.flatnonzero(np.abs(T[k, :nv]) > 1e-9)
            if nz.size:
                _pivot(T, k, int(nz[0]))
                basis[k] = int(nz[0])
                keep.append(k)
        else:
            keep.append(k)
    T2 = np.zeros((len(keep) + 1, nv + 1))
    T2[:-1, :nv] = T[keep, :nv]
    T2[:-1, -1] = T[keep, -1]
    basis2 = [basis[k] for k in keep]
    c = C.ravel()
    T2[-1, :nv] = c
    for k, bv in enumerate(basis2):
        T2[-1] -= c[bv] * T2[k]
    _bland_simplex(T2, basis2, nv)
    x = np.zeros(nv)
    for k, bv in enumerate(basis2):
        x[bv] = max(T2[k, -1], 0.0)
    X = x.reshape(m, n)
    return X, float(np.sum(X * C))


def brute_force_lp(r: DiscreteMeasure, s: DiscreteMeasure, cost=1.0) -> TransportPlan:
    """Exact optimum by the dense tableau oracle (at most 100 variables).

    The full vectors are used when ``N*N`` fits, otherwise the supports.
    """
    require_same_space(r, s)
    if isinstance(cost, CostMatrix):
        p, full = cost.p, np.asarray(cost.entries)
    else:
        p, full = check_exponent(cost), None
    n = r.n
    if n * n <= ORACLE_MAX_VARS:
        ir = js = np.arange(n)
    else:
        ir, js = r.support, s.support
    if ir.size * js.size > ORACLE_MAX_VARS:
        raise OracleSizeError(f"oracle limited to {ORACLE_MAX_VARS} variables, got {ir.size}x{js.size}")
    C = full[np.ix_(ir, js)] if full is not None else power_cost(r.space.pairwise(ir, js), p)
    X, c = lp_transport(r.weights[ir], s.weights[js], C)
    ii, jj = np.nonzero(X)
    return TransportPlan(n, ir[ii], js[jj], X[ii, jj], c, p)


def sorted_coupling_1d(r: DiscreteMeasure, s: DiscreteMeasure, p=1.0) -> float:
    """W_p on the line by matching quantiles of the two measures."""
    require_same_space(r, s)
    p = check_exponent(p)
    space = r.space
    if not space.is_euclidean or space.dim != 1:
        raise DimensionError("sorted coupling needs a one-dimensional coordinate space")
    x = space.coords[:, 0]
    order = np.argsort(x, kind="stable")
    return sorted_coupling_arrays(x[order], r.weights[order], s.weights[order], p)


def sorted_coupling_arrays(x, a, b, p):
    """Monotone coupling of weights ``a`` and ``b`` on sorted positions ``x``."""
    i = j = 0
    n = x.size
    ra, rb = float(a[0]), float(b[0])
    total = 0.0
    while i < n and j < n:
        move = min(ra, rb)
        if move > 0:
            total += move * abs(x[i] - x[j]) ** p
        ra -= move
        rb -= move
        if ra <= rb:
            i += 1
            if i < n:
                ra = float(a[i])
        else:
            j += 1
            if j < n:
                rb = float(b[j])
    return max(total, 0.0) ** (1.0 / p)
