from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NonConvergenceError, ValidationError
from ..measure import CostMatrix, DiscreteMeasure, TransportPlan, check_exponent, power_cost, require_same_space
from ._simplex_kernel import STATUS_OPTIMAL, transport_simplex


@dataclass
class SimplexResult:
    """Raw solution of one dense block, in block-local indices."""

    rows: np.ndarray
    cols: np.ndarray
    flow: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cost: float
    iterations: int
    bland_pivots: int

    def min_reduced_cost(self, C):
        # basic arcs sit at ~0, so the minimum is over the non-basic ones
        # up to rounding
        return float(np.min(C - self.u[:, None] - self.v[None, :]))


def rebalance(a, b):
    """Copy ``b`` with its rounding residual moved onto its largest atom.

    Afterwards ``fsum(b) == fsum(a)`` up to one ulp, which is what the
    north-west corner start needs to exhaust both sides together.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    diff = math.fsum(a) - math.fsum(b)
    if diff != 0.0:
        b[int(np.argmax(b))] += diff
    return b


def default_max_iter(m, n):
    return 10 * (m + n) ** 2 + 1000


def solve_dense(a, b, C, max_iter=None, tol=None) -> SimplexResult:
    """Transportation simplex on positive marginals ``a``, ``b`` and block ``C``.

    Both marginals must be strictly positive and carry the same total
    (any scale: the subsampler passes integer counts).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(rebalance(a, b))
    C = np.ascontiguousarray(C, dtype=np.float64)
    m, n = a.shape[0], b.shape[0]
    if C.shape != (m, n):
        raise ValidationError(f"cost block has shape {C.shape}, expected {(m, n)}")
    if m == 0 or n == 0:
        raise ValidationError("both marginals need at least one support point")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValidationError("marginals must be strictly positive (drop zero atoms first)")
    if max_iter is None:
        max_iter = default_max_iter(m, n)
    cmax = float(np.max(np.abs(C))) if C.size else 0.0
    if tol is None:
        tol = 1e-12 * max(1.0, cmax)
    rows, cols, flow, u, v, it, nb, status = transport_simplex(a, b, C, int(max_iter), float(tol))
    result = SimplexResult(rows, cols, flow, u, v, float(np.dot(flow, C[rows, cols])), int(it), int(nb))
    if status != STATUS_OPTIMAL:
        raise NonConvergenceError(
            f"transportation simplex hit the iteration limit ({max_iter})",
            best=result,
            diagnostics={"iterations": it, "bland_pivots": nb},
        )
    return result


def _support_problem(r, s, cost):
    """Support indices, marginals and cost block for a pair of measures."""
    ir, js = r.support, s.support
    if ir.size == 0 or js.size == 0:
        raise ValidationError("both measures need at least one support point")
    if isinstance(cost, CostMatrix):
        p = cost.p
        C = np.asarray(cost.entries)[np.ix_(ir, js)]
    else:
        p = check_exponent(cost)
        C = power_cost(r.space.pairwise(ir, js), p)
    return ir, js, r.weights[ir], s.weights[js], C, p


def solve_transport_simplex(r: DiscreteMeasure, s: DiscreteMeasure, cost=1.0, *, max_iter=None, tol=None,
                            return_result=False):
    """Exact optimal plan between ``r`` and ``s``.

    ``cost`` is either a precomputed :class:`CostMatrix` or the exponent
    ``p``, in which case only the block between the two supports is ever
    formed. Zero-weight points are dropped before solving and the plan is
    reported in ground-space indices.
    """
    require_same_space(r, s)
    ir, js, a, b, C, p = _support_problem(r, s, cost)
    try:
        res = solve_dense(a, b, C, max_iter=max_iter, tol=tol)
    except NonConvergenceError as exc:
        best = exc.best
        exc.best = TransportPlan(r.n, ir[best.rows], js[best.cols], best.flow, best.cost, p)
        raise
    plan = TransportPlan(r.n, ir[res.rows], js[res.cols], res.flow, res.cost, p)
    if return_result:
        return plan, res
    return plan
