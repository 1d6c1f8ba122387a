"""Sinkhorn scaling for entropically regularized transport.

The reported value is the transport cost of the entropic plan raised to
``1/p``; the entropy term is not included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateCostError, NonConvergenceError, NumericUnderflowError, ValidationError
from .measure import CostMatrix, DiscreteMeasure, TransportPlan, check_exponent, power_cost, require_same_space


GRID_ROUTE_MIN_N = 64 * 64


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver settings.

    ``epsilon=None`` picks ``default_epsilon(cost, q_factor)`` on the block
    actually solved. ``log_domain=None`` starts in the scaling domain and
    switches to log-sum-exp updates if the kernel underflows; ``False``
    raises :class:`NumericUnderflowError` instead.
    """

    epsilon: float | None = None
    q_factor: float = 20.0
    tolerance: float = 1e-9
    max_iterations: int = 100_000
    log_domain: bool | None = None
    check_every: int = 10

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValidationError("epsilon must be > 0")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be > 0")
        if not self.q_factor > 0:
            raise ValidationError("q_factor must be > 0")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")


@dataclass
class SinkhornResult:
    value: float
    plan: TransportPlan | None
    iterations: int
    epsilon: float
    violation: float
    log_domain: bool


def median_midpoint(values):
    """Median with the two central values averaged for even counts."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    k = v.size
    if k == 0:
        raise DegenerateCostError("median of an empty set")
    if k % 2:
        return float(v[k // 2])
    return 0.5 * (float(v[k // 2 - 1]) + float(v[k // 2]))


def default_epsilon(cost, q_factor=20.0):
    """Median of the positive cost entries divided by ``q_factor``."""
    entries = cost.entries if isinstance(cost, CostMatrix) else np.asarray(cost)
    pos = entries[entries > 0]
    if pos.size == 0:
        raise DegenerateCostError("cost has no positive entry; epsilon heuristic undefined")
    return median_midpoint(pos) / q_factor


def grid_cost_median(R, p=2.0):
    """Median of positive ``d^p`` over all ordered pixel pairs of an R x R grid.

    Uses the multiplicity ``(R-|dx|)(R-|dy|)`` of each offset instead of
    forming the ``R^4`` matrix.
    """
    off = np.arange(-(R - 1), R)
    mult1 = (R - np.abs(off)).astype(np.int64)
    dx, dy = np.meshgrid(off, off, indexing="ij")
    vals = power_cost(np.sqrt((dx * dx + dy * dy).astype(np.float64)), p).ravel()
    cnt = np.outer(mult1, mult1).ravel()
    keep = vals > 0
    vals, cnt = vals[keep], cnt[keep]
    order = np.argsort(vals, kind="stable")
    vals, cnt = vals[order], cnt[order]
    cum = np.cumsum(cnt)
    total = int(cum[-1])

    def kth(k):  # 0-based order statistic
        return float(vals[np.searchsorted(cum, k + 1)])

    if total % 2:
        return kth(total // 2)
    return 0.5 * (kth(total // 2 - 1) + kth(total // 2))


def _violation(Pr, Pc, a, b):
    return float(np.abs(Pr - a).sum() + np.abs(Pc - b).sum())


def _sinkhorn_scaling(a, b, C, eps, cfg):
    with np.errstate(under="ignore"):
        K = np.exp(-C / eps)
    if np.any(K.max(axis=1) == 0) or np.any(K.max(axis=0) == 0):
        raise NumericUnderflowError(
            f"kernel exp(-C/eps) underflows at eps={eps:g}; use log_domain=True",
            {"epsilon": eps},
        )
    u = np.ones_like(a)
    v = np.ones_like(b)
    viol = np.inf
    it = 0
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        while it < cfg.max_iterations:
            u = a / (K @ v)
            v = b / (K.T @ u)
            it += 1
            if it % cfg.check_every == 0 or it == cfg.max_iterations:
                if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                    raise NumericUnderflowError(
                        f"scaling vectors left the floating range at eps={eps:g}; use log_domain=True",
                        {"epsilon": eps, "iterations": it},
                    )
                viol = _violation(u * (K @ v), v * (K.T @ u), a, b)
                if viol <= cfg.tolerance:
                    break
    P = u[:, None] * K * v[None, :]
    return P, it, viol


def _lse_rows(M):
    mx = M.max(axis=1, keepdims=True)
    return (mx + np.log(np.exp(M - mx).sum(axis=1, keepdims=True)))[:, 0]


def _sinkhorn_log(a, b, C, eps, cfg):
    la, lb = np.log(a), np.log(b)
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    viol = np.inf
    it = 0
    Ct = C.T
    while it < cfg.max_iterations:
        f = eps * (la - _lse_rows((g[None, :] - C) / eps))
        g = eps * (lb - _lse_rows((f[None, :] - Ct) / eps))
        it += 1
        if it % cfg.check_every == 0 or it == cfg.max_iterations:
            P = np.exp((f[:, None] + g[None, :] - C) / eps)
            viol = _violation(P.sum(axis=1), P.sum(axis=0), a, b)
            if viol <= cfg.tolerance:
                break
    P = np.exp((f[:, None] + g[None, :] - C) / eps)
    return P, it, viol


def sinkhorn_dense(a, b, C, cfg: SinkhornConfig):
    """Entropic plan for positive marginals ``a``, ``b`` and cost block ``C``.

    Returns ``(P, iterations, epsilon, violation, used_log_domain)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValidationError("Sinkhorn needs strictly positive marginals (drop zero atoms first)")
    if a.size == 1 or b.size == 1:
        # the coupling is forced
        P = np.outer(a, b) / (a.sum() if b.size == 1 else b.sum())
        return P, 0, cfg.epsilon, 0.0, False
    eps = cfg.epsilon if cfg.epsilon is not None else default_epsilon(C, cfg.q_factor)
    log_domain = bool(cfg.log_domain)
    if not log_domain:
        try:
            P, it, viol = _sinkhorn_scaling(a, b, C, eps, cfg)
        except NumericUnderflowError:
            if cfg.log_domain is False:
                raise
            log_domain = True
    if log_domain:
        P, it, viol = _sinkhorn_log(a, b, C, eps, cfg)
    if not viol <= cfg.tolerance:
        raise NonConvergenceError(
            f"Sinkhorn did not reach tolerance {cfg.tolerance:g} in {it} iterations (violation {viol:.3g})",
            best=(P, viol),
            diagnostics={"iterations": it, "violation": viol, "epsilon": eps},
        )
    return P, it, eps, viol, log_domain


def solve_sinkhorn(r: DiscreteMeasure, s: DiscreteMeasure, cost=1.0, cfg: SinkhornConfig | None = None,
                   *, return_plan=True) -> SinkhornResult:
    """Sinkhorn value and plan between two measures on one space.

    ``cost`` is a :class:`CostMatrix` or the exponent ``p``. Zero-weight
    points are dropped first. Full-support measures on a grid space larger
    than 64 x 64 with ``p == 2`` use the separable grid kernel and never
    build the ``N x N`` cost; that route returns no plan.
    """
    require_same_space(r, s)
    cfg = cfg or SinkhornConfig()
    ir, js = r.support, s.support
    space = r.space
    if isinstance(cost, CostMatrix):
        p = cost.p
        C = np.asarray(cost.entries)[np.ix_(ir, js)]
    else:
        p = check_exponent(cost)
        if (space.n > GRID_ROUTE_MIN_N and space.grid_shape is not None and p == 2
                and ir.size == space.n and js.size == space.n):
            R0, R1 = space.grid_shape
            if R0 == R1 and np.array_equal(space.coords, _grid_coords(R0)):
                return sinkhorn_grid(r.weights.reshape(R0, R0), s.weights.reshape(R0, R0), cfg)
        C = power_cost(space.pairwise(ir, js), p)
    P, it, eps, viol, used_log = sinkhorn_dense(r.weights[ir], s.weights[js], C, cfg)
    c = float(np.sum(P * C))
    plan = None
    if return_plan:
        ii, jj = np.nonzero(P)
        plan = TransportPlan(r.n, ir[ii], js[jj], P[ii, jj], c, p)
    return SinkhornResult(max(c, 0.0) ** (1.0 / p), plan, it, eps, viol, used_log)


def _grid_coords(R):
    ii, jj = np.meshgrid(np.arange(1, R + 1), np.arange(1, R + 1), indexing="ij")
    return np.column_stack([ii.ravel(), jj.ravel()]).astype(np.float64)


def sinkhorn_grid(A, B, cfg: SinkhornConfig | None = None) -> SinkhornResult:
    """Sinkhorn for two positive ``R x R`` images under squared Euclidean cost.

    The Gibbs kernel factors as ``K1 (x) K1`` with ``K1[i, k] = exp(-(i-k)^2/eps)``,
    so one kernel product costs ``O(R^3)`` instead of ``O(R^4)``.
    """
    cfg = cfg or SinkhornConfig()
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    R = A.shape[0]
    if A.shape != (R, R) or B.shape != (R, R):
        raise ValidationError("sinkhorn_grid needs two square images of equal size")
    if np.any(A <= 0) or np.any(B <= 0):
        raise ValidationError("sinkhorn_grid needs strictly positive images")
    eps = cfg.epsilon if cfg.epsilon is not None else grid_cost_median(R, 2.0) / cfg.q_factor
    off = np.arange(R, dtype=np.float64)
    D1 = (off[:, None] - off[None, :]) ** 2
    log_domain = bool(cfg.log_domain)
    if not log_domain:
        with np.errstate(under="ignore"):
            K1 = np.exp(-D1 / eps)
        try:
            U, V, it, viol = _grid_scaling(A, B, K1, cfg, eps)
        except NumericUnderflowError:
            if cfg.log_domain is False:
                raise
            log_domain = True
    if log_domain:
        F, G, it, viol = _grid_log(A, B, D1, cfg, eps)
    if not viol <= cfg.tolerance:
        raise NonConvergenceError(
            f"grid Sinkhorn did not reach tolerance {cfg.tolerance:g} in {it} iterations",
            diagnostics={"iterations": it, "violation": viol, "epsilon": eps},
        )
    if log_domain:
        cost = _grid_log_cost(F, G, D1, eps)
    else:
        KD = K1 * D1
        cost = float(np.sum(U * (KD @ V @ K1.T + K1 @ V @ KD.T)))
    return SinkhornResult(max(cost, 0.0) ** 0.5, None, it, eps, viol, log_domain)


def _grid_scaling(A, B, K1, cfg, eps):
    def k(X):
        return K1 @ X @ K1.T

    U = np.ones_like(A)
    V = np.ones_like(B)
    it = 0
    viol = np.inf
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        while it < cfg.max_iterations:
            U = A / k(V)
            V = B / k(U)
            it += 1
            if it % cfg.check_every == 0 or it == cfg.max_iterations:
                if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
                    raise NumericUnderflowError(f"grid scaling overflowed at eps={eps:g}")
                viol = _violation(U * k(V), V * k(U), A, B)
                if viol <= cfg.tolerance:
                    break
    return U, V, it, viol


def _grid_lse(G, D1, eps):
    # out[i, j] = log sum_{k,l} exp((G[k, l] - D1[i, k] - D1[j, l]) / eps)
    M = (G[None, :, :] - D1[:, None, :]) / eps  # over l: [j, k, l]
    mx = M.max(axis=2, keepdims=True)
    T = (mx + np.log(np.exp(M - mx).sum(axis=2, keepdims=True)))[:, :, 0]  # [j, k]
    M2 = T.T[None, :, :] - D1[:, :, None] / eps  # [i, k, j]
    mx2 = M2.max(axis=1, keepdims=True)
    return (mx2 + np.log(np.exp(M2 - mx2).sum(axis=1, keepdims=True)))[:, 0, :]


def _grid_log(A, B, D1, cfg, eps):
    la, lb = np.log(A), np.log(B)
    F = np.zeros_like(A)
    G = np.zeros_like(B)
    it = 0
    viol = np.inf
    while it < cfg.max_iterations:
        F = eps * (la - _grid_lse(G, D1, eps))
        G = eps * (lb - _grid_lse(F, D1, eps))
        it += 1
        if it % cfg.check_every == 0 or it == cfg.max_iterations:
            row = np.exp(F / eps + _grid_lse(G, D1, eps))
            col = np.exp(G / eps + _grid_lse(F, D1, eps))
            viol = _violation(row, col, A, B)
            if viol <= cfg.tolerance:
                break
    return F, G, it, viol


def _lse_last(M):
    mx = M.max(axis=-1, keepdims=True)
    return (mx + np.log(np.exp(M - mx).sum(axis=-1, keepdims=True)))[..., 0]


def _grid_log_cost(F, G, D1, eps):
    # sum P_{ij,kl} (D_ik + D_jl) in log space; every exponent below is a
    # partial plan mass, so nothing overflows
    T = _lse_last((G[None, :, :] - D1[:, None, :]) / eps)  # [j, k]: LSE over l
    E = np.exp(F[:, :, None] / eps - D1[:, None, :] / eps + T[None, :, :])  # [i, j, k]
    first = float(np.sum(E * D1[:, None, :]))
    T2 = _lse_last((G.T[None, :, :] - D1[:, None, :]) / eps)  # [i, l]: LSE over k
    E2 = np.exp(F[:, :, None] / eps - D1[None, :, :] / eps + T2[:, None, :])  # [i, j, l]
    second = float(np.sum(E2 * D1[None, :, :]))
    return first + second


def with_epsilon(cfg: SinkhornConfig, eps):
    return replace(cfg, epsilon=eps)
