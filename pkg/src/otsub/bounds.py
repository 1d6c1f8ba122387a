"""Covering numbers, covering trees and the error-bound constants.

The constant ``E_q`` controls the one-sample deviation
``E[W_p^p(r_S, r)] <= E_q / sqrt(S)``:

    E_q = 2^(p-1) q^(2p) diam^p ( q^(-(l_max+1)p) sqrt(N)
                                  + sum_{l=0}^{l_max} q^(-lp) sqrt(N(X, q^-l diam)) )

Exact covering numbers are NP-hard to compute, so ``N(X, delta)`` is
replaced by the size of a greedy farthest-point covering. Any covering
works in the tree construction behind the inequality, so the result is
still a valid constant, only possibly looser. :func:`exact_covering`
calibrates the greedy count on small spaces.

A variant with covers by arbitrary sets of diameter ``2 delta`` (one more
factor ``2^p``, smaller counts in high dimension) exists but is not
implemented here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, DomainError, ValidationError
from .measure import DiscreteMeasure, GroundSpace, check_exponent

COVER_SLACK = 1e-12
EXACT_COVER_MAX_N = 16
NON_EUCLIDEAN_LMAX_CAP = 32


# coverings ---------------------------------------------------------------


@dataclass(frozen=True)
class Covering:
    """Centers of radius-``radius`` balls and the center owning each point."""

    radius: float
    centers: np.ndarray
    assignment: np.ndarray
    distances: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.centers.size)


def _greedy_centers(space: GroundSpace, radius, first=0):
    r = float(radius) + COVER_SLACK
    if space.is_euclidean:
        c, _ = _kernels.farthest_point_cover_coords(np.ascontiguousarray(space.coords), r, int(first))
    else:
        c, _ = _kernels.farthest_point_cover_matrix(np.ascontiguousarray(space.dist), r, int(first))
    return np.asarray(c, dtype=np.int64)


def _assign(space, centers):
    d = space.pairwise(None, centers)
    k = np.argmin(d, axis=1)
    return centers[k], d[np.arange(space.n), k]


def greedy_covering(space: GroundSpace, delta: float) -> Covering:
    """Farthest-point covering: add the point farthest from the current
    centers until every point lies within ``delta``.

    The count is an upper bound on the covering number and is
    non-increasing in ``delta`` (the selection order does not depend on it).
    """
    if not delta > 0:
        raise ValidationError("covering radius must be > 0")
    centers = _greedy_centers(space, delta)
    owner, dist = _assign(space, centers)
    return Covering(float(delta), centers, owner, dist)


def exact_covering(space: GroundSpace, delta: float) -> Covering:
    """Minimum covering by exhaustive search over center subsets (N <= 16)."""
    if not delta > 0:
        raise ValidationError("covering radius must be > 0")
    n = space.n
    if n > EXACT_COVER_MAX_N:
        raise ValidationError(f"exact covering limited to N <= {EXACT_COVER_MAX_N}")
    within = space.distance_matrix() <= delta + COVER_SLACK
    for k in range(1, n + 1):
        for subset in itertools.combinations(range(n), k):
            if within[:, subset].any(axis=1).all():
                centers = np.array(subset, dtype=np.int64)
                owner, dist = _assign(space, centers)
                return Covering(float(delta), centers, owner, dist)
    raise AssertionError("unreachable: the full point set always covers")


# covering tree -----------------------------------------------------------


@dataclass
class UltrametricTree:
    """q-ary covering tree with the ground points as leaves.

    Nodes are ``(point, level)`` pairs. Level ``l <= l_max`` holds the
    centers of a ``q^-l * diam`` covering, level ``l_max + 1`` all points.
    A level-``l`` node hangs below level ``l - 1`` with an edge of length
    ``q^-(l-1) * diam``.
    """

    space: GroundSpace
    q: int
    l_max: int
    diam: float
    level: np.ndarray
    point: np.ndarray
    parent: np.ndarray
    edge: np.ndarray
    height: np.ndarray
    leaves: np.ndarray
    level_sizes: tuple

    @property
    def n_nodes(self) -> int:
        return int(self.level.size)

    @property
    def root(self) -> int:
        return 0

    def subtree_mass(self, weights) -> np.ndarray:
        """Mass below every node for leaf weights ``weights``."""
        m = np.zeros(self.n_nodes)
        m[self.leaves] = weights
        # nodes are stored level by level; sweep from the leaves upward
        ends = np.cumsum(self.level_sizes)
        for l in range(len(ends) - 1, 0, -1):
            nodes = np.arange(ends[l - 1], ends[l])
            np.add.at(m, self.parent[nodes], m[nodes])
        return m

    def lca(self, i, j) -> int:
        a, b = int(self.leaves[i]), int(self.leaves[j])
        while a != b:
            a, b = int(self.parent[a]), int(self.parent[b])
        return a

    def path_length(self, i, j) -> float:
        """Tree distance between ground points ``i`` and ``j``."""
        if i == j:
            return 0.0
        return 2.0 * float(self.height[self.lca(i, j)])


def level_height(q, l, l_max, diam):
    """Height of a level-``l`` node: ``sum_{j=l}^{l_max} q^-j diam``."""
    return diam * math.fsum(float(q) ** -j for j in range(l, l_max + 1))


def build_covering_tree(space: GroundSpace, q: int = 2, l_max: int | None = None) -> UltrametricTree:
    """Build the covering tree; the parent is the lowest-index center in range."""
    q = _check_q(q)
    if l_max is None:
        l_max = default_lmax(space, q)
    if l_max < 0 or int(l_max) != l_max:
        raise ConfigError("l_max must be an integer >= 0")
    l_max = int(l_max)
    diam = float(space.diameter)
    levels = []
    for l in range(l_max + 1):
        radius = diam * float(q) ** -l
        levels.append(np.sort(_greedy_centers(space, radius)))
    levels.append(np.arange(space.n, dtype=np.int64))

    level, point, parent, edge, height = [], [], [], [], []
    offset = [0]
    for l, pts in enumerate(levels):
        offset.append(offset[-1] + pts.size)
        h = 0.0 if l == l_max + 1 else level_height(q, l, l_max, diam)
        if l == 0:
            assert pts.size == 1
            par = np.array([-1])
            e = np.array([0.0])
        else:
            above = levels[l - 1]
            reach = diam * float(q) ** -(l - 1) + COVER_SLACK
            d = space.pairwise(pts, above)
            ok = d <= reach
            # centers are sorted, so the first admissible column is the
            # lowest-index center in range
            col = np.argmax(ok, axis=1)
            if not ok[np.arange(pts.size), col].all():
                raise AssertionError("covering left a point without a parent")
            par = offset[l - 1] + col
            e = np.full(pts.size, diam * float(q) ** -(l - 1))
        level.append(np.full(pts.size, l, dtype=np.int64))
        point.append(pts)
        parent.append(par.astype(np.int64))
        edge.append(e)
        height.append(np.full(pts.size, h))
    return UltrametricTree(
        space=space,
        q=q,
        l_max=l_max,
        diam=diam,
        level=np.concatenate(level),
        point=np.concatenate(point),
        parent=np.concatenate(parent),
        edge=np.concatenate(edge),
        height=np.concatenate(height),
        leaves=np.arange(offset[-2], offset[-1], dtype=np.int64),
        level_sizes=tuple(int(x.size) for x in levels),
    )


def tree_wasserstein(tree: UltrametricTree, r: DiscreteMeasure, s: DiscreteMeasure, p: float = 1.0) -> float:
    """Closed-form W_p on the ultrametric tree.

    ``(W_p^T)^p = 2^(p-1) sum_x (h(par x)^p - h(x)^p) |R_x - S_x|`` with
    ``R``, ``S`` the subtree masses. An upper bound on ``W_p(r, s)``.
    """
    p = check_exponent(p)
    for m in (r, s):
        if not m.space.same_as(tree.space):
            raise DomainError("measure does not live on the leaves of this tree")
    if tree.diam == 0.0:
        return 0.0
    delta = np.abs(tree.subtree_mass(r.weights) - tree.subtree_mass(s.weights))
    hp = tree.height ** p
    gap = hp[tree.parent[1:]] - hp[1:]
    total = 2.0 ** (p - 1) * math.fsum(gap * delta[1:])
    return max(total, 0.0) ** (1.0 / p)


# constants ---------------------------------------------------------------


def _check_q(q):
    if int(q) != q or q < 2:
        raise ConfigError(f"q must be an integer >= 2, got {q!r}")
    return int(q)


def _ilog_floor(N, base):
    """Largest ``l`` with ``base**l <= N`` (integer arithmetic)."""
    l, acc = 0, base
    while acc <= N:
        l += 1
        acc *= base
    return l


def default_lmax(space: GroundSpace, q: int = 2) -> int:
    """Euclidean: ``floor(log_q(N) / D)``. Otherwise the first level whose
    radius drops below the smallest positive distance, at most 32."""
    q = _check_q(q)
    diam = space.diameter
    if diam == 0.0:
        return 0
    if space.is_euclidean:
        return _ilog_floor(space.n, q ** space.dim)
    d = space.dist
    dmin = float(d[d > 0].min())
    l = 0
    while diam * float(q) ** -l >= dmin and l < NON_EUCLIDEAN_LMAX_CAP:
        l += 1
    return l


def constant_Eq(space: GroundSpace, p: float = 1.0, q: int = 2, l_max: int | None = None, covering_counts=None):
    """One-sample constant ``E_q`` with greedy covering counts.

    ``covering_counts`` may supply the per-level counts (length
    ``l_max + 1``) instead, e.g. exact ones.
    """
    p = check_exponent(p)
    q = _check_q(q)
    if l_max is None:
        l_max = default_lmax(space, q)
    diam = float(space.diameter)
    if diam == 0.0:
        return 0.0
    if covering_counts is None:
        covering_counts = [_greedy_centers(space, diam * float(q) ** -l).size for l in range(l_max + 1)]
    if len(covering_counts) != l_max + 1:
        raise ValidationError("need one covering count per level 0..l_max")
    terms = [float(q) ** (-(l_max + 1) * p) * math.sqrt(space.n)]
    terms += [float(q) ** (-l * p) * math.sqrt(c) for l, c in enumerate(covering_counts)]
    return 2.0 ** (p - 1) * float(q) ** (2 * p) * diam**p * math.fsum(terms)


def constant_CDp(D: int, p: float, N: int) -> float:
    """The size factor ``C_{D,p}(N)``; bounded in N only when ``D < 2p``."""
    if D < 1 or N < 1:
        raise ValidationError("need D >= 1 and N >= 1")
    p = check_exponent(p)
    return scaled_CDp(D, p, 2, N)


def scaled_CDp(D, p, q, N):
    """``C_{D,p}`` evaluated at branching number ``q`` (equals it at q = 2)."""
    pp = D / 2.0 - p
    if pp < 0:
        return 1.0 / (1.0 - float(q) ** pp)
    if pp == 0:
        return 2.0 + math.log(N) / (D * math.log(q))
    qp = float(q) ** pp
    return (2.0 * qp - 1.0) * float(N) ** (0.5 - p / D) / (qp - 1.0)


def euclidean_E2_bound(D: int, p: float, N: int, diam: float) -> float:
    """Dimension-explicit replacement for ``E_2`` on subsets of R^D."""
    p = check_exponent(p)
    if diam == 0.0:
        return 0.0
    return D ** (p / 2.0) * 2.0 ** (3 * p - 1) * diam**p * constant_CDp(D, p, N)


# error bounds ------------------------------------------------------------


def mean_error_bound(E_q: float, p: float, S: int) -> float:
    """``E|W_hat - W| <= 2 E_q^(1/p) S^(-1/(2p))``."""
    p = check_exponent(p)
    _check_S(S)
    if E_q == 0:
        return 0.0
    return 2.0 * E_q ** (1.0 / p) * float(S) ** (-1.0 / (2 * p))


def mse_bound(E_q: float, p: float, S: int) -> float:
    """``E|W_hat - W|^2 <= 18 E_q^(2/p) S^(-1/p)``."""
    p = check_exponent(p)
    _check_S(S)
    if E_q == 0:
        return 0.0
    return 18.0 * E_q ** (2.0 / p) * float(S) ** (-1.0 / p)


def concentration_tail(z: float, S: int, B: int, diam: float, p: float) -> float:
    """Bound on ``P(|W_hat - W| >= z)``, capped at one.

    ``min(1, 2 exp(-S B z^(2p) / (8 diam^(2p))))``.
    """
    p = check_exponent(p)
    _check_S(S)
    if B < 1:
        raise ValidationError("B must be >= 1")
    if z < 0:
        raise ValidationError("z must be >= 0")
    if diam == 0.0:
        # the estimator is exactly 0 on a one-point geometry
        return 1.0 if z == 0 else 0.0
    return min(1.0, 2.0 * math.exp(-S * B * (z / diam) ** (2 * p) / 8.0))


def _check_S(S):
    if S < 1:
        raise ValidationError("S must be >= 1")


# q = 2 optimality ----------------------------------------------------------


@dataclass(frozen=True)
class QSweep:
    D: int
    p: float
    N: int
    q_values: tuple
    objective: tuple
    argmin: int

    @property
    def holds(self) -> bool:
        return self.argmin == 2


def check_q2_optimality(p, D, N, q_range=range(2, 65), strict=False) -> QSweep:
    """Minimise ``q^(2p) * C_{D,p}(q, N)`` over ``q_range``.

    With ``strict=True`` an ``AssertionError`` is raised unless the
    minimiser is ``q = 2``.
    """
    qs = tuple(int(q) for q in q_range)
    if not qs:
        raise ValidationError("empty q range")
    vals = tuple(float(q) ** (2 * p) * scaled_CDp(D, p, q, N) for q in qs)
    arg = qs[int(np.argmin(vals))]
    out = QSweep(int(D), float(p), int(N), qs, vals, arg)
    if strict and not out.holds:
        raise AssertionError(f"q=2 is not optimal for D={D}, p={p}, N={N}: argmin {arg}")
    return out


LOW_DIM_CAP = 2.0 + math.sqrt(2.0)
HIGH_DIM_CAP = 3.0 + math.sqrt(2.0)


def integer_case_caps(D_values, p_values, q_values):
    """Largest branch factors over integer ``(D, p)`` and ``q``.

    Returns ``(max 1/(1-q^p'), max 2 + 1/(q^p'-1))`` over the ``p' < 0``
    and ``p' > 0`` cases respectively (``nan`` if a case never occurs).
    """
    lo, hi = [], []
    for D, p, q in itertools.product(D_values, p_values, q_values):
        pp = D / 2.0 - p
        if pp < 0:
            lo.append(1.0 / (1.0 - float(q) ** pp))
        elif pp > 0:
            hi.append(2.0 + 1.0 / (float(q) ** pp - 1.0))
    return (max(lo) if lo else math.nan, max(hi) if hi else math.nan)


def bound_report(r: DiscreteMeasure, s: DiscreteMeasure, p: float = 1.0, S: int = 1000, B: int = 1, q: int = 2,
                 l_max: int | None = None, z_values=None) -> dict:
    """All bound quantities for one instance as a JSON-ready dict."""
    space = r.space
    p = check_exponent(p)
    if l_max is None:
        l_max = default_lmax(space, q)
    diam = float(space.diameter)
    Eq = constant_Eq(space, p, q, l_max)
    if z_values is None:
        z_values = [diam * f for f in (0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0)]
    tree = build_covering_tree(space, q, l_max)
    D = space.dim
    return {
        "N": space.n,
        "D": D,
        "diam": diam,
        "p": p,
        "q": q,
        "l_max": int(l_max),
        "S": int(S),
        "B": int(B),
        "E_q": Eq,
        "C_DpN": constant_CDp(D, p, space.n) if D > 0 else None,
        "euclidean_E2": euclidean_E2_bound(D, p, space.n, diam) if D > 0 else None,
        "mean_bound": mean_error_bound(Eq, p, S),
        "mse_bound": mse_bound(Eq, p, S),
        "tail": [{"z": float(z), "bound": concentration_tail(float(z), S, B, diam, p)} for z in z_values],
        "tree_value": tree_wasserstein(tree, r, s, p),
        "tree_level_sizes": list(tree.level_sizes),
    }
