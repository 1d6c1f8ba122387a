"""Ground spaces, probability vectors, cost matrices and transport plans.

Everything here is immutable after construction: arrays are copied and
flagged read-only, so instances can be shared freely between threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import InvalidExponentError, SpaceMismatchError, ValidationError

MASS_TOL = 1e-9
_EXHAUSTIVE_TRIANGLE_N = 64
_SAMPLED_TRIPLES = 20000


def _frozen(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


class GroundSpace:
    """Finite metric space ``{0, ..., N-1}``.

    Geometry is either Euclidean coordinates (``coords``, shape ``(N, D)``)
    or an explicit distance matrix (``dist``, shape ``(N, N)``). Exactly one
    must be given. Explicit matrices are checked for symmetry, zero
    diagonal, nonnegativity and the triangle inequality (all triples for
    ``N <= 64``, a fixed random sample of triples above that).
    """

    def __init__(self, coords=None, dist=None, *, validate=True, grid_shape=None):
        if (coords is None) == (dist is None):
            raise ValidationError("give exactly one of coords or dist")
        if coords is not None:
            coords = np.asarray(coords, dtype=np.float64)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.ndim != 2 or coords.shape[0] < 1 or coords.shape[1] < 1:
                raise ValidationError("coords must be an (N, D) array with N, D >= 1")
            if not np.all(np.isfinite(coords)):
                raise ValidationError("coords must be finite")
            self._coords = _frozen(coords)
            self._dist = None
        else:
            dist = np.asarray(dist, dtype=np.float64)
            if dist.ndim != 2 or dist.shape[0] != dist.shape[1] or dist.shape[0] < 1:
                raise ValidationError("dist must be a square (N, N) array with N >= 1")
            if validate:
                _check_metric(dist)
            self._coords = None
            self._dist = _frozen(dist)
        self.grid_shape = grid_shape

    # construction helpers -------------------------------------------------
    @classmethod
    def from_coords(cls, coords, grid_shape=None):
        return cls(coords=coords, grid_shape=grid_shape)

    @classmethod
    def from_distances(cls, dist, validate=True):
        return cls(dist=dist, validate=validate)

    @classmethod
    def grid(cls, R):
        """The regular grid ``{1..R} x {1..R}`` in row-major pixel order."""
        if R < 1:
            raise ValidationError("grid resolution must be >= 1")
        ii, jj = np.meshgrid(np.arange(1, R + 1), np.arange(1, R + 1), indexing="ij")
        pts = np.column_stack([ii.ravel(), jj.ravel()]).astype(np.float64)
        return cls(coords=pts, grid_shape=(R, R))

    # basic properties -----------------------------------------------------
    @property
    def n(self) -> int:
        return (self._coords if self._coords is not None else self._dist).shape[0]

    @property
    def dim(self) -> int:
        """Euclidean dimension D, or 0 for explicit-matrix geometry."""
        return 0 if self._coords is None else self._coords.shape[1]

    @property
    def is_euclidean(self) -> bool:
        return self._coords is not None

    @property
    def coords(self):
        return self._coords

    @property
    def dist(self):
        return self._dist

    @cached_property
    def diameter(self) -> float:
        if self._dist is not None:
            return float(self._dist.max())
        if self.grid_shape is not None:
            lo, hi = self._coords.min(axis=0), self._coords.max(axis=0)
            return float(np.sqrt(np.sum((hi - lo) ** 2)))
        return float(_kernels.max_pairwise_euclidean(self._coords))

    def pairwise(self, rows=None, cols=None):
        """Distance block between point subsets (all points when ``None``)."""
        if self._dist is not None:
            d = self._dist
            if rows is not None:
                d = d[np.asarray(rows)]
            if cols is not None:
                d = d[:, np.asarray(cols)]
            return np.array(d)
        x = self._coords if rows is None else self._coords[np.asarray(rows)]
        y = self._coords if cols is None else self._coords[np.asarray(cols)]
        return _kernels.pairwise_euclidean(np.ascontiguousarray(x), np.ascontiguousarray(y))

    def distance_matrix(self):
        return self.pairwise()

    def same_as(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, GroundSpace) or self.n != other.n or self.dim != other.dim:
            return False
        if self._coords is not None:
            return bool(np.array_equal(self._coords, other._coords))
        return bool(np.array_equal(self._dist, other._dist))

    def __repr__(self):
        kind = f"D={self.dim}" if self.is_euclidean else "explicit"
        return f"GroundSpace(N={self.n}, {kind})"


def _check_metric(d):
    n = d.shape[0]
    if not np.all(np.isfinite(d)):
        raise ValidationError("distance matrix must be finite")
    if np.any(d < 0):
        raise ValidationError("distance matrix has negative entries")
    if np.any(np.diag(d) != 0):
        raise ValidationError("distance matrix must have a zero diagonal")
    scale = max(1.0, float(d.max()))
    if not np.allclose(d, d.T, rtol=0, atol=1e-12 * scale):
        raise ValidationError("distance matrix is not symmetric")
    slack = 1e-9 * scale
    if n <= _EXHAUSTIVE_TRIANGLE_N:
        # d(i,k) <= d(i,j) + d(j,k) for all i, j, k
        viol = d[:, None, :] - (d[:, :, None] + d[None, :, :])
        if viol.max() > slack:
            raise ValidationError("distance matrix violates the triangle inequality")
    else:
        rng = np.random.default_rng(0)
        i, j, k = rng.integers(0, n, size=(3, _SAMPLED_TRIPLES))
        if np.max(d[i, k] - d[i, j] - d[j, k]) > slack:
            raise ValidationError("distance matrix violates the triangle inequality")


class DiscreteMeasure:
    """Probability vector over the points of a :class:`GroundSpace`."""

    def __init__(self, weights, space: GroundSpace):
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape[0] != space.n:
            raise ValidationError(f"weights have length {w.shape[0]}, space has N={space.n}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("weights must be finite and nonnegative")
        total = math.fsum(w)
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(
                f"weights sum to {total!r}; call DiscreteMeasure.normalized() to rescale"
            )
        self.weights = _frozen(w)
        self.space = space

    @classmethod
    def normalized(cls, weights, space):
        """Rescale nonnegative ``weights`` to total mass one."""
        w = np.asarray(weights, dtype=np.float64).ravel()
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite and nonnegative")
        total = math.fsum(w)
        if total <= 0:
            raise ValidationError("cannot normalize a zero vector")
        return cls(w / total, space)

    @classmethod
    def dirac(cls, index, space):
        w = np.zeros(space.n)
        w[index] = 1.0
        return cls(w, space)

    @classmethod
    def uniform(cls, space):
        return cls(np.full(space.n, 1.0 / space.n), space)

    @property
    def n(self):
        return self.weights.shape[0]

    @cached_property
    def support(self):
        idx = np.flatnonzero(self.weights > 0)
        idx.flags.writeable = False
        return idx

    def __repr__(self):
        return f"DiscreteMeasure(N={self.n}, support={self.support.size})"


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Dense ``d^p`` matrix over a space."""

    entries: np.ndarray
    p: float

    def __post_init__(self):
        if self.entries.flags.writeable:
            object.__setattr__(self, "entries", _frozen(self.entries))


def check_exponent(p):
    p = float(p)
    if not np.isfinite(p) or p < 1:
        raise InvalidExponentError(f"exponent p must be >= 1, got {p}")
    return p


def make_cost(space: GroundSpace, p: float) -> CostMatrix:
    p = check_exponent(p)
    d = space.distance_matrix()
    return CostMatrix(power_cost(d, p), p)


def power_cost(d, p):
    """Elementwise ``d**p`` with the integer exponents done by multiplication."""
    if p == 1:
        return np.array(d, dtype=np.float64)
    if p == 2:
        return d * d
    if p == 3:
        return d * d * d
    return np.power(d, p)


class TransportPlan:
    """Coupling stored as coordinate triplets over the ground space.

    ``rows``, ``cols`` index points of the space, ``mass`` their coupling
    weight. The dense ``(N, N)`` matrix is built on demand by ``coupling``.
    """

    def __init__(self, n, rows, cols, mass, cost, p):
        self.n = int(n)
        self.rows = _frozen(rows, np.int64)
        self.cols = _frozen(cols, np.int64)
        self.mass = _frozen(mass)
        self.cost = float(max(cost, 0.0))
        self.p = float(p)

    @property
    def value(self) -> float:
        return self.cost ** (1.0 / self.p)

    @property
    def coupling(self):
        w = np.zeros((self.n, self.n))
        np.add.at(w, (self.rows, self.cols), self.mass)
        return w

    def row_sums(self):
        return np.bincount(self.rows, weights=self.mass, minlength=self.n)

    def col_sums(self):
        return np.bincount(self.cols, weights=self.mass, minlength=self.n)

    def __repr__(self):
        return f"TransportPlan(N={self.n}, nnz={self.mass.size}, value={self.value:.6g})"


def require_same_space(r: DiscreteMeasure, s: DiscreteMeasure):
    if not r.space.same_as(s.space):
        raise SpaceMismatchError("measures live on different ground spaces")


def wasserstein(r: DiscreteMeasure, s: DiscreteMeasure, p: float = 1.0, solver="simplex", **opts):
    """p-Wasserstein distance between two measures on one space.

    ``solver`` is one of ``"simplex"`` (transportation simplex, default),
    ``"sinkhorn"`` (entropic plan, no exactness guarantee), ``"lp"``
    (dense tableau oracle, tiny problems only) or ``"1d"`` (sorted
    coupling, collinear spaces only). Returns ``(value, plan)``; the 1-D
    route has no plan and returns ``None`` in its place.
    """
    p = check_exponent(p)
    require_same_space(r, s)
    if solver == "simplex":
        from .exact import solve_transport_simplex

        plan = solve_transport_simplex(r, s, p, **opts)
        return plan.value, plan
    if solver == "lp":
        from .exact import brute_force_lp

        plan = brute_force_lp(r, s, p)
        return plan.value, plan
    if solver == "1d":
        from .exact import sorted_coupling_1d

        return sorted_coupling_1d(r, s, p), None
    if solver == "sinkhorn":
        from .entropic import SinkhornConfig, solve_sinkhorn

        cfg = opts.pop("config", None) or SinkhornConfig(**opts)
        res = solve_sinkhorn(r, s, p, cfg)
        return res.value, res.plan
    raise ValidationError(f"unknown solver {solver!r}")


# instance files -------------------------------------------------------------


def instance_to_dict(r: DiscreteMeasure, s: DiscreteMeasure, meta=None):
    require_same_space(r, s)
    space = r.space
    doc = {"n": space.n, "d": space.dim}
    if space.is_euclidean:
        doc["coords"] = space.coords.tolist()
    else:
        doc["dist"] = space.dist.tolist()
    doc["r"] = r.weights.tolist()
    doc["s"] = s.weights.tolist()
    if space.grid_shape is not None:
        doc["grid"] = list(space.grid_shape)
    if meta:
        doc["meta"] = dict(meta)
    return doc


def instance_from_dict(doc):
    n, d = int(doc["n"]), int(doc["d"])
    if d == 0:
        if "dist" not in doc:
            raise ValidationError("d=0 instance needs a 'dist' matrix")
        space = GroundSpace(dist=doc["dist"])
    else:
        if "coords" not in doc:
            raise ValidationError("instance with d>0 needs 'coords'")
        coords = np.asarray(doc["coords"], dtype=np.float64)
        if coords.shape != (n, d):
            raise ValidationError(f"coords have shape {coords.shape}, expected {(n, d)}")
        grid = doc.get("grid")
        space = GroundSpace(coords=coords, grid_shape=tuple(grid) if grid else None)
    if space.n != n:
        raise ValidationError(f"declared n={n} but geometry has {space.n} points")
    return DiscreteMeasure(doc["r"], space), DiscreteMeasure(doc["s"], space)


def write_instance(path, r, s, meta=None):
    Path(path).write_text(json.dumps(instance_to_dict(r, s, meta)))


def read_instance(path):
    doc = json.loads(Path(path).read_text())
    return instance_from_dict(doc)
