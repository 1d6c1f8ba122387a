"""Seeded instance generators: grid images and point clouds.

Grid classes
    ``white-noise``       i.i.d. uniform(0, 1] pixel masses.
    ``cauchy-density``    bivariate Cauchy density ``(1 + z^T A^{-1} z)^{-3/2}``
                          with a uniform random center on the grid and scale
                          matrix ``A = Q diag(l1^2, l2^2) Q^T``; semi-axes
                          ``l1, l2`` log-uniform in ``[R/16, R/4]``, ``Q`` a
                          uniform rotation. The draws are made in unit
                          coordinates and do not depend on ``R``, so one seed
                          gives the same density at every resolution.
    ``classic-surrogate`` fixed smooth field (five Gaussian bumps on a tilted
                          plane, coordinates scaled to the unit square) times
                          seeded speckle ``1 + 0.5 U``, ``U ~ uniform[0, 1)``.
                          A stand-in for natural test images.

Point clouds put ``N`` i.i.d. uniform points in ``[0, 1]^D``. The
``dirichlet`` class draws flat Dirichlet masses; image classes take pixel
values of a ``sqrt(N) x sqrt(N)`` image (D=2), or of the product of the
image with its column sums (D=3) or with itself (D=4), restricted to ``N``
product cells picked uniformly without replacement.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ValidationError
from .measure import DiscreteMeasure, GroundSpace

GRID_CLASSES = ("white-noise", "cauchy-density", "classic-surrogate")
CLOUD_CLASSES = ("dirichlet", "cauchy-density", "classic-surrogate")

_BUMPS = (
    # (cx, cy, sx, sy, amplitude) on the unit square
    (0.30, 0.35, 0.10, 0.18, 1.0),
    (0.70, 0.25, 0.15, 0.08, 0.8),
    (0.55, 0.70, 0.20, 0.12, 0.6),
    (0.20, 0.80, 0.07, 0.07, 0.9),
    (0.85, 0.80, 0.09, 0.15, 0.5),
)


def _rng(seed, *tags):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *tags]))


_TAG_IMAGE, _TAG_CLOUD, _TAG_LIFT = 1, 2, 3
_CLASS_TAG = {"white-noise": 11, "cauchy-density": 12, "classic-surrogate": 13, "dirichlet": 14}


def grid_image(cls, R, seed):
    """Unnormalized ``(R, R)`` positive image of the given class."""
    if R < 2:
        raise ValidationError("grid resolution must be >= 2")
    if cls not in GRID_CLASSES:
        raise ValidationError(f"unknown grid class {cls!r}")
    if cls == "cauchy-density":
        rng = _rng(seed, _TAG_IMAGE, _CLASS_TAG[cls])
    else:
        rng = _rng(seed, _TAG_IMAGE, _CLASS_TAG[cls], R)
    if cls == "white-noise":
        return 1.0 - rng.random((R, R))
    ii, jj = np.meshgrid(np.arange(1, R + 1, dtype=float), np.arange(1, R + 1, dtype=float), indexing="ij")
    if cls == "cauchy-density":
        center, A_inv = _cauchy_draw(rng, R)
        z0 = ii - center[0]
        z1 = jj - center[1]
        q = A_inv[0, 0] * z0 * z0 + 2 * A_inv[0, 1] * z0 * z1 + A_inv[1, 1] * z1 * z1
        return (1.0 + q) ** -1.5
    u = (ii - 0.5) / R
    v = (jj - 0.5) / R
    field = 0.15 + 0.1 * u + 0.05 * v
    for cx, cy, sx, sy, amp in _BUMPS:
        field = field + amp * np.exp(-0.5 * (((u - cx) / sx) ** 2 + ((v - cy) / sy) ** 2))
    return field * (1.0 + 0.5 * rng.random((R, R)))


def _inverse_scale(axes, angle):
    c, s = math.cos(angle), math.sin(angle)
    Q = np.array([[c, -s], [s, c]])
    return Q @ np.diag(1.0 / axes**2) @ Q.T


def _cauchy_draw(rng, R):
    # unit-square draws mapped onto pixel coordinates 1..R
    center = 1.0 + (R - 1) * rng.random(2)
    axes = R * np.exp(rng.uniform(math.log(1 / 16), math.log(1 / 4), size=2))
    return center, _inverse_scale(axes, rng.uniform(0.0, math.pi))


def cauchy_parameters(R, seed):
    """Center and inverse scale matrix used by ``grid_image('cauchy-density', R, seed)``."""
    return _cauchy_draw(_rng(seed, _TAG_IMAGE, _CLASS_TAG["cauchy-density"]), R)


def gen_grid(cls, R, seed):
    """Grid space ``{1..R}^2`` and one normalized image measure on it."""
    space = GroundSpace.grid(R)
    img = grid_image(cls, R, seed)
    return space, DiscreteMeasure.normalized(img.ravel(), space)


def product_lift(img, D):
    """Flattened product masses lifting an ``(R, R)`` image to ``R^D`` cells.

    D=2 is the image itself, D=3 the product with its column sums,
    D=4 the product with itself.
    """
    g = np.asarray(img, dtype=np.float64).ravel()
    if D == 2:
        return g.copy()
    if D == 3:
        return np.outer(g, np.asarray(img).sum(axis=0)).ravel()
    if D == 4:
        return np.outer(g, g).ravel()
    raise ValidationError("product lift defined for D in {2, 3, 4}")


def gen_point_cloud(cls, D, N, seed):
    """Point cloud space on ``[0,1]^D`` with two measures."""
    if D not in (2, 3, 4):
        raise ValidationError("point clouds support D in {2, 3, 4}")
    if N < 2:
        raise ValidationError("point clouds need N >= 2")
    if cls not in CLOUD_CLASSES:
        raise ValidationError(f"unknown point-cloud class {cls!r}")
    rng = _rng(seed, _TAG_CLOUD, _CLASS_TAG[cls], D, N)
    space = GroundSpace.from_coords(rng.random((N, D)))
    if cls == "dirichlet":
        w = [flat_dirichlet(rng, N) for _ in range(2)]
        return space, DiscreteMeasure(w[0], space), DiscreteMeasure(w[1], space)
    R = math.isqrt(N)
    if D == 2:
        if R * R != N:
            raise ValidationError(f"image-derived clouds at D=2 need a square N, got {N}")
        cells = None
    else:
        R = R if R * R == N else R + 1
        cells = _rng(seed, _TAG_LIFT, D, N).choice(R**D, size=N, replace=False)
        cells.sort()
    out = []
    for pair in (0, 1):
        img = grid_image(cls, R, int(seed) + pair)
        mass = product_lift(img, D)
        mass = mass if cells is None else mass[cells]
        out.append(DiscreteMeasure.normalized(mass, space))
    return space, out[0], out[1]


def flat_dirichlet(rng, n):
    """Dirichlet(1, ..., 1) via normalized i.i.d. exponentials."""
    e = rng.standard_exponential(n)
    return e / e.sum()


@dataclass(frozen=True)
class InstanceSpec:
    """Description of one two-measure instance.

    Grid instances use images with seeds ``seed`` and ``seed + 1`` for the
    two measures; the default corpus pairs seeds 1 and 2.
    """

    family: str = "grid"
    cls: str = "cauchy-density"
    R: int = 32
    D: int = 2
    N: int = 0
    seed: int = 1

    def __post_init__(self):
        if self.family not in ("grid", "point-cloud"):
            raise ValidationError(f"unknown family {self.family!r}")
        if self.family == "grid":
            if self.cls not in GRID_CLASSES:
                raise ValidationError(f"unknown grid class {self.cls!r}")
            if self.R < 2:
                raise ValidationError("grid resolution must be >= 2")
        else:
            if self.cls not in CLOUD_CLASSES:
                raise ValidationError(f"unknown point-cloud class {self.cls!r}")
            if self.D not in (2, 3, 4) or self.N < 2:
                raise ValidationError("point clouds need D in {2,3,4} and N >= 2")

    @property
    def size(self):
        return self.R * self.R if self.family == "grid" else self.N

    @property
    def dim(self):
        return 2 if self.family == "grid" else self.D

    @property
    def instance_id(self):
        if self.family == "grid":
            return f"grid-{self.cls}-R{self.R}-s{self.seed}"
        return f"cloud-{self.cls}-D{self.D}-N{self.N}-s{self.seed}"

    def build(self):
        """``(space, r, s)``."""
        if self.family == "grid":
            space, r = gen_grid(self.cls, self.R, self.seed)
            _, s = gen_grid(self.cls, self.R, self.seed + 1)
            return space, r, DiscreteMeasure(s.weights, space)
        return gen_point_cloud(self.cls, self.D, self.N, self.seed)

    def to_dict(self):
        d = asdict(self)
        d["class"] = d.pop("cls")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "class" in d:
            d["cls"] = d.pop("class")
        return cls(**d)


def instance_digest(r, s):
    """SHA-256 over the instance bytes, for determinism checks."""
    h = hashlib.sha256()
    space = r.space
    h.update((space.coords if space.is_euclidean else space.dist).tobytes())
    h.update(r.weights.tobytes())
    h.update(s.weights.tobytes())
    return h.hexdigest()
