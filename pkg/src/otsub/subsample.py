"""Randomized subsampling estimator of the Wasserstein distance.

Each repetition draws ``S`` i.i.d. points from each measure, forms the two
empirical measures and solves the small transport problem between their
supports. The estimate is the plain mean over ``B`` repetitions.

Random streams: repetition ``i`` of role ``m`` (0 for ``r``, 1 for ``s``)
draws from ``default_rng(SeedSequence([seed, i, m]))``, so every
repetition is reproducible on its own and independent of scheduling.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .entropic import SinkhornConfig, sinkhorn_dense
from .errors import ConfigError, OTError, RepetitionError
from .exact.simplex import solve_dense
from .measure import DiscreteMeasure, check_exponent, power_cost, require_same_space

BACKENDS = ("simplex", "sinkhorn")
ROLE_R, ROLE_S = 0, 1


@dataclass(frozen=True)
class SubsampleParams:
    """Sample size ``S``, repetitions ``B``, base seed and back-end.

    ``workers > 1`` runs repetitions on a thread pool; results are merged
    by repetition index so the output does not depend on it.
    """

    S: int = 1000
    B: int = 1
    seed: int = 0
    backend: str = "simplex"
    sinkhorn: SinkhornConfig | None = None
    workers: int = 1

    def __post_init__(self):
        if int(self.S) != self.S or self.S < 1:
            raise ConfigError(f"S must be an integer >= 1, got {self.S!r}")
        if int(self.B) != self.B or self.B < 1:
            raise ConfigError(f"B must be an integer >= 1, got {self.B!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass
class SubsampleResult:
    estimate: float
    repetition_values: np.ndarray
    times: np.ndarray = field(repr=False)
    seeds: list = field(repr=False)


def substream(seed, repetition, role):
    """Generator for one (repetition, role) pair."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(repetition), int(role)]))


def sample_counts(weights, S, rng):
    """Multinomial counts of ``S`` draws over ``weights`` (int64 vector)."""
    w = np.asarray(weights, dtype=np.float64)
    # numpy's multinomial is the sequential binomial chain and wants the
    # probabilities to sum to at most one
    total = w.sum()
    if total > 1.0:
        w = w / total
    return rng.multinomial(int(S), w).astype(np.int64)


def empirical_measure(r: DiscreteMeasure, S: int, rng) -> DiscreteMeasure:
    """Empirical measure of ``S`` i.i.d. draws from ``r``; weights ``k/S``."""
    if S < 1:
        raise ConfigError("S must be >= 1")
    k = sample_counts(r.weights, S, rng)
    return DiscreteMeasure(k / float(S), r.space)


def _counts_value(space, kr, ks, S, p, backend, cfg):
    """W_p between the empirical measures with integer counts ``kr``, ``ks``."""
    ir = np.flatnonzero(kr)
    js = np.flatnonzero(ks)
    C = power_cost(space.pairwise(ir, js), p)
    if backend == "simplex":
        # integer marginals keep the basic flows exact
        res = solve_dense(kr[ir].astype(np.float64), ks[js].astype(np.float64), C)
        cost = res.cost / S
    else:
        P = sinkhorn_dense(kr[ir] / S, ks[js] / S, C, cfg)[0]
        cost = float(np.sum(P * C))
    return max(cost, 0.0) ** (1.0 / p)


def repetition_value(r, s, p, params: SubsampleParams, i):
    """One repetition of the estimator: ``(value, seconds)``."""
    kr = sample_counts(r.weights, params.S, substream(params.seed, i, ROLE_R))
    ks = sample_counts(s.weights, params.S, substream(params.seed, i, ROLE_S))
    cfg = params.sinkhorn or SinkhornConfig()
    t0 = time.perf_counter()
    v = _counts_value(r.space, kr, ks, params.S, p, params.backend, cfg)
    return v, time.perf_counter() - t0


def approximate(r: DiscreteMeasure, s: DiscreteMeasure, p: float, params: SubsampleParams) -> SubsampleResult:
    """Mean of ``B`` empirical transport values at sample size ``S``.

    Raises :class:`RepetitionError` naming the failing repetition if the
    back-end fails.
    """
    require_same_space(r, s)
    p = check_exponent(p)

    def run(i):
        try:
            return repetition_value(r, s, p, params, i)
        except OTError as exc:
            raise RepetitionError(i, exc) from exc

    if params.workers > 1 and params.B > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            out = list(pool.map(run, range(params.B)))
    else:
        out = [run(i) for i in range(params.B)]
    vals = np.array([v for v, _ in out])
    times = np.array([t for _, t in out])
    seeds = [(int(params.seed), i) for i in range(params.B)]
    return SubsampleResult(float(np.mean(vals)), vals, times, seeds)


def one_sample_deviation(r: DiscreteMeasure, p: float, S: int, reps: int, seed: int = 0):
    """``W_p^p(r_S, r)`` for ``reps`` independent empirical measures ``r_S``.

    Exact values by the transportation simplex; returns a length-``reps``
    array of p-th powers.
    """
    p = check_exponent(p)
    space = r.space
    js = r.support
    b = r.weights[js]
    out = np.empty(reps)
    for i in range(reps):
        k = sample_counts(r.weights, S, substream(seed, i, ROLE_R))
        ir = np.flatnonzero(k)
        C = power_cost(space.pairwise(ir, js), p)
        res = solve_dense(k[ir] / float(S), b, C)
        out[i] = max(res.cost, 0.0)
    return out
