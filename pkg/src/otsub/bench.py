"""Experiment harness: full-problem baselines vs the subsampling estimator."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .entropic import GRID_ROUTE_MIN_N, SinkhornConfig, solve_sinkhorn, with_epsilon
from .errors import ConfigError, FitError, ValidationError
from .exact import solve_transport_simplex
from .instances import InstanceSpec
from .subsample import BACKENDS, SubsampleParams, approximate

CSV_COLUMNS = (
    "instance_id", "family", "class", "N", "D", "p", "backend", "S", "B", "repetition", "seed",
    "value_exact", "value_approx", "rel_error", "signed_rel_error", "time_exact_ms", "time_approx_ms",
    "baseline_skipped",
)
TIMING_COLUMNS = ("time_exact_ms", "time_approx_ms")
SUMMARY_COLUMNS = (
    "family", "class", "N", "backend", "p", "S", "B", "count", "mean_rel_error", "mean_signed_rel_error",
    "geomean_rel_runtime",
)
DEFAULT_EXACT_CAP = 64 * 64


@dataclass
class ExperimentConfig:
    instances: list = field(default_factory=lambda: [InstanceSpec()])
    p_values: list = field(default_factory=lambda: [2.0])
    S_values: list = field(default_factory=lambda: [100, 500, 1000, 2000, 4000])
    B_values: list = field(default_factory=lambda: [1])
    reps: int = 5
    backends: list = field(default_factory=lambda: ["simplex"])
    base_seed: int = 0
    exact_cap: int = DEFAULT_EXACT_CAP
    workers: int = 1
    timing_strict: bool = False

    def __post_init__(self):
        self.instances = [i if isinstance(i, InstanceSpec) else InstanceSpec.from_dict(i) for i in self.instances]
        for name in ("instances", "p_values", "S_values", "B_values", "backends"):
            if not list(getattr(self, name)):
                raise ConfigError(f"{name} must not be empty")
        if any(p < 1 for p in self.p_values):
            raise ConfigError("every p must be >= 1")
        if any(int(S) != S or S < 1 for S in self.S_values):
            raise ConfigError("every S must be an integer >= 1")
        if any(int(B) != B or B < 1 for B in self.B_values):
            raise ConfigError("every B must be an integer >= 1")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        bad = [b for b in self.backends if b not in BACKENDS]
        if bad:
            raise ConfigError(f"unknown backends {bad}; choose from {BACKENDS}")
        if self.exact_cap < 1 or self.workers < 1:
            raise ConfigError("exact_cap and workers must be >= 1")
        self.p_values = [float(p) for p in self.p_values]
        self.S_values = [int(S) for S in self.S_values]
        self.B_values = [int(B) for B in self.B_values]

    def to_dict(self):
        d = asdict(self)
        d["instances"] = [i.to_dict() for i in self.instances]
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ExperimentRecord:
    instance_id: str
    family: str
    cls: str
    N: int
    D: int
    p: float
    backend: str
    S: int
    B: int
    repetition: int
    seed: int
    value_exact: float | None
    value_approx: float
    rel_error: float | None
    signed_rel_error: float | None
    time_exact_ms: float | None
    time_approx_ms: float
    baseline_skipped: bool = False

    @property
    def rel_runtime(self):
        if self.time_exact_ms is None or not self.time_exact_ms > 0:
            return None
        return self.time_approx_ms / self.time_exact_ms

    def row(self):
        vals = [getattr(self, "cls" if c == "class" else c) for c in CSV_COLUMNS]
        return [_fmt(v) for v in vals]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class Baseline:
    value: float | None
    time_ms: float | None
    epsilon: float | None = None

    @property
    def skipped(self):
        return self.value is None


def job_seed(base_seed, job_index):
    """64-bit seed for grid cell ``job_index``; independent of scheduling."""
    return int(np.random.SeedSequence([int(base_seed), int(job_index)]).generate_state(1, np.uint64)[0])


def _sinkhorn_feasible(spec: InstanceSpec, p, cap):
    # the separable grid kernel never forms the N x N cost
    if spec.family == "grid" and p == 2 and spec.size > GRID_ROUTE_MIN_N:
        return True
    return spec.size <= cap


def compute_baseline(spec, r, s, p, backend, cap, sinkhorn_cfg=None) -> Baseline:
    """Full-problem value and wall time of ``backend`` (``None`` above the cap)."""
    if backend == "simplex":
        if spec.size > cap:
            return Baseline(None, None)
        t0 = time.perf_counter()
        value = solve_transport_simplex(r, s, p).value
        return Baseline(value, 1e3 * (time.perf_counter() - t0))
    if not _sinkhorn_feasible(spec, p, cap):
        return Baseline(None, None)
    t0 = time.perf_counter()
    res = solve_sinkhorn(r, s, p, sinkhorn_cfg or SinkhornConfig(), return_plan=False)
    return Baseline(res.value, 1e3 * (time.perf_counter() - t0), res.epsilon)


def warm_up():
    """Run each kernel once so compilation never lands inside a timed solve."""
    from .measure import DiscreteMeasure, GroundSpace

    space = GroundSpace.from_coords([[0.0], [1.0], [3.0]])
    r = DiscreteMeasure([0.5, 0.5, 0.0], space)
    s = DiscreteMeasure([0.0, 0.25, 0.75], space)
    solve_transport_simplex(r, s, 2.0)
    approximate(r, s, 2.0, SubsampleParams(S=4, B=1, seed=0))


def _jobs(config: ExperimentConfig):
    k = 0
    for ii, spec in enumerate(config.instances):
        for backend in config.backends:
            for p in config.p_values:
                for S in config.S_values:
                    for B in config.B_values:
                        for rep in range(config.reps):
                            yield k, ii, backend, p, S, B, rep
                            k += 1


def run_experiment(config: ExperimentConfig, sinkhorn_cfg: SinkhornConfig | None = None, progress=None):
    """One record per (instance, backend, p, S, B, repetition), in grid order.

    Baselines are solved once per (instance, backend, p). Sinkhorn cells use
    the full-problem regularization so both sides target the same value.
    """
    sinkhorn_cfg = sinkhorn_cfg or SinkhornConfig()
    warm_up()
    built = [spec.build() for spec in config.instances]
    baselines = {}
    for ii, spec in enumerate(config.instances):
        _, r, s = built[ii]
        for backend in config.backends:
            for p in config.p_values:
                baselines[ii, backend, p] = compute_baseline(spec, r, s, p, backend, config.exact_cap, sinkhorn_cfg)

    def run(job):
        k, ii, backend, p, S, B, rep = job
        spec = config.instances[ii]
        _, r, s = built[ii]
        base = baselines[ii, backend, p]
        cfg = sinkhorn_cfg
        if backend == "sinkhorn" and base.epsilon is not None and cfg.epsilon is None:
            cfg = with_epsilon(cfg, base.epsilon)
        seed = job_seed(config.base_seed, k)
        params = SubsampleParams(S=S, B=B, seed=seed, backend=backend, sinkhorn=cfg)
        t0 = time.perf_counter()
        est = approximate(r, s, p, params).estimate
        t_ms = 1e3 * (time.perf_counter() - t0)
        if base.skipped:
            rel = signed = None
        else:
            signed = (est - base.value) / base.value if base.value > 0 else (0.0 if est == base.value else math.inf)
            rel = abs(signed)
        rec = ExperimentRecord(
            spec.instance_id, spec.family, spec.cls, spec.size, spec.dim, p, backend, S, B, rep, seed,
            base.value, est, rel, signed, base.time_ms, t_ms, base.skipped,
        )
        if progress is not None:
            progress(rec)
        return rec

    jobs = list(_jobs(config))
    if config.workers > 1 and not config.timing_strict:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


# reporting ---------------------------------------------------------------


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow(rec.row())


def _parse(v, kind):
    if v == "":
        return None
    if kind is bool:
        return v == "1"
    return kind(v)


_KINDS = {
    "N": int, "D": int, "p": float, "S": int, "B": int, "repetition": int, "seed": int,
    "value_exact": float, "value_approx": float, "rel_error": float, "signed_rel_error": float,
    "time_exact_ms": float, "time_approx_ms": float, "baseline_skipped": bool,
}


def read_records_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValidationError(f"{path}: not a records CSV (header mismatch)")
    out = []
    for row in rows[1:]:
        kw = {}
        for col, v in zip(CSV_COLUMNS, row):
            kw["cls" if col == "class" else col] = _parse(v, _KINDS.get(col, str))
        out.append(ExperimentRecord(**kw))
    return out


def geometric_mean(values):
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0 or np.any(v <= 0):
        return None
    return float(np.exp(np.mean(np.log(v))))


def summarize(records):
    """Rows per (family, class, N, backend, p, S, B), ordered by first appearance."""
    groups = defaultdict(list)
    for rec in records:
        groups[rec.family, rec.cls, rec.N, rec.backend, rec.p, rec.S, rec.B].append(rec)
    out = []
    for key, recs in groups.items():
        rel = [r.rel_error for r in recs if r.rel_error is not None]
        signed = [r.signed_rel_error for r in recs if r.signed_rel_error is not None]
        rt = [r.rel_runtime for r in recs if r.rel_runtime is not None]
        out.append(dict(zip(SUMMARY_COLUMNS, (
            *key, len(recs),
            math.fsum(rel) / len(rel) if rel else None,
            math.fsum(signed) / len(signed) if signed else None,
            geometric_mean(rt) if rt else None,
        ))))
    return out


def write_summary_csv(summary, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in summary:
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])


def emit_report(records, out, fmt="csv"):
    """Write ``records.csv`` and ``summary.csv`` under directory ``out``.

    Returns the two paths.
    """
    records = list(records)
    if not records:
        raise ValidationError("no records to report")
    if fmt != "csv":
        raise ValidationError(f"unsupported report format {fmt!r}")
    os.makedirs(out, exist_ok=True)
    rec_path = os.path.join(out, "records.csv")
    sum_path = os.path.join(out, "summary.csv")
    write_records_csv(records, rec_path)
    write_summary_csv(summarize(records), sum_path)
    return rec_path, sum_path


# rate fitting --------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    intercept: float
    n_groups: int


def mean_error_by_S(records):
    groups = defaultdict(list)
    for rec in records:
        if rec.rel_error is not None:
            groups[rec.S].append(rec.rel_error)
    return {S: math.fsum(v) / len(v) for S, v in sorted(groups.items())}


def fit_rate(data) -> RateFit:
    """Least-squares slope of log mean error against log S.

    ``data`` is a list of records (grouped by ``S``) or a mapping
    ``S -> mean error``.
    """
    means = dict(data) if isinstance(data, dict) else mean_error_by_S(data)
    pts = [(S, e) for S, e in sorted(means.items()) if e is not None and e > 0]
    if len(pts) < 3:
        raise FitError("need at least 3 distinct S values with positive mean error")
    x = np.log([float(S) for S, _ in pts])
    y = np.log([float(e) for _, e in pts])
    n = x.size
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    stderr = math.sqrt(float(np.sum(resid**2)) / (n - 2) / sxx)
    return RateFit(slope, stderr, intercept, n)


def strip_timing(path):
    """CSV text with the timing columns blanked, for determinism checks."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    idx = [rows[0].index(c) for c in TIMING_COLUMNS]
    for row in rows[1:]:
        for i in idx:
            row[i] = ""
    return "\n".join(",".join(r) for r in rows)


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    """Copy of ``config`` with the non-``None`` keyword values replaced."""
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
