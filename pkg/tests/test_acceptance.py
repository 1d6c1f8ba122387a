"""Exit criteria 1 to 12.

Every test records its measured quantities through the ``criterion``
fixture; the terminal summary prints one PASS/FAIL line per criterion.
Seeds are fixed constants chosen before any run.
"""

import math
import time

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from otsub import DiscreteMeasure, GroundSpace
from otsub.bench import ExperimentConfig, fit_rate, run_experiment, strip_timing, summarize
from otsub.bounds import (
    build_covering_tree,
    check_q2_optimality,
    concentration_tail,
    constant_CDp,
    constant_Eq,
    mean_error_bound,
    tree_wasserstein,
)
from otsub.cli import main as cli_main
from otsub.exact import brute_force_lp, solve_transport_simplex, sorted_coupling_1d
from otsub.instances import InstanceSpec
from otsub.subsample import SubsampleParams, approximate, one_sample_deviation

CAUCHY32 = InstanceSpec("grid", "cauchy-density", 32, seed=1)
CAUCHY64 = InstanceSpec("grid", "cauchy-density", 64, seed=1)


def _budget(t0, seconds, note):
    elapsed = time.perf_counter() - t0
    note(f"runtime {elapsed:.1f}s (limit {seconds}s)")
    assert elapsed < seconds


def _graph_space(n, seed, k=4):
    """Shortest-path metric of a symmetric k-NN graph on random planar points."""
    rng = np.random.default_rng(seed)
    x = rng.random((n, 2))
    d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
    nbr = np.argsort(d, axis=1)[:, 1 : k + 1]
    rows = np.repeat(np.arange(n), k)
    cols = nbr.ravel()
    # a path through all points keeps the graph connected
    rows = np.concatenate([rows, np.arange(n - 1)])
    cols = np.concatenate([cols, np.arange(1, n)])
    w = d[rows, cols]
    g = coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    return GroundSpace.from_distances(shortest_path(g, directed=False))


def _corpus():
    rng = np.random.default_rng(20240)
    spaces = {
        "grid8": GroundSpace.grid(8),
        "cloud50": GroundSpace.from_coords(rng.random((50, 3))),
        "graph100": _graph_space(100, 7),
    }
    out = {}
    for name, g in spaces.items():
        r = DiscreteMeasure(rng.dirichlet(np.ones(g.n)), g)
        s = DiscreteMeasure(rng.dirichlet(np.ones(g.n)), g)
        out[name] = (g, r, s)
    return out


CORPUS_S = (25, 100, 400)
CORPUS_P = (1.0, 2.0)
MC_REPS = 500


@pytest.mark.acceptance(1)
def test_exactness_against_oracles(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(200):
        n_r, n_s = rng.integers(1, 11, size=2)
        # LP oracle tableau stays within its 100-variable limit
        dim = int(rng.integers(1, 4))
        g = GroundSpace.from_coords(rng.random((n_r + n_s, dim)))
        a = np.concatenate([rng.dirichlet(np.ones(n_r)), np.zeros(n_s)])
        b = np.concatenate([np.zeros(n_r), rng.dirichlet(np.ones(n_s))])
        r, s = DiscreteMeasure(a, g), DiscreteMeasure(b, g)
        p = float(1 + i % 3)
        got = solve_transport_simplex(r, s, p).cost
        ref = brute_force_lp(r, s, p).cost
        worst = max(worst, abs(got - ref) / max(abs(ref), 1e-300))
    worst_1d = 0.0
    for i in range(100):
        n = int(rng.integers(2, 40))
        g = GroundSpace.from_coords(rng.normal(size=(n, 1)))
        r = DiscreteMeasure(rng.dirichlet(np.ones(n)), g)
        s = DiscreteMeasure(rng.dirichlet(np.ones(n)), g)
        p = float(1 + i % 3)
        got = solve_transport_simplex(r, s, p).value
        ref = sorted_coupling_1d(r, s, p)
        worst_1d = max(worst_1d, abs(got - ref) / ref)
    criterion(f"max rel gap LP {worst:.2e}, 1-D {worst_1d:.2e}")
    assert worst <= 1e-9
    assert worst_1d <= 1e-9
    _budget(t0, 10, criterion)


@pytest.mark.acceptance(2)
def test_one_sample_bound(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for name, (g, r, _) in _corpus().items():
        for p in CORPUS_P:
            E = constant_Eq(g, p)
            for S in CORPUS_S:
                mean = float(np.mean(one_sample_deviation(r, p, S, MC_REPS, seed=S)))
                bound = E / math.sqrt(S)
                worst = max(worst, mean / bound)
                assert mean <= bound, (name, p, S, mean, bound)
    criterion(f"max mean/bound ratio {worst:.3f}")
    _budget(t0, 300, criterion)


@pytest.mark.acceptance(3)
def test_two_sample_bound(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for name, (g, r, s) in _corpus().items():
        for p in CORPUS_P:
            E = constant_Eq(g, p)
            W = solve_transport_simplex(r, s, p).value
            for S in CORPUS_S:
                res = approximate(r, s, p, SubsampleParams(S=S, B=MC_REPS, seed=1000 + S))
                mean = float(np.mean(np.abs(res.repetition_values - W)))
                bound = mean_error_bound(E, p, S)
                worst = max(worst, mean / bound)
                assert mean <= bound, (name, p, S, mean, bound)
    criterion(f"max mean/bound ratio {worst:.3f}")
    _budget(t0, 300, criterion)


@pytest.mark.acceptance(4)
def test_rate_of_decay(criterion):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(instances=[CAUCHY32], p_values=[1.0, 2.0], S_values=[100, 200, 500, 1000, 2000, 4000],
                           B_values=[1], reps=50, base_seed=4)
    recs = run_experiment(cfg)
    ok = True
    for p in cfg.p_values:
        fit = fit_rate([r for r in recs if r.p == p])
        lo = -1 / (2 * p) - 0.25
        inside = lo <= fit.slope <= 0
        ok &= inside
        criterion(f"p={p:g} slope {fit.slope:.3f} +- {fit.stderr:.3f} window [{lo:.2f}, 0] {'in' if inside else 'OUT'}")
    assert ok
    _budget(t0, 900, criterion)


def _mean_rel(spec, backend, S, reps, seed, p=2.0):
    cfg = ExperimentConfig(instances=[spec], p_values=[p], S_values=[S], B_values=[1], reps=reps,
                           backends=[backend], base_seed=seed)
    return summarize(run_experiment(cfg))[0]["mean_rel_error"]


@pytest.mark.acceptance(5)
def test_resolution_independence(criterion):
    t0 = time.perf_counter()
    e32 = _mean_rel(CAUCHY32, "simplex", 1000, 20, 5)
    e64 = _mean_rel(CAUCHY64, "simplex", 1000, 20, 5)
    ratio = max(e32, e64) / min(e32, e64)
    criterion(f"simplex R32 {e32:.4f} R64 {e64:.4f} ratio {ratio:.2f}")
    s64 = _mean_rel(CAUCHY64, "sinkhorn", 1000, 20, 5)
    s128 = _mean_rel(InstanceSpec("grid", "cauchy-density", 128, seed=1), "sinkhorn", 1000, 20, 5)
    sratio = max(s64, s128) / min(s64, s128)
    criterion(f"sinkhorn R64 {s64:.4f} R128 {s128:.4f} ratio {sratio:.2f}")
    assert ratio < 2
    assert sratio < 2
    _budget(t0, 1800, criterion)


@pytest.mark.acceptance(6)
def test_accuracy_magnitude(criterion):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(instances=[CAUCHY64], p_values=[2.0], S_values=[4000], B_values=[1], reps=5,
                           base_seed=6, timing_strict=True)
    row = summarize(run_experiment(cfg))[0]
    criterion(f"mean rel error {row['mean_rel_error']:.4f}, rel runtime {row['geomean_rel_runtime']:.4f}")
    assert row["mean_rel_error"] <= 0.10
    assert row["geomean_rel_runtime"] <= 0.05
    _budget(t0, 1800, criterion)


@pytest.mark.acceptance(7)
def test_small_sample_overestimation(criterion):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(instances=[CAUCHY32], p_values=[2.0], S_values=[100, 4000], B_values=[1], reps=200,
                           base_seed=7)
    recs = run_experiment(cfg)
    small = np.array([r.signed_rel_error for r in recs if r.S == 100])
    large = np.array([r.signed_rel_error for r in recs if r.S == 4000])
    t = small.mean() / (small.std(ddof=1) / math.sqrt(small.size))
    criterion(f"S=100 mean signed {small.mean():.4f} (t={t:.1f}); S=4000 mean signed {large.mean():.4f}")
    assert small.mean() > 0 and t > 2
    assert abs(large.mean()) < abs(small.mean())
    _budget(t0, 1200, criterion)


@pytest.mark.acceptance(8)
def test_repetitions_reduce_variance(criterion):
    t0 = time.perf_counter()
    _, r, s = CAUCHY32.build()
    est = {}
    for B in (1, 5):
        est[B] = np.array([approximate(r, s, 2.0, SubsampleParams(S=500, B=B, seed=80_000 + 1000 * B + k)).estimate
                           for k in range(200)])
    v1, v5 = est[1].var(ddof=1), est[5].var(ddof=1)
    se = math.sqrt(v1 / 200 + v5 / 200)
    gap = abs(est[1].mean() - est[5].mean())
    criterion(f"var B=1 {v1:.3e} B=5 {v5:.3e}; mean gap {gap / se:.2f} pooled SE")
    assert v5 < v1
    assert gap < 2 * se
    _budget(t0, 600, criterion)


@pytest.mark.acceptance(9)
def test_class_ordering(criterion):
    t0 = time.perf_counter()
    means = {}
    for cls in ("cauchy-density", "white-noise"):
        specs = [InstanceSpec("grid", cls, 32, seed=sd) for sd in (1, 3, 5, 7, 9)]
        cfg = ExperimentConfig(instances=specs, p_values=[2.0], S_values=[1000], B_values=[1], reps=5, base_seed=9)
        recs = run_experiment(cfg)
        means[cls] = float(np.mean([r.rel_error for r in recs]))
    ratio = means["white-noise"] / means["cauchy-density"]
    criterion(f"cauchy {means['cauchy-density']:.4f} white-noise {means['white-noise']:.4f} ratio {ratio:.1f}")
    assert ratio >= 1.5
    _budget(t0, 900, criterion)


@pytest.mark.acceptance(10)
def test_bounds_unit_values(criterion):
    t0 = time.perf_counter()
    assert abs(constant_CDp(2, 2, 1024) - 2) <= 1e-12
    assert abs(constant_CDp(4, 2, 16) - 3) <= 1e-12
    assert abs(constant_CDp(6, 2, 64) - 6) <= 1e-12
    two = GroundSpace.from_coords([[0.0], [1.0]])
    assert abs(constant_Eq(two, 1, 2, 0) - (2 * math.sqrt(2) + 4)) <= 1e-12
    assert abs(concentration_tail(1.0, 8, 1, 1.0, 1) - 2 * math.exp(-1)) <= 1e-12
    assert abs(concentration_tail(1.0, 4, 2, 1.0, 1) - 2 * math.exp(-1)) <= 1e-12
    bad = [(D, p, 2**k) for D in range(1, 9) for p in (1, 2, 3) for k in range(4, 21)
           if check_q2_optimality(p, D, 2**k).argmin != 2]
    criterion(f"q-sweep failures {len(bad)}")
    assert not bad
    _budget(t0, 1, criterion)


@pytest.mark.acceptance(11)
def test_tree_domination(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    spaces = {"grid8": GroundSpace.grid(8), "cloud50": GroundSpace.from_coords(rng.random((50, 3))),
              "graph64": _graph_space(64, 11)}
    margin = math.inf
    for name, g in spaces.items():
        tree = build_covering_tree(g, 2)
        for k in range(50):
            r = DiscreteMeasure(rng.dirichlet(np.ones(g.n)), g)
            s = DiscreteMeasure(rng.dirichlet(np.ones(g.n)), g)
            p = 1.0 + k % 2
            tw = tree_wasserstein(tree, r, s, p)
            w = solve_transport_simplex(r, s, p).value
            margin = min(margin, tw - w)
            assert tw >= w - 1e-9, (name, k)
    criterion(f"min tree - exact margin {margin:.3g}")
    _budget(t0, 60, criterion)


@pytest.mark.acceptance(12)
def test_bench_determinism(criterion, tmp_path, capsys):
    t0 = time.perf_counter()
    argv = ["bench", "--class", "cauchy-density", "white-noise", "--R", "8", "--p", "1,2", "--S", "50,200",
            "--B", "1,3", "--reps", "2", "--backend", "simplex", "--seed", "12"]
    for name in ("a", "b"):
        assert cli_main(argv + ["--out", str(tmp_path / name)]) == 0
    capsys.readouterr()
    a = strip_timing(tmp_path / "a" / "records.csv")
    b = strip_timing(tmp_path / "b" / "records.csv")
    criterion(f"{a.count(chr(10))} rows compared")
    assert a == b
    for backend in ("sinkhorn",):
        for name in ("c", "d"):
            assert cli_main(argv[:-4] + ["--backend", backend, "--seed", "12", "--out", str(tmp_path / name)]) == 0
        assert strip_timing(tmp_path / "c" / "records.csv") == strip_timing(tmp_path / "d" / "records.csv")
    _budget(t0, 120, criterion)
