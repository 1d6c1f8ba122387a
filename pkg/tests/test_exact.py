import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from otsub import DiscreteMeasure, GroundSpace, make_cost
from otsub.errors import DimensionError, NonConvergenceError, OracleSizeError, ValidationError
from otsub.exact import brute_force_lp, solve_dense, solve_transport_simplex, sorted_coupling_1d
from otsub.exact.oracles import lp_transport
from otsub.exact.simplex import default_max_iter, rebalance


def _pair(rng, n, dim=2, zeros=0.0):
    g = GroundSpace.from_coords(rng.random((n, dim)))
    out = []
    for _ in range(2):
        w = rng.random(n)
        w[rng.random(n) < zeros] = 0
        if w.sum() == 0:
            w[rng.integers(n)] = 1
        out.append(DiscreteMeasure.normalized(w, g))
    return g, out[0], out[1]


def check_tree(res, m, n):
    """Basis is a spanning tree of the bipartite graph."""
    assert res.rows.size == m + n - 1
    adj = coo_matrix((np.ones(m + n - 1), (res.rows, m + res.cols)), shape=(m + n, m + n))
    k, _ = connected_components(adj, directed=False)
    assert k == 1


class TestSimplexExamples:
    def test_dirac_pair(self):
        g = GroundSpace.from_coords([[0.0], [2.0]])
        plan = solve_transport_simplex(DiscreteMeasure.dirac(0, g), DiscreteMeasure.dirac(1, g), 1)
        assert plan.cost == pytest.approx(2.0)
        assert plan.coupling[0, 1] == pytest.approx(1.0) and plan.coupling.sum() == pytest.approx(1.0)

    def test_equal_uniform_is_diagonal(self):
        g = GroundSpace.from_coords(np.arange(4.0)[:, None] ** 1.3)
        u = DiscreteMeasure.uniform(g)
        plan = solve_transport_simplex(u, u, 2)
        assert plan.cost == 0.0
        assert np.allclose(plan.coupling, np.eye(4) / 4)

    def test_seeded_5x5_matches_oracle(self):
        rng = np.random.default_rng(5)
        _, r, s = _pair(rng, 5)
        for p in (1, 2, 3):
            assert solve_transport_simplex(r, s, p).cost == pytest.approx(brute_force_lp(r, s, p).cost, rel=1e-9)

    def test_precomputed_cost_matrix(self, rng):
        g, r, s = _pair(rng, 7)
        c = make_cost(g, 2)
        assert solve_transport_simplex(r, s, c).cost == pytest.approx(solve_transport_simplex(r, s, 2).cost, rel=1e-12)


class TestSimplexCertificates:
    @pytest.mark.parametrize("n,zeros", [(6, 0.0), (15, 0.3), (40, 0.5)])
    def test_tree_feasibility_optimality(self, rng, n, zeros):
        g, r, s = _pair(rng, n, zeros=zeros)
        plan, res = solve_transport_simplex(r, s, 2, return_result=True)
        m, k = r.support.size, s.support.size
        check_tree(res, m, k)
        assert np.allclose(plan.row_sums(), r.weights, atol=1e-12)
        assert np.allclose(plan.col_sums(), s.weights, atol=1e-12)
        C = make_cost(g, 2).entries[np.ix_(r.support, s.support)]
        assert res.min_reduced_cost(C) >= -1e-9

    def test_zero_weight_points_dropped(self):
        g = GroundSpace.from_coords(np.arange(6.0)[:, None])
        r = DiscreteMeasure([0.5, 0, 0, 0.5, 0, 0], g)
        s = DiscreteMeasure([0, 0, 0.5, 0, 0, 0.5], g)
        plan, res = solve_transport_simplex(r, s, 1, return_result=True)
        assert res.rows.size == 3  # 2 + 2 - 1 on the supports
        assert plan.cost == pytest.approx(2.0)

    def test_degenerate_counts(self):
        # integer counts with many ties: heavy degeneracy
        rng = np.random.default_rng(3)
        g = GroundSpace.grid(8)
        for _ in range(20):
            a = rng.multinomial(64, np.full(64, 1 / 64)).astype(float)
            b = rng.multinomial(64, np.full(64, 1 / 64)).astype(float)
            ia, ib = np.flatnonzero(a), np.flatnonzero(b)
            C = make_cost(g, 2).entries[np.ix_(ia, ib)]
            res = solve_dense(a[ia], b[ib], C)
            assert res.iterations <= 10 * (ia.size + ib.size) ** 2
            X = np.zeros((ia.size, ib.size))
            np.add.at(X, (res.rows, res.cols), res.flow)
            assert np.array_equal(X.sum(1), a[ia]) and np.array_equal(X.sum(0), b[ib])
            ref = lp_transport(a[ia] / 64, b[ib] / 64, C)[1] if ia.size * ib.size <= 100 else None
            if ref is not None:
                assert res.cost / 64 == pytest.approx(ref, rel=1e-9, abs=1e-12)

    def test_all_equal_costs(self):
        # every basis is optimal; must stop immediately
        res = solve_dense(np.full(5, 0.2), np.full(5, 0.2), np.ones((5, 5)))
        assert res.cost == pytest.approx(1.0)
        assert res.iterations == 0

    def test_iteration_limit_carries_best_plan(self, rng):
        g, r, s = _pair(rng, 30)
        with pytest.raises(NonConvergenceError) as exc:
            solve_transport_simplex(r, s, 2, max_iter=1)
        best = exc.value.best
        assert np.allclose(best.row_sums(), r.weights, atol=1e-12)
        assert best.cost >= solve_transport_simplex(r, s, 2).cost - 1e-12

    def test_input_validation(self):
        with pytest.raises(ValidationError):
            solve_dense(np.array([0.5, 0.5]), np.array([1.0]), np.ones((2, 2)))
        with pytest.raises(ValidationError):
            solve_dense(np.array([1.0, 0.0]), np.array([1.0]), np.ones((2, 1)))

    def test_rebalance(self):
        a = np.array([0.1] * 10)
        b = rebalance(a, np.array([0.3, 0.2, 0.5 + 3e-16]))
        assert abs(math.fsum(b) - math.fsum(a)) <= np.spacing(math.fsum(a))
        assert b[0] == 0.3 and b[1] == 0.2
        assert default_max_iter(3, 4) == 10 * 49 + 1000


class TestOracles:
    def test_lp_examples(self):
        g1 = GroundSpace.from_coords([[0.0]])
        assert brute_force_lp(DiscreteMeasure([1.0], g1), DiscreteMeasure([1.0], g1)).cost == 0.0
        g2 = GroundSpace.from_distances(np.array([[0, 1], [1, 0.0]]))
        assert brute_force_lp(DiscreteMeasure([1, 0.0], g2), DiscreteMeasure([0, 1.0], g2), 1).cost == pytest.approx(1)

    def test_lp_3x3_matches_simplex(self):
        rng = np.random.default_rng(33)
        _, r, s = _pair(rng, 3)
        assert brute_force_lp(r, s, 2).cost == pytest.approx(solve_transport_simplex(r, s, 2).cost, rel=1e-9)

    def test_lp_size_cap(self, rng):
        _, r, s = _pair(rng, 11)
        with pytest.raises(OracleSizeError):
            brute_force_lp(r, s)

    def test_sorted_examples(self):
        g = GroundSpace.from_coords([[0.0], [1.0]])
        assert sorted_coupling_1d(DiscreteMeasure([1, 0.0], g), DiscreteMeasure([0, 1.0], g), 2) == pytest.approx(1)
        u = DiscreteMeasure.uniform(g)
        assert sorted_coupling_1d(u, u, 1) == 0.0
        g3 = GroundSpace.from_coords([[0.0], [1.0], [2.0]])
        r, s = DiscreteMeasure([0.5, 0.5, 0], g3), DiscreteMeasure([0, 0.5, 0.5], g3)
        assert sorted_coupling_1d(r, s, 1) == pytest.approx(brute_force_lp(r, s, 1).cost, abs=1e-12)

    def test_sorted_requires_line(self, rng):
        _, r, s = _pair(rng, 4, dim=2)
        with pytest.raises(DimensionError):
            sorted_coupling_1d(r, s)

    def test_sorted_handles_unsorted_coordinates(self):
        g = GroundSpace.from_coords([[3.0], [0.0], [1.0]])
        r = DiscreteMeasure([0, 1.0, 0], g)
        s = DiscreteMeasure([1.0, 0, 0], g)
        assert sorted_coupling_1d(r, s, 1) == pytest.approx(3.0)


@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 10), n=st.integers(1, 10), p=st.sampled_from([1, 2, 3]))
def test_simplex_equals_lp_oracle(seed, m, n, p):
    rng = np.random.default_rng(seed)
    g = GroundSpace.from_coords(rng.random((m + n, 2)))
    w1 = np.r_[rng.random(m), np.zeros(n)]
    w2 = np.r_[np.zeros(m), rng.random(n)]
    if rng.random() < 0.3:  # tied weights
        w1[:m] = 1.0
        w2[m:] = 1.0
    r, s = DiscreteMeasure.normalized(w1, g), DiscreteMeasure.normalized(w2, g)
    a = solve_transport_simplex(r, s, p).cost
    b = brute_force_lp(r, s, p).cost
    assert abs(a - b) <= 1e-9 * (1 + b)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 30), p=st.sampled_from([1.0, 2.0, 3.0]))
def test_simplex_equals_sorted_coupling(seed, n, p):
    rng = np.random.default_rng(seed)
    g = GroundSpace.from_coords(rng.random((n, 1)))
    r = DiscreteMeasure.normalized(rng.random(n), g)
    s = DiscreteMeasure.normalized(rng.random(n), g)
    a = solve_transport_simplex(r, s, p).value
    assert a == pytest.approx(sorted_coupling_1d(r, s, p), rel=1e-9, abs=1e-12)
