import numpy as np
import pytest

from chordal_glasso.datagen import GenConfig, generate, make_rng, random_graph
from chordal_glasso.errors import NotCompletable, TooLarge
from chordal_glasso.glasso import kkt_check, solve
from chordal_glasso.maxdet import complete_primal
from chordal_glasso.reference import (
    brute_chordality,
    brute_clique_number,
    count_fill,
    dense_glasso,
    dense_maxdet,
)
from chordal_glasso.spmat import SparsityPattern, SymSparseMatrix

from conftest import EX1_COMPLEMENT, peo_matrix

CYCLE4 = SparsityPattern.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


class TestDenseGlasso:
    def test_identity(self):
        r = dense_glasso(np.eye(5), 0.1)
        assert np.allclose(r.solution, np.eye(5), rtol=0, atol=1e-10)
        assert abs(r.objective - 5.0) <= 1e-10
        assert r.converged

    def test_example_matches_solver(self, ex1_sigma):
        r = dense_glasso(ex1_sigma, 0.5)
        sol = solve(ex1_sigma, 0.5)
        assert abs(r.objective - sol.objective) / abs(sol.objective) <= 1e-5
        support = np.abs(r.solution) > 1e-8
        np.fill_diagonal(support, False)
        assert np.array_equal(support, sol.s_opt.pattern.to_dense())

    def test_monotone(self, ex1_sigma):
        r = dense_glasso(ex1_sigma, 0.5)
        assert all(b <= a for a, b in zip(r.history, r.history[1:]))

    def test_generated_kkt(self):
        e = random_graph(30, 0.06, make_rng(21))
        g = generate(e, GenConfig(seed=5))
        r = dense_glasso(g.sigma, g.lambda_recommended)
        assert r.converged
        assert r.final_step_norm <= 1e-8
        assert kkt_check(r.solution, g.sigma, g.lambda_recommended).worst <= 1e-4

    def test_lambda_zero_inverse(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((6, 20))
        cov = a @ a.T / 20 + 0.5 * np.eye(6)
        s = np.sqrt(np.diag(cov))
        corr = cov / np.outer(s, s)
        r = dense_glasso(corr, 0.0)
        assert np.abs(r.solution - np.linalg.inv(corr)).max() <= 1e-6

    def test_too_large(self):
        with pytest.raises(TooLarge):
            dense_glasso(np.eye(201), 0.1)

    def test_flagged_when_iterations_run_out(self, ex1_sigma):
        r = dense_glasso(ex1_sigma, 0.5, max_iter=2)
        assert not r.converged
        assert r.iterations == 2


class TestDenseMaxdet:
    def test_identity(self):
        assert np.array_equal(dense_maxdet(SymSparseMatrix.identity(4)), np.eye(4))

    def test_example(self, ex1_m):
        X = dense_maxdet(ex1_m)
        for (i, j), v in EX1_COMPLEMENT.items():
            assert abs(X[i, j] - v) <= 1e-6

    def test_cycle_first_order(self):
        m = SymSparseMatrix(CYCLE4, np.ones(4), np.array([0.3, -0.2, 0.25, 0.4]))
        X = dense_maxdet(m)
        inv = np.linalg.inv(X)
        assert abs(inv[0, 2]) <= 1e-6 and abs(inv[1, 3]) <= 1e-6

    def test_agrees_with_primal(self):
        rng = np.random.default_rng(3)
        tol = 1e-10
        for _ in range(5):
            m = peo_matrix(rng, 10, 3)
            assert np.abs(dense_maxdet(m, tol=tol) - complete_primal(m)).max() <= 10 * tol

    def test_non_pd_start(self):
        m = SymSparseMatrix(SparsityPattern.complete(3), np.ones(3), np.array([0.9, 0.9, -0.9]))
        with pytest.raises(NotCompletable):
            dense_maxdet(m)


class TestGraphOracles:
    def test_cycle(self):
        assert not brute_chordality(CYCLE4)

    def test_trees(self):
        rng = np.random.default_rng(1)
        for d in range(1, 10):
            parents = [int(rng.integers(0, v)) for v in range(1, d)]
            e = SparsityPattern.from_edges(d, [(v + 1, p) for v, p in enumerate(parents)])
            assert brute_chordality(e)

    def test_cycle_with_chord(self):
        assert brute_chordality(CYCLE4.union(SparsityPattern.from_edges(4, [(0, 2)])))

    def test_clique_number(self):
        assert brute_clique_number(SparsityPattern.empty(3)) == 1
        assert brute_clique_number(CYCLE4) == 2
        assert brute_clique_number(SparsityPattern.complete(6)) == 6

    def test_fill_count(self):
        assert count_fill(CYCLE4, [0, 1, 2, 3]) == 1
        assert count_fill(SparsityPattern.from_edges(3, [(0, 1), (1, 2)]), [1, 0, 2]) == 1

    def test_limits(self):
        with pytest.raises(TooLarge):
            brute_chordality(SparsityPattern.empty(11))
        with pytest.raises(TooLarge):
            brute_clique_number(SparsityPattern.empty(13))
