import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chordal_glasso.chordal import symbolic_factor
from chordal_glasso.datagen import banded_pattern
from chordal_glasso.errors import NotCompletable, NotNoFill
from chordal_glasso.maxdet import (
    CholeskyFactors,
    block_completion,
    complete_primal,
    dual_objective,
    logdet,
    solve_dual,
    sparse_ldl,
    verify_foc,
)
from chordal_glasso.spmat import SparsityPattern, SymSparseMatrix

from conftest import EX1_COMPLEMENT, EX1_INVERSE, peo_matrix

CYCLE4 = SparsityPattern.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


def pd_completions(m, center, rng, n):
    """Random PD matrices agreeing with ``m`` on its pattern.

    Free entries are perturbed uniformly around ``center`` with a spread
    small enough (Frobenius norm below the smallest eigenvalue) that every
    draw stays positive definite.
    """
    free = m.pattern.complement().edges
    spread = 0.99 * np.linalg.eigvalsh(center)[0] / np.sqrt(2 * len(free))
    out = []
    for _ in range(n):
        x = center.copy()
        v = center[free[:, 0], free[:, 1]] + rng.uniform(-spread, spread, len(free))
        x[free[:, 0], free[:, 1]] = v
        x[free[:, 1], free[:, 0]] = v
        out.append(x)
    return out


class TestSolveDual:
    def test_identity(self):
        f = solve_dual(SymSparseMatrix.identity(5))
        assert np.array_equal(f.to_dense(), np.eye(5))
        assert np.array_equal(f.dvals, np.ones(5))

    def test_example(self, ex1_m):
        f = solve_dual(ex1_m)
        assert np.allclose(f.dvals, [1 / 0.91, 1 / 0.84, 1 / 0.96, 1.0], rtol=0, atol=1e-12)
        assert np.abs(f.to_dense() - EX1_INVERSE).max() <= 1e-12
        assert np.abs(f.to_sparse().to_dense() - EX1_INVERSE).max() <= 1e-12

    def test_random_foc(self):
        rng = np.random.default_rng(11)
        m = peo_matrix(rng, 50, 5)
        f = solve_dual(m)
        X = np.linalg.inv(f.to_dense())
        mask = m.pattern.to_dense() | np.eye(50, dtype=bool)
        assert np.abs(np.where(mask, X - m.to_dense(), 0)).max() <= 1e-9
        assert verify_foc(f, m) <= 1e-9

    def test_fill_rejected(self):
        m = SymSparseMatrix(CYCLE4, np.ones(4), np.full(4, 0.1))
        with pytest.raises(NotNoFill):
            solve_dual(m)

    def test_fill_as_zeros(self):
        m = SymSparseMatrix(CYCLE4, np.ones(4), np.full(4, 0.1))
        f = solve_dual(m, strict=False)
        X = f.inverse_dense()
        assert np.abs(X - np.where(f.etree.fill_pattern.to_dense() | np.eye(4, dtype=bool), m.to_dense(), X)).max() <= 1e-12

    def test_not_completable(self):
        # a 3-path with 0.9, 0.9 is fine, but a triangle with large mixed signs is not PD
        m = SymSparseMatrix(SparsityPattern.complete(3), np.ones(3), np.array([0.9, 0.9, -0.9]))
        with pytest.raises(NotCompletable):
            solve_dual(m)

    def test_negative_diagonal(self):
        with pytest.raises(NotCompletable):
            solve_dual(SymSparseMatrix.from_entries(2, [1.0, -1.0], [(0, 1, 0.1)]))

    def test_deterministic(self):
        m = peo_matrix(np.random.default_rng(2), 40, 4)
        a, b = solve_dual(m), solve_dual(m)
        assert a.dvals.tobytes() == b.dvals.tobytes()
        assert all(x.tobytes() == y.tobytes() for x, y in zip(a.lvals, b.lvals))

    def test_flops_linear_in_d(self):
        w = 4
        per = []
        for d in (100, 200, 400, 800, 1600):
            e = banded_pattern(d, w)
            m = SymSparseMatrix(e, np.ones(d), np.full(e.n_edges, 0.05))
            f = solve_dual(m)
            per.append(f.flops / (w ** 3 * d))
        assert max(per) <= 4.0
        assert max(per) / min(per) < 1.1


class TestCompletePrimal:
    def test_identity(self):
        assert np.array_equal(complete_primal(SymSparseMatrix.identity(4)), np.eye(4))

    def test_example(self, ex1_m):
        X = complete_primal(ex1_m)
        for (i, j), v in EX1_COMPLEMENT.items():
            assert abs(X[i, j] - v) <= 1e-12
            assert X[i, j] == X[j, i]
        mask = ex1_m.pattern.to_dense() | np.eye(4, dtype=bool)
        assert np.array_equal(X[mask], ex1_m.to_dense()[mask])

    def test_matches_dual(self):
        m = peo_matrix(np.random.default_rng(4), 12, 3)
        X = complete_primal(m)
        assert np.abs(X - np.linalg.inv(solve_dual(m).to_dense())).max() <= 1e-9

    def test_fill_rejected(self):
        with pytest.raises(NotNoFill):
            complete_primal(SymSparseMatrix(CYCLE4, np.ones(4), np.full(4, 0.1)))

    def test_not_completable(self):
        m = SymSparseMatrix(SparsityPattern.complete(3), np.ones(3), np.array([0.9, 0.9, -0.9]))
        with pytest.raises(NotCompletable):
            complete_primal(m)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 50), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_strong_duality(self, d, w, seed):
        m = peo_matrix(np.random.default_rng(seed), d, w)
        X = complete_primal(m)
        S = solve_dual(m).to_dense()
        assert np.abs(X @ S - np.eye(d)).max() <= 1e-8
        off = ~(m.pattern.to_dense() | np.eye(d, dtype=bool))
        assert np.abs(np.linalg.inv(X)[off]).max(initial=0) <= 1e-9

    @settings(max_examples=10, deadline=None)
    @given(st.integers(3, 8), st.integers(0, 2**32 - 1))
    def test_max_determinant(self, d, seed):
        rng = np.random.default_rng(seed)
        m = peo_matrix(rng, d, 2)
        if m.pattern.n_edges == d * (d - 1) // 2:
            return
        X = complete_primal(m)
        best = np.linalg.slogdet(X)[1]
        for x in pd_completions(m, X, rng, 1000):
            sign, val = np.linalg.slogdet(x)
            assert sign > 0 and val <= best + 1e-12


class TestBlockCompletion:
    def test_example_corner(self):
        X = block_completion(1.0, 0.3, 1.0, -0.4, 1.0)
        assert abs(X[0, 2] - (-0.12)) <= 1e-15

    def test_zero_annihilates(self):
        X = block_completion(1.0, 0.0, 1.0, 0.7, 1.0)
        assert X[0, 2] == 0.0

    def test_beats_random_completions(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((6, 6))
        full = a @ a.T + 6 * np.eye(6)
        X = block_completion(full[:2, :2], full[:2, 2:4], full[2:4, 2:4], full[2:4, 4:], full[4:, 4:])
        best = np.linalg.slogdet(X)[1]
        assert np.linalg.eigvalsh(X)[0] > 0
        count = 0
        while count < 100:
            y = X.copy()
            blk = rng.uniform(-3, 3, (2, 2))
            y[:2, 4:] = blk
            y[4:, :2] = blk.T
            if np.linalg.eigvalsh(y)[0] > 0:
                count += 1
                assert np.linalg.slogdet(y)[1] <= best + 1e-12


class TestObjectives:
    def test_identity_dual_objective(self):
        eye = SymSparseMatrix.identity(5)
        assert dual_objective(eye, eye) == 10.0
        assert dual_objective(solve_dual(eye), eye) == 10.0

    def test_example_dense_vs_factored(self, ex1_m):
        f = solve_dual(ex1_m)
        S = EX1_INVERSE
        dense = -np.linalg.slogdet(S)[1] + np.trace(ex1_m.to_dense() @ S) + 4
        assert abs(dual_objective(f, ex1_m) - dense) <= 1e-12
        assert abs(dual_objective(S, ex1_m) - dense) <= 1e-12

    def test_scaling(self, ex1_m):
        f = solve_dual(ex1_m)
        base = dual_objective(f, ex1_m)
        tr = float(np.trace(ex1_m.to_dense() @ f.to_dense()))
        for t in (0.5, 2.0, 3.0):
            g = CholeskyFactors(f.etree, f.lvals, f.dvals * t)
            expect = base - 4 * math.log(t) + (t - 1) * tr
            assert abs(dual_objective(g, ex1_m) - expect) <= 1e-12

    def test_logdet_paths_agree(self):
        m = peo_matrix(np.random.default_rng(6), 30, 3)
        dense = np.linalg.slogdet(m.to_dense())[1]
        assert abs(logdet(m) - dense) <= 1e-10
        assert abs(logdet(m.to_dense()) - dense) <= 1e-10
        assert abs(sparse_ldl(m, symbolic_factor(m.pattern)).logdet() - dense) <= 1e-10


class TestVerifyFoc:
    def test_identity(self):
        eye = SymSparseMatrix.identity(3)
        assert verify_foc(solve_dual(eye), eye) == 0.0

    def test_example(self, ex1_m):
        assert verify_foc(solve_dual(ex1_m), ex1_m) <= 1e-12

    def test_perturbed(self, ex1_m):
        f = solve_dual(ex1_m)
        d = f.dvals.copy()
        d[0] += 0.1
        assert verify_foc(CholeskyFactors(f.etree, f.lvals, d), ex1_m) > 1e-3
