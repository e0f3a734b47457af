import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from chordal_glasso.chordal import (
    chordal_completion,
    has_no_fill,
    is_chordal,
    mcs_order,
    symbolic_factor,
    treewidth,
)
from chordal_glasso.datagen import random_chordal_pattern, random_graph
from chordal_glasso.reference import brute_chordality, brute_clique_number, count_fill
from chordal_glasso.spmat import Permutation, SparsityPattern

PATH4 = SparsityPattern.from_edges(4, [(0, 1), (1, 2), (2, 3)])
CYCLE4 = SparsityPattern.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
TRIANGLE = SparsityPattern.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@st.composite
def graphs(draw, max_d=8):
    d = draw(st.integers(0, max_d))
    p = draw(st.floats(0.0, 1.0))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_graph(d, p, np.random.default_rng(seed))


def is_induced_cycle(e, cyc):
    k = len(cyc)
    if k < 4 or len(set(cyc)) != k:
        return False
    for a in range(k):
        for b in range(a + 1, k):
            adjacent = (b - a) in (1, k - 1)
            if e.has_edge(cyc[a], cyc[b]) != adjacent:
                return False
    return True


class TestMCS:
    def test_empty_graph_identity(self):
        assert mcs_order(SparsityPattern.empty(5)) == Permutation.identity(5)

    def test_path_no_fill(self):
        q = mcs_order(PATH4)
        assert count_fill(PATH4, q.order) == 0

    def test_cycle_total(self):
        q = mcs_order(CYCLE4)
        assert sorted(q.forward.tolist()) == [0, 1, 2, 3]

    def test_deterministic(self):
        e = random_graph(30, 0.2, np.random.default_rng(3))
        assert mcs_order(e) == mcs_order(e)


class TestIsChordal:
    def test_triangle(self):
        assert is_chordal(TRIANGLE).is_chordal

    def test_cycle_witness(self):
        a = is_chordal(CYCLE4)
        assert not a.is_chordal
        assert sorted(a.witness) == [0, 1, 2, 3]
        assert is_induced_cycle(CYCLE4, a.witness)

    def test_path(self):
        a = is_chordal(PATH4)
        assert a.is_chordal
        assert count_fill(PATH4, a.peo.order) == 0

    def test_long_cycle_with_pendant(self):
        e = SparsityPattern.from_edges(7, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (2, 5), (5, 6)])
        a = is_chordal(e)
        assert not a.is_chordal
        assert sorted(a.witness) == [0, 1, 2, 3, 4]

    @settings(max_examples=300)
    @given(graphs())
    def test_agrees_with_brute_force(self, e):
        a = is_chordal(e)
        assert a.is_chordal == brute_chordality(e)
        if a.is_chordal:
            assert count_fill(e, a.peo.order) == 0
        else:
            assert is_induced_cycle(e, a.witness)


class TestSymbolicFactor:
    def test_path_natural(self):
        t = symbolic_factor(PATH4)
        assert [c.tolist() for c in t.colsets] == [[1], [2], [3], []]
        assert t.parent.tolist() == [1, 2, 3, -1]

    def test_empty(self):
        t = symbolic_factor(SparsityPattern.empty(3))
        assert all(len(c) == 0 for c in t.colsets)
        assert t.parent.tolist() == [-1, -1, -1]

    def test_cycle_fill(self):
        t = symbolic_factor(CYCLE4)
        assert t.colsets[1].tolist() == [2, 3]
        assert t.fill_pattern.has_edge(1, 3)
        assert not has_no_fill(CYCLE4, t)

    def test_fill_matches_dense_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            e = random_graph(12, 0.25, rng)
            t = symbolic_factor(e)
            assert t.nnz - e.n_edges == count_fill(e, range(12))

    @settings(max_examples=100)
    @given(graphs(max_d=14))
    def test_nesting(self, e):
        t = symbolic_factor(e, mcs_order(e))
        for j, p in enumerate(t.parent):
            if p >= 0:
                rest = t.colsets[j][t.colsets[j] != p]
                assert np.isin(rest, t.colsets[p]).all()

    @settings(max_examples=100)
    @given(st.integers(1, 40), st.integers(0, 5), st.integers(0, 2**32 - 1))
    def test_peo_no_fill(self, d, w, seed):
        e = random_chordal_pattern(d, w, np.random.default_rng(seed))
        a = is_chordal(e)
        assert a.is_chordal
        t = symbolic_factor(e, a.peo)
        assert has_no_fill(e, t)
        assert treewidth(t) <= w


class TestCompletion:
    def test_chordal_unchanged(self):
        r = chordal_completion(PATH4)
        assert r.completed == PATH4
        assert len(r.fill_edges) == 0

    def test_cycle_one_chord(self):
        r = chordal_completion(CYCLE4)
        assert len(r.fill_edges) == 1
        assert is_chordal(r.completed).is_chordal

    def test_random_20(self):
        e = random_graph(20, 0.15, np.random.default_rng(7))
        r = chordal_completion(e)
        assert is_chordal(r.completed).is_chordal
        assert e.issubset(r.completed)

    @settings(max_examples=100)
    @given(graphs(max_d=12))
    def test_always_chordal(self, e):
        r = chordal_completion(e)
        assert is_chordal(r.completed).is_chordal
        fill = SparsityPattern.from_edges(e.d, r.fill_edges)
        assert fill.union(e) == r.completed
        assert not any(e.has_edge(i, j) for i, j in r.fill_edges)


class TestTreewidth:
    def test_examples(self):
        assert treewidth(symbolic_factor(PATH4)) == 1
        assert treewidth(symbolic_factor(SparsityPattern.empty(4))) == 0
        assert treewidth(symbolic_factor(TRIANGLE)) == 2

    def test_cliques(self):
        for k in range(1, 9):
            assert treewidth(symbolic_factor(SparsityPattern.complete(k))) == k - 1

    @settings(max_examples=100)
    @given(graphs())
    def test_clique_number_on_chordal(self, e):
        a = is_chordal(e)
        if a.is_chordal:
            assert treewidth(symbolic_factor(e, a.peo)) == max(brute_clique_number(e) - 1, 0)
