"""Chordality, elimination orderings and symbolic factorization."""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional

import numpy as np

from .spmat import Permutation, SparsityPattern, permute_pattern


@dataclass(frozen=True, eq=False)
class EliminationTree:
    """Column structure of ``L`` for a pattern eliminated in natural order.

    ``colsets[j]`` is the sorted set of rows ``i > j`` with ``L[i, j] != 0``
    (fill included) and ``parent[j] = min(colsets[j])``, or -1 for a root.
    ``perm`` records the ordering that was applied to the original labels.
    """

    d: int
    parent: np.ndarray
    colsets: tuple
    perm: Permutation

    @cached_property
    def children(self) -> tuple:
        kids: List[list] = [[] for _ in range(self.d)]
        for j, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(j)
        return tuple(np.array(k, dtype=np.int64) for k in kids)

    @cached_property
    def fill_pattern(self) -> SparsityPattern:
        """Pattern of ``L + L^T`` in the permuted labelling."""
        if self.d == 0:
            return SparsityPattern.empty(0)
        cols = np.repeat(np.arange(self.d), [len(c) for c in self.colsets])
        rows = np.concatenate(self.colsets)
        return SparsityPattern.from_edges(self.d, np.column_stack([cols, rows]))

    @property
    def nnz(self) -> int:
        return int(sum(len(c) for c in self.colsets))


@dataclass(frozen=True)
class ChordalAnalysis:
    is_chordal: bool
    peo: Optional[Permutation] = None
    witness: Optional[List[int]] = None


@dataclass(frozen=True)
class CompletionResult:
    completed: SparsityPattern
    ordering: Permutation
    fill_edges: np.ndarray


def mcs_order(e: SparsityPattern) -> Permutation:
    """Maximum cardinality search.

    Vertices are numbered from ``d-1`` down to ``0``; the returned
    permutation sends each vertex to its number, so it is a perfect
    elimination ordering whenever ``e`` is chordal.  Ties go to the largest
    label, which keeps smaller labels earlier in the elimination order (the
    empty graph and an in-order path both map to the identity).
    """
    d = e.d
    weight = np.zeros(d, dtype=np.int64)
    numbered = np.zeros(d, dtype=bool)
    heap = [(0, -v) for v in range(d)]
    heapq.heapify(heap)
    forward = np.empty(d, dtype=np.int64)
    k = d - 1
    while heap:
        negw, negv = heapq.heappop(heap)
        v = -negv
        if numbered[v] or -negw != weight[v]:
            continue
        numbered[v] = True
        forward[v] = k
        k -= 1
        for u in e.neighbors(v):
            if not numbered[u]:
                weight[u] += 1
                heapq.heappush(heap, (-int(weight[u]), -int(u)))
    return Permutation(forward)


def _peo_violation(e: SparsityPattern, q: Permutation):
    """First ``(v, u, w)`` where later neighbours of ``v`` fail to form a clique."""
    pos = q.forward
    for v in q.order:
        nb = e.neighbors(v)
        later = nb[pos[nb] > pos[v]]
        if len(later) < 2:
            continue
        u = later[np.argmin(pos[later])]
        adj_u = e.neighbors(u)
        rest = later[later != u]
        missing = rest[~np.isin(rest, adj_u)]
        if len(missing):
            return int(v), int(u), int(missing[0])
    return None


def _chordless_path(e: SparsityPattern, v: int, u: int, w: int) -> Optional[list]:
    """Shortest ``u -> w`` path avoiding ``v`` and its other neighbours."""
    blocked = np.zeros(e.d, dtype=bool)
    blocked[e.neighbors(v)] = True
    blocked[v] = True
    blocked[u] = blocked[w] = False
    prev = {u: None}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        if x == w:
            path = []
            while x is not None:
                path.append(x)
                x = prev[x]
            return path[::-1]
        for y in e.neighbors(x):
            y = int(y)
            if y not in prev and not blocked[y]:
                prev[y] = x
                queue.append(y)
    return None


def _candidate_triples(e: SparsityPattern, hint):
    if hint:
        yield hint
    for v in range(e.d):
        nb = e.neighbors(v)
        for a in range(len(nb)):
            for b in range(a + 1, len(nb)):
                if not e.has_edge(nb[a], nb[b]):
                    yield v, int(nb[a]), int(nb[b])


def _find_induced_cycle(e: SparsityPattern, hint=None) -> list:
    for v, u, w in _candidate_triples(e, hint):
        path = _chordless_path(e, v, u, w)
        if path is not None:
            return [v] + path
    raise AssertionError("non-chordal graph without an induced cycle")


def is_chordal(e: SparsityPattern) -> ChordalAnalysis:
    """Chordality test with a certificate.

    Returns the MCS ordering as a perfect elimination ordering when the
    graph is chordal, otherwise the vertices of an induced cycle of length
    at least four (in cycle order).
    """
    q = mcs_order(e)
    bad = _peo_violation(e, q)
    if bad is None:
        return ChordalAnalysis(True, peo=q)
    return ChordalAnalysis(False, witness=_find_induced_cycle(e, bad))


def symbolic_factor(e: SparsityPattern, q: Permutation | None = None) -> EliminationTree:
    """Column sets ``I_j`` and elimination tree of ``Q E Q^T`` (fill included)."""
    if q is None:
        q = Permutation.identity(e.d)
    p = permute_pattern(e, q)
    d = p.d
    colsets = []
    parent = np.full(d, -1, dtype=np.int64)
    kids: List[list] = [[] for _ in range(d)]
    for j in range(d):
        nb = p.neighbors(j)
        parts = [nb[nb > j]]
        for c in kids[j]:
            cs = colsets[c]
            parts.append(cs[cs != j])
        col = np.unique(np.concatenate(parts)) if len(parts) > 1 else parts[0].copy()
        colsets.append(col)
        if len(col):
            parent[j] = col[0]
            kids[col[0]].append(j)
    return EliminationTree(d, parent, tuple(colsets), q)


def chordal_completion(e: SparsityPattern) -> CompletionResult:
    """Chordal embedding of ``e`` from symbolic fill under :func:`mcs_order`."""
    q = mcs_order(e)
    tree = symbolic_factor(e, q)
    completed = permute_pattern(tree.fill_pattern, q.inverse())
    fill = completed.difference(e)
    return CompletionResult(completed, q, fill.edges)


def treewidth(t: EliminationTree) -> int:
    """``max_j |I_j|``: the largest clique size minus one for a no-fill tree."""
    return max((len(c) for c in t.colsets), default=0)


def has_no_fill(e: SparsityPattern, t: EliminationTree) -> bool:
    """True when ``t`` (built from ``e`` under ``t.perm``) added no edges."""
    return t.nnz == e.n_edges
