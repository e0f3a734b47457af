"""Sparse symmetric matrices and sparsity patterns.

Indices are 0-based throughout the Python API.  Off-diagonal entries are
stored once per unordered pair ``(i, j)`` with ``i < j``; the diagonal is
always present and stored densely.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.linalg import lapack

from .errors import DimensionMismatch

PIVOT_TOL = 1e-12


def _canonical_edges(d: int, edges) -> np.ndarray:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if e.min() < 0 or e.max() >= d:
        raise IndexError(f"edge index out of range for d={d}")
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    keep = lo != hi
    lo, hi = lo[keep], hi[keep]
    key = np.unique(lo * d + hi)
    return np.column_stack([key // d, key % d]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """Symmetric off-diagonal support of a ``d x d`` matrix.

    ``edges`` holds each unordered pair once as ``(i, j)`` with ``i < j``,
    sorted lexicographically.  Build through :meth:`from_edges` or
    :meth:`from_dense` so the canonical form is guaranteed.
    """

    d: int
    edges: np.ndarray

    @classmethod
    def from_edges(cls, d: int, edges: Iterable[Sequence[int]] = ()) -> "SparsityPattern":
        return cls(int(d), _canonical_edges(int(d), list(edges)))

    @classmethod
    def from_dense(cls, mask) -> "SparsityPattern":
        mask = np.asarray(mask)
        i, j = np.nonzero(np.triu(mask != 0, k=1) | np.triu(mask.T != 0, k=1))
        return cls(mask.shape[0], np.column_stack([i, j]).astype(np.int64))

    @classmethod
    def empty(cls, d: int) -> "SparsityPattern":
        return cls.from_edges(d)

    @classmethod
    def complete(cls, d: int) -> "SparsityPattern":
        i, j = np.triu_indices(d, k=1)
        return cls(d, np.column_stack([i, j]).astype(np.int64))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def _keys(self) -> np.ndarray:
        return self.edges[:, 0] * self.d + self.edges[:, 1]

    @cached_property
    def _adjacency(self) -> tuple:
        d = self.d
        if self.n_edges == 0:
            return tuple(np.zeros(0, dtype=np.int64) for _ in range(d))
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        bounds = np.searchsorted(src, np.arange(d + 1))
        return tuple(dst[bounds[v]:bounds[v + 1]] for v in range(d))

    def neighbors(self, j: int) -> np.ndarray:
        """Sorted neighbours of vertex ``j``."""
        return self._adjacency[j]

    def degree(self, j: int) -> int:
        return len(self._adjacency[j])

    def edge_index(self, i, j):
        """Position of edge ``(i, j)`` in :attr:`edges`, or -1 when absent.

        Accepts scalars or equal-length integer arrays.
        """
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if self.n_edges == 0:
            out = np.full(np.broadcast(i, j).shape, -1, dtype=np.int64)
        else:
            key = np.minimum(i, j) * self.d + np.maximum(i, j)
            pos = np.minimum(np.searchsorted(self._keys, key), self.n_edges - 1)
            out = np.where((self._keys[pos] == key) & (i != j), pos, -1)
        return int(out) if out.ndim == 0 else out

    def has_edge(self, i: int, j: int) -> bool:
        return self.edge_index(i, j) >= 0

    def to_dense(self) -> np.ndarray:
        """Boolean adjacency matrix (diagonal False)."""
        m = np.zeros((self.d, self.d), dtype=bool)
        m[self.edges[:, 0], self.edges[:, 1]] = True
        m[self.edges[:, 1], self.edges[:, 0]] = True
        return m

    def union(self, other: "SparsityPattern") -> "SparsityPattern":
        _check_dims(self.d, other.d)
        return SparsityPattern(self.d, _canonical_edges(self.d, np.vstack([self.edges, other.edges])))

    def difference(self, other: "SparsityPattern") -> "SparsityPattern":
        _check_dims(self.d, other.d)
        keep = ~np.isin(self._keys, other._keys)
        return SparsityPattern(self.d, self.edges[keep])

    def complement(self) -> "SparsityPattern":
        return SparsityPattern.complete(self.d).difference(self)

    def issubset(self, other: "SparsityPattern") -> bool:
        return self.d == other.d and bool(np.all(np.isin(self._keys, other._keys)))

    def induced(self, vertices) -> "SparsityPattern":
        """Subgraph on ``vertices`` (sorted), relabelled ``0..len-1``."""
        vertices = np.asarray(vertices, dtype=np.int64)
        local = np.full(self.d, -1, dtype=np.int64)
        local[vertices] = np.arange(len(vertices))
        a, b = local[self.edges[:, 0]], local[self.edges[:, 1]]
        keep = (a >= 0) & (b >= 0)
        return SparsityPattern.from_edges(len(vertices), np.column_stack([a[keep], b[keep]]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsityPattern):
            return NotImplemented
        return self.d == other.d and np.array_equal(self.edges, other.edges)

    def __repr__(self) -> str:
        return f"SparsityPattern(d={self.d}, n_edges={self.n_edges})"


@dataclass(frozen=True, eq=False)
class SymSparseMatrix:
    """Symmetric matrix with a full diagonal and sparse off-diagonals.

    ``offdiag[e]`` is the value shared by ``(i, j)`` and ``(j, i)`` for
    ``(i, j) = pattern.edges[e]``.
    """

    pattern: SparsityPattern
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        if len(self.diag) != self.pattern.d or len(self.offdiag) != self.pattern.n_edges:
            raise DimensionMismatch("diag/offdiag lengths do not match the pattern")

    @property
    def d(self) -> int:
        return self.pattern.d

    @classmethod
    def from_entries(cls, d: int, diag, entries: Iterable[tuple]) -> "SymSparseMatrix":
        """Build from ``(i, j, value)`` triples; later duplicates win."""
        vals = {}
        for i, j, v in entries:
            if i == j:
                raise ValueError("use diag for diagonal entries")
            vals[(min(i, j), max(i, j))] = float(v)
        pattern = SparsityPattern.from_edges(d, list(vals))
        off = np.array([vals[(int(i), int(j))] for i, j in pattern.edges], dtype=float)
        return cls(pattern, np.asarray(diag, dtype=float).copy(), off).canonical()

    @classmethod
    def from_arrays(cls, d: int, diag, rows, cols, vals) -> "SymSparseMatrix":
        """Build from parallel arrays of distinct off-diagonal positions."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        order = np.lexsort((hi, lo))
        edges = np.column_stack([lo[order], hi[order]]).reshape(-1, 2)
        if len(edges) > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
            raise ValueError("duplicate off-diagonal positions")
        return cls(SparsityPattern(int(d), edges), np.asarray(diag, dtype=float).copy(), vals[order]).canonical()

    @classmethod
    def from_dense(cls, m, pattern: SparsityPattern | None = None) -> "SymSparseMatrix":
        """Sparse copy of ``m``; uses the nonzeros of ``m`` when no pattern is given."""
        m = np.asarray(m, dtype=float)
        if pattern is None:
            pattern = SparsityPattern.from_dense(m)
            return cls(pattern, np.diag(m).copy(), m[pattern.edges[:, 0], pattern.edges[:, 1]].copy())
        return project(m, pattern)

    @classmethod
    def identity(cls, d: int) -> "SymSparseMatrix":
        return cls(SparsityPattern.empty(d), np.ones(d), np.zeros(0))

    def canonical(self) -> "SymSparseMatrix":
        """Drop exact-zero off-diagonal values from the pattern."""
        keep = self.offdiag != 0
        if keep.all():
            return self
        return SymSparseMatrix(
            SparsityPattern(self.d, self.pattern.edges[keep]), self.diag, self.offdiag[keep]
        )

    def get(self, i: int, j: int) -> float:
        if i == j:
            return float(self.diag[i])
        e = self.pattern.edge_index(i, j)
        return float(self.offdiag[e]) if e >= 0 else 0.0

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diag).astype(float)
        i, j = self.pattern.edges[:, 0], self.pattern.edges[:, 1]
        m[i, j] = self.offdiag
        m[j, i] = self.offdiag
        return m

    def to_scipy(self):
        import scipy.sparse as sp

        i, j = self.pattern.edges[:, 0], self.pattern.edges[:, 1]
        rows = np.concatenate([np.arange(self.d), i, j])
        cols = np.concatenate([np.arange(self.d), j, i])
        vals = np.concatenate([self.diag, self.offdiag, self.offdiag])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.d, self.d))

    def column_below(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Row indices ``i > j`` and values of the stored entries in column ``j``."""
        lo = np.searchsorted(self.pattern.edges[:, 0], j, side="left")
        hi = np.searchsorted(self.pattern.edges[:, 0], j, side="right")
        return self.pattern.edges[lo:hi, 1], self.offdiag[lo:hi]

    def restrict(self, vertices) -> "SymSparseMatrix":
        """Principal submatrix on sorted ``vertices``, relabelled ``0..len-1``."""
        vertices = np.asarray(vertices, dtype=np.int64)
        local = np.full(self.d, -1, dtype=np.int64)
        local[vertices] = np.arange(len(vertices))
        a = local[self.pattern.edges[:, 0]]
        b = local[self.pattern.edges[:, 1]]
        keep = (a >= 0) & (b >= 0)
        # sorted global edges stay sorted under an increasing relabelling
        pattern = SparsityPattern(len(vertices), np.column_stack([a[keep], b[keep]]))
        return SymSparseMatrix(pattern, self.diag[vertices].copy(), self.offdiag[keep].copy())

    def max_offdiag(self) -> float:
        """``max_{i != j} |M_ij|`` (0 when there are no off-diagonals)."""
        return float(np.abs(self.offdiag).max()) if len(self.offdiag) else 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymSparseMatrix):
            return NotImplemented
        return (
            self.pattern == other.pattern
            and np.array_equal(self.diag, other.diag)
            and np.array_equal(self.offdiag, other.offdiag)
        )

    def __repr__(self) -> str:
        return f"SymSparseMatrix(d={self.d}, n_edges={self.pattern.n_edges})"


@dataclass(frozen=True, eq=False)
class Permutation:
    """Bijection ``q`` on ``0..d-1`` mapping old labels to new positions.

    ``order`` is the inverse map: ``order[k]`` is the old label placed at
    position ``k``, i.e. the elimination sequence when ``q`` is an
    elimination ordering.
    """

    forward: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.forward, dtype=np.int64)
        if not np.array_equal(np.sort(f), np.arange(len(f))):
            raise ValueError("not a permutation")
        object.__setattr__(self, "forward", f)

    @classmethod
    def identity(cls, d: int) -> "Permutation":
        return cls(np.arange(d))

    @classmethod
    def from_order(cls, order) -> "Permutation":
        order = np.asarray(order, dtype=np.int64)
        fwd = np.empty_like(order)
        fwd[order] = np.arange(len(order))
        return cls(fwd)

    @property
    def d(self) -> int:
        return len(self.forward)

    @cached_property
    def order(self) -> np.ndarray:
        inv = np.empty_like(self.forward)
        inv[self.forward] = np.arange(len(self.forward))
        return inv

    def inverse(self) -> "Permutation":
        return Permutation(self.order)

    def compose(self, other: "Permutation") -> "Permutation":
        """Apply ``other`` first, then ``self``."""
        return Permutation(self.forward[other.forward])

    def matrix(self) -> np.ndarray:
        """Dense ``Q`` with ``(Q M Q^T)[q(i), q(j)] = M[i, j]``."""
        q = np.zeros((self.d, self.d))
        q[self.forward, np.arange(self.d)] = 1.0
        return q

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and np.array_equal(self.forward, other.forward)


DenseOrSparse = Union[np.ndarray, SymSparseMatrix]


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatch(f"dimension mismatch: {a} vs {b}")


def as_dense(m: DenseOrSparse) -> np.ndarray:
    if isinstance(m, SymSparseMatrix):
        return m.to_dense()
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    return m


def project(m, e: SparsityPattern) -> SymSparseMatrix:
    """Euclidean projection of a dense symmetric matrix onto pattern ``e``.

    Off-pattern entries are dropped, as are pattern entries whose value is
    exactly zero.
    """
    m = as_dense(m)
    _check_dims(m.shape[0], e.d)
    vals = m[e.edges[:, 0], e.edges[:, 1]].astype(float)
    return SymSparseMatrix(e, np.diag(m).astype(float).copy(), vals).canonical()


def permute_pattern(e: SparsityPattern, q: Permutation) -> SparsityPattern:
    _check_dims(e.d, q.d)
    return SparsityPattern.from_edges(e.d, q.forward[e.edges])


def permute(m: SymSparseMatrix, q: Permutation) -> SymSparseMatrix:
    """``Q M Q^T``: entry ``(q(i), q(j))`` of the result is ``M[i, j]``."""
    _check_dims(m.d, q.d)
    new = q.forward[m.pattern.edges]
    lo, hi = new.min(axis=1), new.max(axis=1)
    order = np.lexsort((hi, lo))
    pattern = SparsityPattern(m.d, np.column_stack([lo[order], hi[order]]))
    diag = np.empty(m.d)
    diag[q.forward] = m.diag
    return SymSparseMatrix(pattern, diag, m.offdiag[order].copy())


def submatrix(m: DenseOrSparse, rows, cols) -> np.ndarray:
    """Dense block ``M[rows, cols]``; absent sparse entries read as 0."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    d = m.d if isinstance(m, SymSparseMatrix) else np.asarray(m).shape[0]
    for idx in (rows, cols):
        if idx.size and (idx.min() < 0 or idx.max() >= d):
            raise IndexError("index out of range")
    if not isinstance(m, SymSparseMatrix):
        return np.asarray(m, dtype=float)[np.ix_(rows, cols)].copy()
    r, c = np.meshgrid(rows, cols, indexing="ij")
    pos = m.pattern.edge_index(r.ravel(), c.ravel())
    if m.pattern.n_edges:
        out = np.where(pos >= 0, m.offdiag[np.maximum(pos, 0)], 0.0).reshape(r.shape)
    else:
        out = np.zeros(r.shape)
    same = r == c
    out[same] = m.diag[r[same]]
    return out


def is_positive_definite(m, pivot_tol: float = PIVOT_TOL) -> bool:
    """Unpivoted Cholesky test; pivots must exceed ``pivot_tol * max|diag|``."""
    a = as_dense(m)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if a.shape[0] == 0:
        return True
    scale = np.abs(np.diag(a)).max()
    if scale == 0:
        return False
    r, info = lapack.dpotrf(a, lower=0, clean=0)
    if info != 0:
        return False
    # LDL^T pivots are the squared Cholesky diagonal
    return bool(np.min(np.diag(r)) ** 2 > pivot_tol * scale)
