"""Maximum-determinant completion on chordal patterns.

Two routes to the same object:

* :func:`solve_dual` builds the sparse inverse ``S = L D L^T`` of the
  completion column by column in reverse elimination order, passing dense
  update blocks down the elimination tree.
* :func:`complete_primal` builds the dense completion itself, one row at a
  time, from the three-block completion formula.

Both expect the pattern to factor without fill in natural order; permute
by a perfect elimination ordering first.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from .chordal import EliminationTree, symbolic_factor
from .errors import NotCompletable, NotNoFill, NotPositiveDefinite
from .spmat import SparsityPattern, SymSparseMatrix, as_dense

PIVOT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CholeskyFactors:
    """``S = L D L^T`` with unit lower-triangular ``L`` on the tree's column sets.

    ``lvals[j]`` holds ``L[I_j, j]`` aligned with ``etree.colsets[j]``.
    ``flops`` counts the floating-point work spent producing the factors.
    """

    etree: EliminationTree
    lvals: tuple
    dvals: np.ndarray
    flops: int = 0

    @property
    def d(self) -> int:
        return self.etree.d

    def logdet(self) -> float:
        return float(np.sum(np.log(self.dvals)))

    def lower_dense(self) -> np.ndarray:
        L = np.eye(self.d)
        for j, (rows, vals) in enumerate(zip(self.etree.colsets, self.lvals)):
            L[rows, j] = vals
        return L

    def to_dense(self) -> np.ndarray:
        L = self.lower_dense()
        return (L * self.dvals) @ L.T

    @cached_property
    def _sparse(self) -> SymSparseMatrix:
        rows, cols, vals = [], [], []
        for j, (I, l) in enumerate(zip(self.etree.colsets, self.lvals)):
            J = np.concatenate([[j], I])
            v = np.concatenate([[1.0], l])
            outer = self.dvals[j] * np.outer(v, v)
            r, c = np.meshgrid(J, J, indexing="ij")
            upper = r <= c
            rows.append(r[upper])
            cols.append(c[upper])
            vals.append(outer[upper])
        rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        vals = np.concatenate(vals) if vals else np.zeros(0)
        acc = sp.coo_matrix((vals, (rows, cols)), shape=(self.d, self.d)).tocsr()
        acc.sum_duplicates()
        diag = acc.diagonal()
        pattern = self.etree.fill_pattern
        off = np.asarray(acc[pattern.edges[:, 0], pattern.edges[:, 1]]).ravel() if pattern.n_edges else np.zeros(0)
        return SymSparseMatrix(pattern, diag, off)

    def to_sparse(self) -> SymSparseMatrix:
        """``L D L^T`` on the fill pattern (entries kept even when they cancel to 0)."""
        return self._sparse

    def inverse_dense(self) -> np.ndarray:
        """``(L D L^T)^{-1} = L^{-T} D^{-1} L^{-1}``, dense; diagnostics only."""
        from scipy.linalg import solve_triangular

        Linv = solve_triangular(self.lower_dense(), np.eye(self.d), lower=True, unit_diagonal=True)
        return (Linv.T / self.dvals) @ Linv


def _column_values(c: SymSparseMatrix, j: int, I: np.ndarray) -> np.ndarray:
    rows, vals = c.column_below(j)
    out = np.zeros(len(I))
    if len(rows):
        out[np.searchsorted(I, rows)] = vals
    return out


def _check_tree(c: SymSparseMatrix, tree: EliminationTree, strict: bool) -> None:
    if tree.d != c.d:
        raise NotNoFill(f"tree has d={tree.d}, matrix has d={c.d}")
    fill = tree.fill_pattern
    if strict and fill != c.pattern:
        raise NotNoFill(
            f"pattern does not factor without fill in natural order "
            f"({fill.n_edges - c.pattern.n_edges} fill edges)"
        )
    if not c.pattern.issubset(fill):
        raise NotNoFill("matrix pattern is not contained in the tree's column sets")


def solve_dual(
    c: SymSparseMatrix,
    tree: EliminationTree | None = None,
    *,
    strict: bool = True,
    pivot_tol: float = PIVOT_TOL,
) -> CholeskyFactors:
    """Cholesky factors of ``S`` with ``Pi_E(S^{-1}) = C``.

    Columns are processed from ``d-1`` down to ``0``.  Column ``j`` needs
    ``V_j = C[I_j, I_j]``, which is not read from ``C`` directly but cut out
    of the parent's block ``C[J_p, J_p]`` with ``J_p = {p} u I_p``, so each
    column touches only its own clique.

    With ``strict=False`` the tree may carry fill beyond ``supp(C)``; the
    extra positions are treated as specified zeros.
    """
    if tree is None:
        tree = symbolic_factor(c.pattern)
    _check_tree(c, tree, strict)
    d = c.d
    scale = float(np.abs(c.diag).max()) if d else 1.0
    thresh = pivot_tol * scale
    children = tree.children
    lvals = [None] * d
    dvals = np.empty(d)
    # stored entries of column j are c.offdiag[ptr[j]:ptr[j+1]]
    ptr = np.searchsorted(c.pattern.edges[:, 0], np.arange(d + 1))
    offdiag = c.offdiag
    rows_below = c.pattern.edges[:, 1]
    pending = {}
    flops = 0
    for j in range(d - 1, -1, -1):
        I = tree.colsets[j]
        n = len(I)
        cjj = float(c.diag[j])
        if n == 0:
            l = np.zeros(0)
            denom = cjj
        else:
            lo, hi = ptr[j], ptr[j + 1]
            if hi - lo == n:
                cvec = offdiag[lo:hi].copy()
            else:
                cvec = np.zeros(n)
                cvec[np.searchsorted(I, rows_below[lo:hi])] = offdiag[lo:hi]
            V = pending.pop(j)
            chol, info = lapack.dpotrf(V, lower=1, clean=0)
            if info != 0 or chol.diagonal().min() ** 2 <= thresh:
                raise NotCompletable(f"update block of column {j} is not positive definite")
            sol, info = lapack.dpotrs(chol, cvec, lower=1)
            l = -sol
            denom = cjj + cvec @ l
            flops += n ** 3 // 3 + 2 * n * n + 2 * n
        if not denom > thresh:
            raise NotCompletable(f"pivot of column {j} is {denom:.3g}")
        dvals[j] = 1.0 / denom
        lvals[j] = l
        kids = children[j]
        if len(kids):
            J = np.concatenate([[j], I])
            block = np.empty((n + 1, n + 1))
            block[0, 0] = cjj
            if n:
                block[0, 1:] = cvec
                block[1:, 0] = cvec
                block[1:, 1:] = V
            for i in kids:
                pos = np.searchsorted(J, tree.colsets[i])
                pending[int(i)] = block[pos[:, None], pos]
                flops += len(pos) ** 2
    return CholeskyFactors(tree, tuple(lvals), dvals, flops)


def block_completion(mAA, mAB, mBB, mBC, mCC) -> np.ndarray:
    """Max-det completion of a 3-block matrix whose ``A``-``C`` block is free.

    The free block becomes ``M_AB M_BB^{-1} M_BC``.
    """
    mAA, mAB, mBB, mBC, mCC = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (mAA, mAB, mBB, mBC, mCC))
    nb = mBB.shape[0]
    if nb == 0:
        raise ValueError("B block must be nonempty")
    chol, info = lapack.dpotrf(mBB, lower=1, clean=1)
    if info != 0:
        raise NotCompletable("M_BB is not positive definite")
    corner = mAB @ lapack.dpotrs(chol, mBC, lower=1)[0]
    return np.block([[mAA, mAB, corner], [mAB.T, mBB, mBC], [corner.T, mBC.T, mCC]])


def complete_primal(m: SymSparseMatrix, tree: EliminationTree | None = None,
                    pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Dense max-det completion, filling rows ``d-2 .. 0`` in turn.

    For row ``k`` with higher neighbours ``B`` and remaining higher indices
    ``C``, the already-completed trailing block supplies
    ``X[k, C] = M[k, B] X[B, B]^{-1} X[B, C]``.  ``tree`` may be passed
    when the symbolic factor of ``m.pattern`` is already known.
    """
    if tree is None:
        tree = symbolic_factor(m.pattern)
    if tree.nnz != m.pattern.n_edges:
        raise NotNoFill("pattern does not factor without fill in natural order")
    d = m.d
    X = m.to_dense()
    scale = float(np.abs(m.diag).max()) if d else 1.0
    thresh = pivot_tol * scale
    if d and not X[d - 1, d - 1] > thresh:
        raise NotCompletable(f"diagonal entry {d - 1} is not positive")
    for k in range(d - 2, -1, -1):
        B = tree.colsets[k]
        if len(B) == 0:
            if not X[k, k] > thresh:
                raise NotCompletable(f"diagonal entry {k} is not positive")
            continue
        free = np.ones(d - k - 1, dtype=bool)
        free[B - k - 1] = False
        C = np.flatnonzero(free) + (k + 1)
        chol, info = lapack.dpotrf(X[np.ix_(B, B)], lower=1, clean=1)
        if info != 0 or np.min(np.diag(chol)) ** 2 <= thresh:
            raise NotCompletable(f"block B of row {k} is not positive definite")
        xkB = X[k, B]
        w = lapack.dpotrs(chol, xkB, lower=1)[0]
        if not X[k, k] - xkB @ w > thresh:
            raise NotCompletable(f"Schur complement of row {k} is not positive")
        if len(C):
            row = w @ X[np.ix_(B, C)]
            X[k, C] = row
            X[C, k] = row
    return X


def sparse_ldl(m: SymSparseMatrix, tree: EliminationTree | None = None, pivot_tol: float = PIVOT_TOL) -> CholeskyFactors:
    """Numeric ``L D L^T`` of ``m`` on the symbolic pattern of ``tree``.

    Raises :class:`NotPositiveDefinite` when a pivot drops below
    ``pivot_tol * max|diag|``.
    """
    if tree is None:
        tree = symbolic_factor(m.pattern)
    _check_tree(m, tree, strict=False)
    d = m.d
    scale = float(np.abs(m.diag).max()) if d else 1.0
    thresh = pivot_tol * scale
    diag = m.diag.astype(float).copy()
    cols = [_column_values(m, j, tree.colsets[j]) for j in range(d)]
    lvals = []
    dvals = np.empty(d)
    flops = 0
    for j in range(d):
        piv = diag[j]
        if not piv > thresh:
            raise NotPositiveDefinite(f"pivot {j} is {piv:.3g}")
        I = tree.colsets[j]
        l = cols[j] / piv
        dvals[j] = piv
        lvals.append(l)
        if len(I):
            diag[I] -= piv * l * l
            for a in range(len(I) - 1):
                target = tree.colsets[I[a]]
                pos = np.searchsorted(target, I[a + 1:])
                cols[I[a]][pos] -= piv * l[a] * l[a + 1:]
            flops += len(I) ** 2 + len(I)
    return CholeskyFactors(tree, tuple(lvals), dvals, flops)


def logdet_sparse(m: SymSparseMatrix) -> float:
    """``log det m`` through a fill-reducing sparse factorization."""
    from .chordal import mcs_order
    from .spmat import permute

    q = mcs_order(m.pattern)
    tree = symbolic_factor(m.pattern, q)
    return sparse_ldl(permute(m, q), tree).logdet()


def _logdet_dense(a: np.ndarray) -> float:
    chol, info = lapack.dpotrf(a, lower=1, clean=0)
    if info != 0:
        raise NotPositiveDefinite("matrix is not positive definite")
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def logdet(s) -> float:
    if isinstance(s, CholeskyFactors):
        return s.logdet()
    if isinstance(s, SymSparseMatrix):
        return logdet_sparse(s)
    return _logdet_dense(as_dense(s))


def trace_product(c: SymSparseMatrix, s) -> float:
    """``trace(C S)`` for sparse ``C`` against sparse/dense/factored ``S``."""
    if isinstance(s, CholeskyFactors):
        s = s.to_sparse()
    if isinstance(s, SymSparseMatrix):
        total = float(c.diag @ s.diag)
        pos = s.pattern.edge_index(c.pattern.edges[:, 0], c.pattern.edges[:, 1])
        hit = pos >= 0
        if np.any(hit):
            total += 2.0 * float(c.offdiag[hit] @ s.offdiag[pos[hit]])
        return total
    s = as_dense(s)
    i, j = c.pattern.edges[:, 0], c.pattern.edges[:, 1]
    return float(c.diag @ np.diag(s)) + 2.0 * float(c.offdiag @ s[i, j])


def dual_objective(s, c: SymSparseMatrix) -> float:
    """``-log det S + trace(C S) + d``."""
    return -logdet(s) + trace_product(c, s) + c.d


def verify_foc(f: CholeskyFactors, c: SymSparseMatrix) -> float:
    """``max |Pi_E(S^{-1}) - C|`` over the diagonal and the tree's column sets."""
    X = f.inverse_dense()
    pattern: SparsityPattern = f.etree.fill_pattern
    i, j = pattern.edges[:, 0], pattern.edges[:, 1]
    target = np.zeros(len(i))
    pos = c.pattern.edge_index(i, j)
    if c.pattern.n_edges:
        target = np.where(pos >= 0, c.offdiag[np.maximum(pos, 0)], 0.0)
    res = np.abs(np.diag(X) - c.diag).max(initial=0.0)
    if len(i):
        res = max(res, float(np.abs(X[i, j] - target).max()))
    return float(res)
