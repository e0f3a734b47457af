"""Slow dense oracles used to cross-check the chordal solvers.

Nothing here exploits chordality: the GL oracle is proximal gradient on the
full objective, the completion oracle is cyclic coordinate ascent on
``log det``, and the graph checks enumerate vertex subsets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import List

import numpy as np
from scipy.linalg import lapack

from .errors import NotCompletable, NotConverged, TooLarge
from .spmat import SparsityPattern, SymSparseMatrix, as_dense


@dataclass
class OracleResult:
    solution: np.ndarray
    objective: float
    iterations: int
    converged: bool
    final_step_norm: float
    history: List[float] = field(default_factory=list)


def _chol(a):
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    return c if info == 0 else None


def _inv_from_chol(c):
    inv, _ = lapack.dpotri(c, lower=1)
    return np.tril(inv) + np.tril(inv, -1).T


def _offdiag_l1(S):
    return float(np.abs(S).sum() - np.abs(np.diag(S)).sum())


def _soft_offdiag(Y, thresh):
    out = np.sign(Y) * np.maximum(np.abs(Y) - thresh, 0.0)
    np.fill_diagonal(out, np.diag(Y))
    return out


def dense_glasso(
    sigma, lam: float, tol: float = 1e-12, max_iter: int = 20000, step_tol: float = 1e-8
) -> OracleResult:
    """Proximal gradient with Barzilai-Borwein steps and backtracking.

    The smooth part is ``-log det S + trace(Sigma S)``; the prox soft-thresholds
    off-diagonals by ``t*lam`` and leaves the diagonal alone.  A step is
    accepted only when the iterate stays positive definite, the quadratic
    upper bound holds and the objective does not increase.  Converged once
    the relative objective decrease is at most ``tol`` and the relative step
    ``||S_new - S||_F / max(1, ||S||_F)`` is at most ``step_tol``.
    """
    Sig = as_dense(sigma)
    d = Sig.shape[0]
    if d > 200:
        raise TooLarge("dense_glasso is meant for d <= 200")
    S = np.diag(1.0 / (np.diag(Sig) + lam))
    c = _chol(S)
    W = _inv_from_chol(c)
    smooth = -2.0 * np.sum(np.log(np.diag(c))) + float(np.sum(Sig * S))
    obj = smooth + lam * _offdiag_l1(S)
    history = [obj]
    t = 1.0
    prev = None
    step_norm = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = Sig - W
        if prev is not None:
            dS, dG = S - prev[0], grad - prev[1]
            curv = float(np.sum(dS * dG))
            if curv > 0:
                t = min(max(float(np.sum(dS * dS)) / curv, 1e-10), 1e6)
        stalled = False
        while True:
            S_new = _soft_offdiag(S - t * grad, t * lam)
            c = _chol(S_new)
            if c is not None:
                smooth_new = -2.0 * np.sum(np.log(np.diag(c))) + float(np.sum(Sig * S_new))
                diff = S_new - S
                model = smooth + float(np.sum(grad * diff)) + float(np.sum(diff * diff)) / (2 * t)
                obj_new = smooth_new + lam * _offdiag_l1(S_new)
                if smooth_new <= model + 1e-14 * abs(smooth) and obj_new <= obj:
                    break
            t *= 0.5
            if t < 1e-16:
                stalled = True
                break
        if stalled:
            # rounding floor: no step decreases the objective any more
            converged = step_norm <= step_tol
            break
        step_norm = float(np.linalg.norm(S_new - S) / max(1.0, np.linalg.norm(S)))
        decrease = (obj - obj_new) / max(1.0, abs(obj))
        prev = (S, grad)
        S, W, smooth, obj = S_new, _inv_from_chol(c), smooth_new, obj_new
        history.append(obj)
        if decrease <= tol and step_norm <= step_tol:
            converged = True
            break
    return OracleResult(S, obj, it, converged, step_norm, history)


def dense_maxdet(c: SymSparseMatrix, tol: float = 1e-10, max_sweeps: int = 5000) -> np.ndarray:
    """Max-det completion by cyclic coordinate ascent over the free entries.

    For a free position ``(i, j)`` the determinant is a concave quadratic in
    the entry, maximised by the shift ``Y_ij / (Y_ii Y_jj - Y_ij^2)`` with
    ``Y = X^{-1}``; ``Y`` is kept current with a rank-2 update.  Converged
    when every free ``|Y_ij| <= tol``.  Starts from the zero-filled matrix,
    which must itself be positive definite.
    """
    d = c.d
    if d > 100:
        raise TooLarge("dense_maxdet is meant for d <= 100")
    X = c.to_dense()
    chol = _chol(X)
    if chol is None:
        raise NotCompletable("zero-filled start is not positive definite")
    Y = _inv_from_chol(chol)
    free = c.pattern.complement().edges
    if len(free) == 0:
        return X
    fi, fj = free[:, 0], free[:, 1]
    for _ in range(max_sweeps):
        if np.abs(Y[fi, fj]).max() <= tol:
            return X
        for i, j in zip(fi, fj):
            yij, yii, yjj = Y[i, j], Y[i, i], Y[j, j]
            den = yii * yjj - yij * yij
            if not den > 0:
                raise NotCompletable("iterate lost positive definiteness")
            t = yij / den
            X[i, j] += t
            X[j, i] += t
            # Sherman-Morrison-Woodbury for X + t (e_i e_j^T + e_j e_i^T)
            YU = t * np.column_stack([Y[:, i], Y[:, j]])
            VY = np.vstack([Y[j, :], Y[i, :]])
            K = np.eye(2) + t * np.array([[Y[j, i], Y[j, j]], [Y[i, i], Y[i, j]]])
            Y -= YU @ np.linalg.solve(K, VY)
        chol = _chol(X)
        if chol is None:
            raise NotCompletable("iterate lost positive definiteness")
        Y = _inv_from_chol(chol)
    raise NotConverged(f"no convergence in {max_sweeps} sweeps", result=X)


def _adjacency_bits(e: SparsityPattern) -> List[int]:
    bits = [0] * e.d
    for i, j in e.edges:
        bits[i] |= 1 << int(j)
        bits[j] |= 1 << int(i)
    return bits


def brute_chordality(e: SparsityPattern) -> bool:
    """Ground truth by enumerating every vertex subset of size >= 4.

    A subset is an induced cycle when it is connected and every member has
    exactly two neighbours inside it.
    """
    if e.d > 10:
        raise TooLarge("brute_chordality supports d <= 10")
    adj = _adjacency_bits(e)
    for mask in range(1 << e.d):
        if bin(mask).count("1") < 4:
            continue
        members = [v for v in range(e.d) if mask >> v & 1]
        if any(bin(adj[v] & mask).count("1") != 2 for v in members):
            continue
        seen = 1 << members[0]
        frontier = seen
        while frontier:
            nxt = 0
            for v in members:
                if frontier >> v & 1:
                    nxt |= adj[v] & mask
            frontier = nxt & ~seen
            seen |= nxt
        if seen == mask:
            return False
    return True


def brute_clique_number(e: SparsityPattern) -> int:
    if e.d > 12:
        raise TooLarge("brute_clique_number supports d <= 12")
    if e.d == 0:
        return 0
    best = 1
    for size in range(2, e.d + 1):
        found = any(
            all(e.has_edge(a, b) for a, b in combinations(sub, 2))
            for sub in combinations(range(e.d), size)
        )
        if not found:
            break
        best = size
    return best


def count_fill(e: SparsityPattern, order) -> int:
    """Edges added by the elimination game on ``order`` (dense simulation)."""
    adj = e.to_dense().copy()
    alive = np.ones(e.d, dtype=bool)
    added = 0
    for v in order:
        nb = np.flatnonzero(adj[v] & alive)
        nb = nb[nb != v]
        for a, b in combinations(nb, 2):
            if not adj[a, b]:
                adj[a, b] = adj[b, a] = True
                added += 1
        alive[v] = False
    return added
