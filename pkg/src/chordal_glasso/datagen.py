"""Synthetic correlation matrices and random chordal patterns.

All randomness goes through ``numpy.random.Generator(PCG64(SeedSequence(...)))``
so that a seed fixes every draw on every platform.  The draw order inside
each generator is part of its contract and is spelled out in the docstrings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chordal import chordal_completion, is_chordal, symbolic_factor, treewidth
from .glasso import beta_bound
from .spmat import SparsityPattern, SymSparseMatrix, is_positive_definite

MARGIN = 0.01
MAX_RETRIES = 100


def make_rng(seed: int, *extra: int) -> np.random.Generator:
    """PCG64 stream keyed by ``(seed, *extra)`` through ``SeedSequence``."""
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, extra)])))


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    edge_low: float = 0.50
    edge_high: float = 0.55
    noise_bound: float = 0.20
    normalize: bool = True
    margin: float = MARGIN
    max_retries: int = MAX_RETRIES

    def __post_init__(self):
        if not 0 < self.noise_bound < self.edge_low < self.edge_high < 1:
            raise ValueError("need 0 < noise_bound < edge_low < edge_high < 1")
        if self.margin <= 0:
            raise ValueError("margin must be positive")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class GenResult:
    sigma: np.ndarray
    pattern: SparsityPattern
    fill_edges: np.ndarray
    edge_min: float
    noise_max: float
    lambda_recommended: float
    attempt: int

    def to_sparse(self) -> SymSparseMatrix:
        return SymSparseMatrix.from_dense(self.sigma)


def _draw(e: SparsityPattern, cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    d = e.d
    iu = np.triu_indices(d, 1)
    A = np.zeros((d, d))
    # noise over the whole strict upper triangle (row-major), then edges
    A[iu] = rng.uniform(-cfg.noise_bound, cfg.noise_bound, size=len(iu[0]))
    if e.n_edges:
        mag = rng.uniform(cfg.edge_low, cfg.edge_high, size=e.n_edges)
        sign = np.where(rng.random(e.n_edges) < 0.5, -1.0, 1.0)
        A[e.edges[:, 0], e.edges[:, 1]] = sign * mag
    A = A + A.T
    np.fill_diagonal(A, np.abs(A).sum(axis=1) + cfg.margin)
    if cfg.normalize:
        s = 1.0 / np.sqrt(np.diag(A))
        A = A * np.outer(s, s)
        np.fill_diagonal(A, 1.0)
    return A


def generate(pattern: SparsityPattern, cfg: GenConfig) -> GenResult:
    """Correlation-like matrix whose large entries sit on a chordal embedding of ``pattern``.

    Steps: embed ``pattern`` chordally; draw noise ``U[-noise, noise]`` for
    every off-diagonal, then magnitudes ``U[edge_low, edge_high]`` and fair
    signs for the embedded edges; make the diagonal dominant by ``margin``
    and rescale to a unit diagonal.  The recommended threshold is the
    midpoint between the largest rescaled noise magnitude and the smallest
    rescaled edge magnitude.  When those ranges overlap the draw is repeated
    with the stream ``(seed, attempt)``; attempt 0 uses ``(seed, 0)``.
    """
    emb = chordal_completion(pattern)
    e = emb.completed
    d = e.d
    mask = e.to_dense()
    off = ~mask
    np.fill_diagonal(off, False)
    for attempt in range(cfg.max_retries + 1):
        A = _draw(e, cfg, make_rng(cfg.seed, attempt))
        absA = np.abs(A)
        edge_min = float(absA[mask].min()) if e.n_edges else math.inf
        noise_max = float(absA[off].max()) if off.any() else 0.0
        if noise_max < edge_min:
            lam = 0.5 * (noise_max + edge_min) if e.n_edges else min(1.0, noise_max + cfg.margin)
            return GenResult(A, e, emb.fill_edges, edge_min, noise_max, lam, attempt)
    raise RuntimeError(f"edge and noise magnitudes overlapped in all {cfg.max_retries + 1} draws")


# --------------------------------------------------------------------------
# random patterns


def banded_pattern(d: int, w: int) -> SparsityPattern:
    """Edges ``|i - j| <= w``: chordal with treewidth ``min(w, d-1)``."""
    if d == 0 or w == 0:
        return SparsityPattern.empty(d)
    i, j = np.triu_indices(d, 1)
    keep = j - i <= w
    return SparsityPattern.from_edges(d, np.column_stack([i[keep], j[keep]]))


def random_graph(d: int, p: float, rng: np.random.Generator) -> SparsityPattern:
    i, j = np.triu_indices(d, 1)
    keep = rng.random(len(i)) < p
    return SparsityPattern.from_edges(d, np.column_stack([i[keep], j[keep]]))


def random_chordal_pattern(d: int, w: int, rng: np.random.Generator, p_root: float = 0.05,
                           shuffle: bool = True) -> SparsityPattern:
    """Random chordal pattern with treewidth at most ``w``.

    Vertices are processed from ``d-2`` down to 0; each picks a parent among
    the later vertices (or stays a root with probability ``p_root``) and a
    random subset of ``{parent} | I_parent`` of size at most ``w``, which is
    a clique.  The identity is then a perfect elimination ordering; labels
    are shuffled unless ``shuffle`` is false.
    """
    colsets = [np.zeros(0, np.int64) for _ in range(d)]
    edges = []
    for v in range(d - 2, -1, -1):
        if w == 0 or rng.random() < p_root:
            continue
        par = int(rng.integers(v + 1, d))
        pool = np.concatenate([[par], colsets[par]])
        size = int(rng.integers(1, min(w, len(pool)) + 1))
        rest = rng.permutation(pool[1:])[: size - 1]
        col = np.sort(np.concatenate([[par], rest])).astype(np.int64)
        colsets[v] = col
        edges.extend((v, int(u)) for u in col)
    e = SparsityPattern.from_edges(d, np.array(edges, dtype=np.int64).reshape(-1, 2))
    if shuffle and d:
        relabel = rng.permutation(d)
        e = SparsityPattern.from_edges(d, relabel[e.edges])
    return e


def random_chordal_forest(d: int, w: int, max_size: int, rng: np.random.Generator) -> SparsityPattern:
    """Disjoint union of random chordal blocks with at most ``max_size`` vertices each.

    Block sizes are uniform on ``1..max_size``; each block is a connected
    :func:`random_chordal_pattern` and the union is relabelled at random.
    """
    edges = []
    start = 0
    while start < d:
        size = min(int(rng.integers(1, max_size + 1)), d - start)
        blk = random_chordal_pattern(size, w, rng, p_root=0.0)
        edges.append(blk.edges + start)
        start += size
    e = SparsityPattern.from_edges(d, np.concatenate(edges) if edges else np.zeros((0, 2), np.int64))
    relabel = rng.permutation(d)
    return SparsityPattern.from_edges(d, relabel[e.edges])


def pattern_width(e: SparsityPattern) -> int:
    a = is_chordal(e)
    if not a.is_chordal:
        raise ValueError("pattern is not chordal")
    return treewidth(symbolic_factor(e, a.peo))


def random_pd_on_pattern(e: SparsityPattern, alpha: float, rng: np.random.Generator,
                         max_tries: int = 100) -> SymSparseMatrix | None:
    """Unit-diagonal PD matrix supported on ``e`` with entries in ``[-alpha, alpha]``.

    Entries are uniform; a draw that is not PD is rejected.  Returns ``None``
    after ``max_tries`` rejections.
    """
    for _ in range(max_tries):
        vals = rng.uniform(-alpha, alpha, size=e.n_edges)
        m = SymSparseMatrix(e, np.ones(e.d), vals)
        if is_positive_definite(m.to_dense()):
            return m
    return None


@dataclass
class CertifiedInstance:
    sigma: np.ndarray
    lam: float
    pattern: SparsityPattern
    alpha: float
    bound: float
    noise_max: float


def certified_instance(e: SparsityPattern, rng: np.random.Generator, frac: float = 0.5,
                       lam: float = 0.5, noise_cap: float | None = None) -> CertifiedInstance:
    """Correlation matrix whose threshold at ``lam`` is chordal with a small complement bound.

    With ``w`` the treewidth of ``e`` and ``alpha = frac * alpha_limit(w, d)``,
    edge entries are ``sign * (lam + u * alpha)`` with ``u ~ U[1/2, 1]``, so
    the thresholded entries lie in ``[alpha/2, alpha]``.  Noise on the
    remaining off-diagonals is uniform with magnitude at most
    ``lam - 2 * bound`` (capped by ``noise_cap``, default ``1/(2d)``), so the
    gap below ``lam`` is at least twice the closed-form bound.  ``frac < 1``
    keeps the small-alpha condition; larger values make the bound useless.
    Draws that are not positive definite are redrawn, halving the noise
    every ten rejections.  Large connected components rarely admit a PD
    matrix with entries above ``lam``; :func:`random_chordal_forest` keeps
    them small.
    """
    d = e.d
    w = pattern_width(e)
    bb = beta_bound(w, max(d, 2), 1.0)
    limit = bb.alpha_limit if math.isfinite(bb.alpha_limit) else 0.5
    alpha = frac * limit
    bound = beta_bound(w, max(d, 2), alpha).value
    cap = 1.0 / (2 * max(d, 1)) if noise_cap is None else noise_cap
    nmax = min(lam - 2 * bound, cap) if math.isfinite(bound) else cap
    nmax = max(nmax, 0.0)
    iu = np.triu_indices(d, 1)
    for tries in range(200):
        if tries and tries % 10 == 0:
            nmax *= 0.5
        u = rng.uniform(0.5, 1.0, size=e.n_edges)
        sign = np.where(rng.random(e.n_edges) < 0.5, -1.0, 1.0)
        noise = rng.uniform(-nmax, nmax, size=len(iu[0]))
        A = np.zeros((d, d))
        A[iu] = noise
        if e.n_edges:
            A[e.edges[:, 0], e.edges[:, 1]] = sign * (lam + u * alpha)
        A = A + A.T
        np.fill_diagonal(A, 1.0)
        if is_positive_definite(A):
            return CertifiedInstance(A, lam, e, alpha, bound, nmax)
    raise RuntimeError("could not draw a positive definite instance")
