"""Personalized PageRank on the company graph and BiRank on the company-person graph.

Both iterate a fixed point that blends propagated scores with a restart
vector. Restart vectors are used as given (binary risk, no normalization),
so scores only compare within a single run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from riskrank.graph import BipartiteGraph, UnipartiteGraph

ROW_STOCHASTIC = "row_stochastic"
SYMMETRIC = "symmetric_degree_normalized"


class NumericalError(ArithmeticError):
    def __init__(self, iteration: int, what: str = "non-finite score"):
        super().__init__(f"{what} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class PageRankParams:
    alpha: float = 0.85
    epsilon: float = 1e-8
    max_iter: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass(frozen=True)
class BiRankParams:
    alpha: float = 0.85
    beta: float = 0.85
    epsilon: float = 1e-8
    max_iter: int = 1000

    def __post_init__(self):
        for name in ("alpha", "beta"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class RankResult:
    scores: np.ndarray
    iterations: int
    final_residual: float
    converged: bool


@dataclass
class NormalizedMatrix:
    """A sparse transition matrix tagged with how it was normalized.

    For BiRank the matrix is company-by-person.
    """

    matrix: sp.csr_matrix
    kind: str

    @property
    def shape(self):
        return self.matrix.shape


def _as_matrix(g) -> sp.csr_matrix:
    if isinstance(g, UnipartiteGraph):
        return g.adjacency()
    if isinstance(g, BipartiteGraph):
        return g.weight_matrix()
    return sp.csr_matrix(g, dtype=np.float64)


def row_normalize(g) -> NormalizedMatrix:
    """Divide each row of the weighted adjacency by its sum; empty rows stay zero."""
    w = _as_matrix(g)
    if w.nnz and w.data.min() < 0:
        raise ValueError("negative edge weight")
    deg = np.asarray(w.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return NormalizedMatrix((sp.diags(inv) @ w).tocsr(), ROW_STOCHASTIC)


def symmetric_normalize(b) -> NormalizedMatrix:
    """``S_ij = W_ij / (sqrt(d_i) * sqrt(d_j))`` with weighted company and person degrees."""
    w = _as_matrix(b)
    if w.nnz and w.data.min() < 0:
        raise ValueError("negative edge weight")
    du = np.asarray(w.sum(axis=1)).ravel()
    dp = np.asarray(w.sum(axis=0)).ravel()
    iu = np.divide(1.0, np.sqrt(du), out=np.zeros_like(du), where=du > 0)
    ip = np.divide(1.0, np.sqrt(dp), out=np.zeros_like(dp), where=dp > 0)
    return NormalizedMatrix((sp.diags(iu) @ w @ sp.diags(ip)).tocsr(), SYMMETRIC)


def pagerank(a: NormalizedMatrix, e, params: PageRankParams = PageRankParams()) -> RankResult:
    """Iterate ``r <- alpha * A^T r + (1 - alpha) * e`` from ``r = e``.

    Mass moves along edges: node i collects ``A_ji * r_j`` from each neighbour
    j. Stops when the L2 change drops to ``epsilon`` or after ``max_iter``.
    """
    if a.kind != ROW_STOCHASTIC:
        raise ValueError("pagerank expects a row-stochastic matrix")
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (a.shape[0],):
        raise ValueError(f"restart vector has shape {e.shape}, expected ({a.shape[0]},)")
    at = a.matrix.T.tocsr()
    alpha = params.alpha
    teleport = (1.0 - alpha) * e
    r_new = e.copy()
    error = np.inf
    i = 0
    while i < params.max_iter and error > params.epsilon:
        r = r_new
        r_new = alpha * (at @ r) + teleport
        error = float(np.linalg.norm(r - r_new))
        i += 1
        if not np.isfinite(error):
            raise NumericalError(i)
    return RankResult(r_new, i, error, error <= params.epsilon)


def birank(s: NormalizedMatrix, u0, p0, params: BiRankParams = BiRankParams()):
    """Alternate ``u <- alpha*S p + (1-alpha)*u0`` and ``p <- beta*S^T u + (1-beta)*p0``.

    ``s`` is company-by-person, ``u`` holds company scores and ``p`` person
    scores. The person update uses the fresh ``u``. Stops when the summed L1
    change of both sides drops to ``epsilon``. Returns ``(companies, persons)``.
    """
    if s.kind != SYMMETRIC:
        raise ValueError("birank expects a symmetric degree-normalized matrix")
    nu, npers = s.shape
    u0 = np.asarray(u0, dtype=np.float64)
    p0 = np.asarray(p0, dtype=np.float64)
    if u0.shape != (nu,) or p0.shape != (npers,):
        raise ValueError(f"restart shapes {u0.shape}, {p0.shape} do not match {s.shape}")
    m = s.matrix
    mt = m.T.tocsr()
    alpha, beta = params.alpha, params.beta
    qu = (1.0 - alpha) * u0
    qp = (1.0 - beta) * p0
    u, p = u0.copy(), p0.copy()
    error = np.inf
    i = 0
    while i < params.max_iter and error > params.epsilon:
        u_new = alpha * (m @ p) + qu
        p_new = beta * (mt @ u_new) + qp
        error = float(np.abs(p - p_new).sum() + np.abs(u - u_new).sum())
        u, p = u_new, p_new
        i += 1
        if not np.isfinite(error):
            raise NumericalError(i)
    ok = error <= params.epsilon
    return RankResult(u, i, error, ok), RankResult(p, i, error, ok)
