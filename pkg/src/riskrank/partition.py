"""Connected components and recursive spectral bisection of the company graph."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import lobpcg

from riskrank.graph import BipartiteGraph, UnipartiteGraph

logger = logging.getLogger(__name__)


class DisconnectedGraphError(ValueError):
    pass


class DegenerateBisectionError(ValueError):
    pass


class PartitionIntegrityError(ValueError):
    pass


@dataclass
class FiedlerResult:
    vector: np.ndarray
    eigenvalue: float
    residual: float
    iterations: int
    converged: bool = True
    subspace: Optional[np.ndarray] = field(default=None, repr=False)


class FiedlerConvergenceError(RuntimeError):
    def __init__(self, best: FiedlerResult):
        super().__init__(
            f"Fiedler vector did not converge in {best.iterations} matvecs "
            f"(best residual {best.residual:.3e})"
        )
        self.best = best


@dataclass
class PartitionSet:
    """Retained company partitions plus what was dropped along the way.

    ``provenance[i]`` is ``(root_component, path)`` where ``path`` is a string
    of ``-``/``+`` sign choices, with ``.k`` marking the k-th connected piece of
    a side that fell apart after a cut.
    """

    partitions: list
    provenance: list
    dropped: list = field(default_factory=list)
    unsplit: list = field(default_factory=list)
    max_size: int = 50000
    min_size: int = 50

    def __len__(self):
        return len(self.partitions)

    @property
    def sizes(self) -> list:
        return [len(p) for p in self.partitions]

    @property
    def n_retained(self) -> int:
        return sum(self.sizes)

    def assignment(self) -> dict:
        """Company id -> partition index for retained companies."""
        return {c: k for k, part in enumerate(self.partitions) for c in part}

    def summary(self) -> dict:
        sizes = np.array(self.sizes, dtype=np.int64)
        return {
            "partition_count": len(self.partitions),
            "retained_nodes": int(sizes.sum()),
            "dropped_nodes": len(self.dropped),
            "max_size": self.max_size,
            "min_size": self.min_size,
            "size_min": int(sizes.min()) if sizes.size else 0,
            "size_max": int(sizes.max()) if sizes.size else 0,
            "size_mean": float(sizes.mean()) if sizes.size else 0.0,
            "size_median": float(np.median(sizes)) if sizes.size else 0.0,
            "sizes": [int(s) for s in sizes],
            "unsplit_partitions": list(self.unsplit),
        }


def _adjacency(g) -> sp.csr_matrix:
    if isinstance(g, UnipartiteGraph):
        return g.adjacency()
    return sp.csr_matrix(g)


def connected_components(g):
    """Return ``(n_components, labels)``; labels are numbered by smallest member index."""
    adj = _adjacency(g)
    if adj.shape[0] == 0:
        return 0, np.zeros(0, dtype=np.int64)
    n, labels = csgraph.connected_components(adj, directed=False)
    # relabel by first occurrence so numbering follows node order
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    relabel = np.empty(n, dtype=np.int64)
    relabel[order] = np.arange(n)
    return int(n), relabel[labels]


def _laplacian(adj: sp.csr_matrix):
    deg = np.asarray(adj.sum(axis=1)).ravel()
    lap = (sp.diags(deg) - adj).tocsr()
    return lap, deg


def _deflate(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def _fix_sign(v: np.ndarray, tol: float) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) >= tol)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def _power(lap, sigma, v, tol, max_iter):
    best = None
    for it in range(1, max_iter + 1):
        w = sigma * v - lap @ v
        w = _deflate(w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        v = w / norm
        lv = lap @ v
        lam = float(v @ lv)
        res = float(np.linalg.norm(lv - lam * v))
        if best is None or res < best[2]:
            best = (v, lam, res, it)
        if res <= tol:
            return v, lam, res, it, True
    v, lam, res, it = best if best else (v, 0.0, np.inf, 0)
    return v, lam, res, max_iter, False


def _orthonormal_step(basis, w):
    # two passes of classical Gram-Schmidt keep the basis orthonormal to working precision
    for _ in range(2):
        w = w - basis.T @ (basis @ w)
    return w


def _lanczos(lap, sigma, block, tol, max_iter, krylov_dim, keep):
    """Thick-restart Lanczos on ``sigma*I - L`` restricted to the complement of ones.

    ``block`` holds one or more orthonormal starting vectors. Each cycle does a
    Rayleigh-Ritz step on the current basis, keeps the ``keep`` leading Ritz
    vectors and extends them with the Krylov sequence of the best Ritz
    vector's residual up to ``krylov_dim`` vectors. For a single starting
    vector this spans the same space as plain restarted Lanczos.
    Returns the best Ritz pair and the kept block.
    """
    n = block.shape[1]
    m = max(2, min(krylov_dim, n - 1))
    keep = max(1, min(keep, m - 1))
    floor = 1e-12 * max(sigma, 1.0)
    basis = np.zeros((m, n))
    images = np.zeros((m, n))
    size = min(block.shape[0], m)
    basis[:size] = block[:size]
    used = 0
    for i in range(size):
        images[i] = _deflate(sigma * basis[i] - lap @ basis[i])
        used += 1

    best = (basis[0], np.nan, np.inf)
    best_block = basis[:1].copy()
    while True:
        proj = basis[:size] @ images[:size].T
        _, vecs = np.linalg.eigh(0.5 * (proj + proj.T))
        # leading Ritz vectors first; contiguous so the product goes through BLAS
        rot = np.ascontiguousarray(vecs[:, ::-1][:, :keep].T)
        kept = rot.shape[0]
        basis[:kept] = rot @ basis[:size]
        images[:kept] = rot @ images[:size]
        size = kept

        v = basis[0] / np.linalg.norm(basis[0])
        lv = lap @ v
        used += 1
        lam = float(v @ lv)
        res = float(np.linalg.norm(lv - lam * v))
        if res < best[2]:
            best = (v.copy(), lam, res)
            best_block = basis[:size].copy()
        if res <= tol or used >= max_iter:
            break

        theta = float(basis[0] @ images[0])
        w = _orthonormal_step(basis[:size], images[0] - theta * basis[0])
        norm = np.linalg.norm(w)
        if norm < floor:
            break
        basis[size] = w / norm
        for i in range(size, m):
            images[i] = _deflate(sigma * basis[i] - lap @ basis[i])
            used += 1
            size = i + 1
            if i + 1 == m or used >= max_iter:
                break
            w = _orthonormal_step(basis[: i + 1], images[i])
            norm = np.linalg.norm(w)
            if norm < floor:
                break
            basis[i + 1] = w / norm

    v, lam, res = best
    return v, lam, res, used, res <= tol, best_block


LOBPCG_CAP = 1500


def _lobpcg(lap, deg, block, tol, max_iter):
    """Preconditioned solve for the smallest eigenpair orthogonal to ones.

    Uses the inverse degree as a Jacobi preconditioner. The residual is
    recomputed here rather than trusted from the solver. Runs that stall near
    the tolerance are cut off early so Lanczos can finish them.
    """
    n = lap.shape[0]
    x = block[:1].T.copy()
    ones = np.full((n, 1), 1.0 / np.sqrt(n))
    precond = sp.diags(1.0 / deg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, vecs, hist = lobpcg(
            lap, x, M=precond, Y=ones, largest=False, tol=0.5 * tol,
            maxiter=max_iter, retResidualNormsHistory=True,
        )
    v = _deflate(np.asarray(vecs)[:, 0])
    v /= np.linalg.norm(v)
    lv = lap @ v
    lam = float(v @ lv)
    res = float(np.linalg.norm(lv - lam * v))
    used = len(hist) + 1
    return v, lam, res, used, res <= tol


def _start_block(n, seed, start):
    if start is None:
        v = _deflate(np.random.default_rng(seed).standard_normal(n))
        return (v / np.linalg.norm(v))[None, :]
    block = np.atleast_2d(np.asarray(start, dtype=np.float64))
    block = block - block.mean(axis=1, keepdims=True)
    q, r = np.linalg.qr(block.T)
    good = np.abs(np.diag(r)) > 1e-10 * max(1.0, np.abs(r).max())
    if not good.any():
        return _start_block(n, seed, None)
    return q[:, good].T


def fiedler_vector(
    g,
    tol: float = 1e-8,
    max_iter: int = 10000,
    method: str = "lobpcg",
    seed: int = 0,
    krylov_dim: int = 60,
    keep: int = 20,
    start=None,
) -> FiedlerResult:
    """Eigenvector of the graph Laplacian for its second-smallest eigenvalue.

    Works on the shifted operator ``sigma*I - L`` with ``sigma`` the Gershgorin
    bound ``2 * max degree``, so the wanted vector becomes the dominant one once
    the all-ones direction is projected out. ``method`` picks plain power
    iteration or thick-restart Lanczos on that operator; both use matvecs only and
    ``max_iter`` caps the matvec count. The default ``"lobpcg"`` runs a
    degree-preconditioned LOBPCG on ``L`` itself, constrained against the ones
    vector, and hands its iterate to Lanczos if it misses ``tol``; graphs under
    20 nodes go straight to Lanczos. The sign is fixed so the first entry
    with ``|v_i| >= tol`` is positive. ``start`` optionally seeds the Lanczos
    basis with one or more vectors (rows); the result's ``subspace`` holds the
    leading Ritz vectors for warm-starting related problems.

    Raises DisconnectedGraphError for disconnected input and
    FiedlerConvergenceError (carrying the best iterate) when the residual
    ``||Lv - lambda v||`` stays above ``tol``.
    """
    adj = _adjacency(g)
    n = adj.shape[0]
    if n < 3:
        raise ValueError("fiedler_vector needs at least 3 nodes")
    if (adj.data < 0).any():
        raise ValueError("negative edge weight")
    ncomp, _ = connected_components(adj)
    if ncomp != 1:
        raise DisconnectedGraphError(f"graph has {ncomp} connected components")

    lap, deg = _laplacian(adj)
    sigma = 2.0 * float(deg.max())
    block = _start_block(n, seed, start)
    subspace = None
    if method == "power":
        v, lam, res, it, ok = _power(lap, sigma, block[0], tol, max_iter)
    elif method == "lanczos" or (method == "lobpcg" and n < 20):
        v, lam, res, it, ok, subspace = _lanczos(lap, sigma, block, tol, max_iter, krylov_dim, keep)
    elif method == "lobpcg":
        v, lam, res, it, ok = _lobpcg(lap, deg, block, tol, min(max_iter, LOBPCG_CAP))
        subspace = v[None, :]
        if not ok and it < max_iter:
            logger.debug("lobpcg residual %.3g above tol, continuing with lanczos", res)
            v, lam, res, more, ok, subspace = _lanczos(
                lap, sigma, v[None, :], tol, max_iter - it, krylov_dim, keep
            )
            it += more
    else:
        raise ValueError(f"unknown method {method!r}")

    result = FiedlerResult(_fix_sign(v, tol), lam, res, it, ok, subspace)
    if not ok:
        raise FiedlerConvergenceError(result)
    return result


def split_by_sign(vector: np.ndarray, tol: float = 1e-8):
    """Index arrays ``(negative, non_negative)``; entries with ``|v_i| < tol`` count as zero."""
    vector = np.asarray(vector, dtype=np.float64)
    neg = np.flatnonzero(vector <= -tol)
    pos = np.flatnonzero(vector > -tol)
    if neg.size == 0 or pos.size == 0:
        raise DegenerateBisectionError("degenerate bisection: one side is empty")
    return neg, pos


def spectral_bisection(g, tol: float = 1e-8, max_iter: int = 10000, method: str = "lobpcg"):
    """Split a connected graph by the signs of its Fiedler vector.

    For a UnipartiteGraph returns two lists of node ids, otherwise two index arrays.
    """
    result = fiedler_vector(g, tol=tol, max_iter=max_iter, method=method)
    neg, pos = split_by_sign(result.vector, tol)
    if isinstance(g, UnipartiteGraph):
        return [g.node_ids[i] for i in neg], [g.node_ids[i] for i in pos]
    return neg, pos


def recursive_partition(
    g: UnipartiteGraph,
    max_size: int = 50000,
    min_size: int = 50,
    tol: float = 1e-8,
    max_iter: int = 10000,
    method: str = "lobpcg",
) -> PartitionSet:
    """Components, bisected until each piece has fewer than ``max_size`` nodes.

    Pieces smaller than ``min_size`` are dropped at the end. A piece whose
    bisection fails stays whole and is listed in ``unsplit``.
    """
    if min_size < 1 or max_size <= min_size:
        raise ValueError("need 1 <= min_size < max_size")
    adj = g.adjacency()
    ncomp, labels = connected_components(adj)
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    # stack items: (global node indices, provenance, warm-start block or None)
    stack = [
        (nodes, (root, ""), None)
        for root, nodes in enumerate(np.split(order, bounds))
        if nodes.size
    ]
    stack.reverse()

    finished = []
    unsplit = []
    while stack:
        nodes, (root, path), warm = stack.pop()
        if nodes.size < max_size:
            finished.append((nodes, (root, path)))
            continue
        sub = adj[nodes][:, nodes]
        try:
            result = fiedler_vector(sub, tol=tol, max_iter=max_iter, method=method, start=warm)
            sides = split_by_sign(result.vector, tol)
        except (FiedlerConvergenceError, DegenerateBisectionError) as exc:
            logger.warning("partition %s%s kept whole: %s", root, path, exc)
            unsplit.append(f"{root}{path}")
            finished.append((nodes, (root, path)))
            continue
        children = []
        for sign, side in zip("-+", sides):
            part = nodes[side]
            k, lab = connected_components(adj[part][:, part])
            pieces = [(side, path + sign)] if k == 1 else [
                (side[lab == c], f"{path}{sign}.{c}") for c in range(k)
            ]
            for local, child_path in pieces:
                block = None if result.subspace is None else result.subspace[:, local]
                children.append((nodes[local], (root, child_path), block))
        stack.extend(reversed(children))

    retained, dropped = [], []
    for nodes, prov in finished:
        if nodes.size >= min_size:
            retained.append((np.sort(nodes), prov))
        else:
            dropped.extend(nodes.tolist())
    retained.sort(key=lambda item: item[0][0])

    ids = g.node_ids
    return PartitionSet(
        partitions=[[ids[i] for i in nodes] for nodes, _ in retained],
        provenance=[prov for _, prov in retained],
        dropped=[ids[i] for i in sorted(dropped)],
        unsplit=unsplit,
        max_size=max_size,
        min_size=min_size,
    )


def restrict_bipartite(b: BipartiteGraph, p: PartitionSet) -> list:
    """One bipartite graph per partition.

    Each keeps its partition's companies, every person with an edge into them
    and exactly those edges; persons spanning partitions appear in each.
    """
    cindex = {c: i for i, c in enumerate(b.company_ids)}
    out = []
    for part in p.partitions:
        missing = [c for c in part if c not in cindex]
        if missing:
            raise PartitionIntegrityError(f"companies not in bipartite graph: {missing[:5]}")
        cidx = np.sort(np.array([cindex[c] for c in part], dtype=np.int64))
        cmap = np.full(b.n_companies, -1, dtype=np.int64)
        cmap[cidx] = np.arange(cidx.size)
        mask = cmap[b.edge_company] >= 0
        pidx = np.unique(b.edge_person[mask])
        pmap = np.full(b.n_persons, -1, dtype=np.int64)
        pmap[pidx] = np.arange(pidx.size)
        ec = cmap[b.edge_company[mask]]
        ep = pmap[b.edge_person[mask]]
        order = np.lexsort((ep, ec))
        out.append(
            BipartiteGraph(
                [b.company_ids[i] for i in cidx],
                [b.person_ids[i] for i in pidx],
                ec[order],
                ep[order],
                b.weight[mask][order],
            )
        )
    return out


def restrict_unipartite(g: UnipartiteGraph, p: PartitionSet) -> list:
    """Induced company subgraph per partition."""
    return [g.subgraph(part) for part in p.partitions]


def partition_assignment_rows(node_ids, p: PartitionSet) -> list:
    """Rows ``(company_id, partition_id, dropped_flag)`` for every node id, in id order."""
    assign = p.assignment()
    rows = []
    for c in node_ids:
        k: Optional[int] = assign.get(c)
        rows.append((c, "" if k is None else k, 0 if k is not None else 1))
    return rows
