"""Rank-quality statistics for binary risk labels.

All metrics depend on scores only through their order, so any strictly
increasing transform of the scores leaves them unchanged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats


def midranks(values) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # boundaries of runs of equal values
    change = np.flatnonzero(np.diff(xs) != 0) + 1
    starts = np.concatenate([[0], change])
    stops = np.concatenate([change, [xs.size]])
    ranks = np.empty(x.size, dtype=np.float64)
    for s, e in zip(starts, stops):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks


def _tie_sizes(values) -> np.ndarray:
    _, counts = np.unique(np.asarray(values, dtype=np.float64), return_counts=True)
    return counts


def spearman(scores, labels):
    """Spearman's rho on midranks with a t-approximation two-sided p-value.

    Returns ``(nan, nan)`` when either input is constant.
    """
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n = x.size
    if n < 3:
        raise ValueError("spearman needs at least 3 observations")
    rx = midranks(x) - (n + 1) / 2.0
    ry = midranks(y) - (n + 1) / 2.0
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        return math.nan, math.nan
    rho = float(rx @ ry) / denom
    rho = min(1.0, max(-1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return rho, p


def mann_whitney(scores_label0, scores_label1):
    """Mann-Whitney U for group 1 over group 0 with a tie-corrected normal approximation.

    ``U`` counts pairs where the label-1 score beats the label-0 score, ties
    counting one half, so ``U = n0 * n1`` means complete separation. Returns
    ``(U, Z, p)`` with a two-sided p. No continuity correction.
    """
    a = np.asarray(scores_label0, dtype=np.float64)
    b = np.asarray(scores_label1, dtype=np.float64)
    n0, n1 = a.size, b.size
    if n0 == 0 or n1 == 0:
        raise ValueError("mann_whitney needs both groups non-empty")
    pooled = np.concatenate([a, b])
    n = n0 + n1
    ranks = midranks(pooled)
    u = float(ranks[n0:].sum()) - n1 * (n1 + 1) / 2.0
    mu = n0 * n1 / 2.0
    t = _tie_sizes(pooled).astype(np.float64)
    tie_term = float((t**3 - t).sum()) / (n * (n - 1)) if n > 1 else 0.0
    var = n0 * n1 / 12.0 * ((n + 1) - tie_term)
    if var <= 0.0:
        return u, 0.0, 1.0
    z = (u - mu) / math.sqrt(var)
    p = 2.0 * float(stats.norm.sf(abs(z)))
    return u, z, p


def rank_order(scores, ids: Optional[Sequence] = None) -> np.ndarray:
    """Indices sorted by score descending, ties broken by ascending id."""
    s = np.asarray(scores, dtype=np.float64)
    if ids is None:
        ids = np.arange(s.size)
    keys = np.asarray(ids)
    return np.lexsort((keys, -s))


def precision_recall_at(scores, labels, n_selected: int, ids: Optional[Sequence] = None):
    """Precision and recall of selecting the ``n_selected`` top-scored subjects."""
    y = np.asarray(labels, dtype=np.int64)
    n = y.size
    if not 1 <= n_selected <= n:
        raise ValueError(f"n_selected must lie in [1, {n}]")
    n1 = int((y == 1).sum())
    hits = int((y[rank_order(scores, ids)[:n_selected]] == 1).sum())
    recall = hits / n1 if n1 else math.nan
    return hits / n_selected, recall


def pr_curve(scores, labels, points: Sequence[int], ids: Optional[Sequence] = None) -> list:
    """``(n_selected, precision, recall)`` at each point, from one sort."""
    y = np.asarray(labels, dtype=np.int64)
    n1 = int((y == 1).sum())
    hits = np.cumsum(y[rank_order(scores, ids)] == 1)
    out = []
    for m in points:
        tp = int(hits[m - 1])
        out.append((int(m), tp / m, tp / n1 if n1 else math.nan))
    return out


def target_chart(scores, labels, bin_count: int = 20, ids: Optional[Sequence] = None) -> list:
    """Equal-size bins of the ranking, best first.

    Returns ``(bin_index, bin_size, positive_rate, lift)`` per bin; leading
    bins take the remainder when the count does not divide evenly.
    """
    if bin_count < 2:
        raise ValueError("bin_count must be at least 2")
    y = np.asarray(labels, dtype=np.int64)
    if y.size < bin_count:
        raise ValueError("fewer subjects than bins")
    overall = float((y == 1).mean())
    bins = []
    for i, chunk in enumerate(np.array_split(y[rank_order(scores, ids)], bin_count)):
        rate = float((chunk == 1).mean())
        lift = rate / overall if overall > 0 else math.nan
        bins.append((i, int(chunk.size), rate, lift))
    return bins


def default_pr_points(n: int, n_points: int = 200) -> list:
    if n == 0:
        return []
    pts = set(np.unique(np.linspace(1, n, min(n, n_points)).round().astype(int)).tolist())
    for frac in (0.01, 0.05, 0.1, 0.2, 0.5):
        pts.add(max(1, int(round(frac * n))))
    return sorted(pts)


@dataclass
class MetricReport:
    algorithm: str
    rho: float
    rho_p: float
    U: float
    Z: float
    Z_p: float
    n: int
    n0: int
    n1: int
    coverage: int = 0
    pr_curve: list = field(default_factory=list)
    target_bins: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)

    def precision_recall(self, n_selected: int):
        for m, prec, rec in self.pr_curve:
            if m == n_selected:
                return prec, rec
        raise KeyError(n_selected)


def evaluate(
    algorithm: str,
    ids: Sequence,
    scores,
    labels,
    bin_count: int = 20,
    pr_points: Optional[Sequence[int]] = None,
) -> MetricReport:
    """Full metric report over the labeled subset of ``ids``.

    ``labels`` may contain ``-1`` for unknown; those entries count towards
    coverage only.
    """
    ids = np.asarray(ids)
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    known = y >= 0
    ids_k, s_k, y_k = ids[known], s[known], y[known]
    n = int(known.sum())
    n1 = int((y_k == 1).sum())
    rho, rho_p = spearman(s_k, y_k) if n >= 3 else (math.nan, math.nan)
    if n1 and n - n1:
        u, z, zp = mann_whitney(s_k[y_k == 0], s_k[y_k == 1])
    else:
        u, z, zp = math.nan, math.nan, math.nan
    points = default_pr_points(n) if pr_points is None else [m for m in pr_points if 1 <= m <= n]
    return MetricReport(
        algorithm=algorithm,
        rho=rho,
        rho_p=rho_p,
        U=u,
        Z=z,
        Z_p=zp,
        n=n,
        n0=n - n1,
        n1=n1,
        coverage=int(s.size),
        pr_curve=pr_curve(s_k, y_k, points, ids_k),
        target_bins=target_chart(s_k, y_k, bin_count, ids_k) if n >= bin_count else [],
    )


def wilcoxon_ranks(ids, scores, labels) -> list:
    """``(id, label, midrank)`` rows over labeled subjects, the data behind a rank boxplot."""
    ids = np.asarray(ids)
    y = np.asarray(labels, dtype=np.int64)
    known = y >= 0
    r = midranks(np.asarray(scores, dtype=np.float64)[known])
    return [(str(i), int(lab), float(rk)) for i, lab, rk in zip(ids[known], y[known], r)]
