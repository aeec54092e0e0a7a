"""Label-masking k-fold cross-validation of risk scores.

Each labeled company sits in one fold. In run ``f`` the labels of fold ``f``
are hidden (restart entry 0, same as unknown) and those companies take their
score from that run, so no score ever sees its own label. Companies without a
label take their score from run 0.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from riskrank.graph import BipartiteGraph, UnipartiteGraph
from riskrank.ranking import (
    BiRankParams,
    PageRankParams,
    birank,
    pagerank,
    row_normalize,
    symmetric_normalize,
)

ALGORITHMS = ("pagerank", "birank")


@dataclass
class FoldAssignment:
    k: int
    folds: dict
    seed: int

    def fold_of(self, company_id: str) -> int:
        return self.folds.get(company_id, -1)

    def sizes(self) -> list:
        return np.bincount(np.fromiter(self.folds.values(), dtype=np.int64), minlength=self.k).tolist()


def assign_folds(labels: Mapping[str, int], k: int = 10, seed: int = 0) -> FoldAssignment:
    """Stratified fold assignment over labeled companies.

    Within each label stratum ids are shuffled with ``seed`` and dealt round
    robin; the deal continues across strata so total fold sizes also differ by
    at most one. Empty strata are allowed; a non-empty stratum with fewer than
    ``k`` members is an error.
    """
    if k < 2:
        raise ValueError("k-fold cross-validation needs k >= 2")
    strata = {}
    for cid, lab in labels.items():
        strata.setdefault(int(lab), []).append(cid)
    small = {lab: len(ids) for lab, ids in strata.items() if len(ids) < k}
    if small:
        counts = {lab: len(ids) for lab, ids in sorted(strata.items())}
        raise ValueError(f"label stratum smaller than k={k}: stratum counts {counts}")

    rng = np.random.default_rng(seed)
    folds = {}
    offset = 0
    for lab in sorted(strata):
        ids = sorted(strata[lab])
        for pos, j in enumerate(rng.permutation(len(ids))):
            folds[ids[j]] = (offset + pos) % k
        offset = (offset + len(ids)) % k
    return FoldAssignment(k, dict(sorted(folds.items())), seed)


@dataclass
class CVScores:
    """One cross-validated score per retained company, sorted by company id."""

    algorithm: str
    company_ids: list
    scores: np.ndarray
    partition: np.ndarray
    fold: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    converged: np.ndarray

    def __len__(self):
        return len(self.company_ids)

    @property
    def all_converged(self) -> bool:
        return bool(self.converged.all())

    def as_dict(self) -> dict:
        return dict(zip(self.company_ids, self.scores.tolist()))

    def rows(self):
        for i, cid in enumerate(self.company_ids):
            yield (
                cid,
                "company",
                float(self.scores[i]),
                int(self.partition[i]),
                int(self.fold[i]),
                int(self.iterations[i]),
                int(bool(self.converged[i])),
            )


def _prepare(graph, algorithm):
    if algorithm == "pagerank":
        if not isinstance(graph, UnipartiteGraph):
            raise TypeError("pagerank runs on UnipartiteGraph partitions")
        return row_normalize(graph), list(graph.node_ids), None
    if algorithm == "birank":
        if not isinstance(graph, BipartiteGraph):
            raise TypeError("birank runs on BipartiteGraph partitions")
        return symmetric_normalize(graph), list(graph.company_ids), graph.n_persons
    raise ValueError(f"unknown algorithm {algorithm!r}")


def cv_rank(
    graphs: Sequence,
    labels: Mapping[str, int],
    folds: FoldAssignment,
    algorithm: str,
    params: Optional[object] = None,
    workers: int = 1,
) -> CVScores:
    """Cross-validated scores for every company of every partition graph.

    ``graphs[i]`` is partition ``i``: UnipartiteGraph for PageRank,
    BipartiteGraph for BiRank. Tasks (partition x fold) are independent and run
    on up to ``workers`` threads; the merge is keyed by company id so the
    schedule never changes the output.
    """
    if params is None:
        params = PageRankParams() if algorithm == "pagerank" else BiRankParams()
    if folds.k < 2:
        raise ValueError("k-fold cross-validation needs k >= 2")

    prepared = []
    tasks = []
    for pid, graph in enumerate(graphs):
        matrix, cids, n_persons = _prepare(graph, algorithm)
        lab = np.array([labels.get(c, -1) for c in cids], dtype=np.int64)
        fold = np.array([folds.fold_of(c) for c in cids], dtype=np.int64)
        prepared.append((matrix, cids, n_persons, lab, fold))
        for f in range(folds.k):
            owned = (fold == f) | ((fold < 0) & (f == 0))
            if owned.any():
                tasks.append((pid, f))

    def run(task):
        pid, f = task
        matrix, cids, n_persons, lab, fold = prepared[pid]
        restart = ((lab == 1) & (fold != f)).astype(np.float64)
        if algorithm == "pagerank":
            res = pagerank(matrix, restart, params)
        else:
            res, _ = birank(matrix, restart, np.zeros(n_persons), params)
        return res

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    merged = {}
    for (pid, f), res in zip(tasks, results):
        _, cids, _, _, fold = prepared[pid]
        owned = np.flatnonzero((fold == f) | ((fold < 0) & (f == 0)))
        for i in owned:
            if cids[i] in merged:
                raise ValueError(f"company {cids[i]} appears in more than one partition")
            merged[cids[i]] = (
                res.scores[i], pid, f, res.iterations, res.final_residual, res.converged
            )

    ids = sorted(merged)
    cols = list(zip(*(merged[c] for c in ids))) if ids else [()] * 6
    return CVScores(
        algorithm,
        ids,
        np.array(cols[0], dtype=np.float64),
        np.array(cols[1], dtype=np.int64),
        np.array(cols[2], dtype=np.int64),
        np.array(cols[3], dtype=np.int64),
        np.array(cols[4], dtype=np.float64),
        np.array(cols[5], dtype=bool),
    )
