"""Register records and the two network models built from them.

The bipartite graph links companies to the persons who directed them. The
unipartite graph links companies that share a director; every person with
``d`` companies contributes a clique of ``d * (d - 1) / 2`` company pairs.
"""

from __future__ import annotations

import datetime as dt
import enum
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

MAX_WEIGHT = 30
# a tenure year is 365.25 days; ceil(days / 365.25) == ceil(4 * days / 1461)
_QUARTER_DAYS_PER_YEAR = 1461

UNKNOWN = -1


class Role(str, enum.Enum):
    MANAGING_DIRECTOR = "managing_director"
    SHAREHOLDER_MANAGING_DIRECTOR = "shareholder_managing_director"


@dataclass(frozen=True)
class RegisterRecord:
    """One directorship stint of a person at a company."""

    person_id: str
    company_id: str
    role: Role
    start_date: dt.date
    end_date: Optional[dt.date] = None

    def __post_init__(self):
        if not self.person_id or not self.company_id:
            raise ValueError("person_id and company_id must be non-empty")
        if not isinstance(self.role, Role):
            object.__setattr__(self, "role", Role(self.role))
        if self.end_date is not None and self.end_date < self.start_date:
            raise ValueError(
                f"end_date {self.end_date} precedes start_date {self.start_date}"
            )


@dataclass(frozen=True)
class ObservationWindow:
    window_start: dt.date = dt.date(1991, 1, 1)
    window_end: dt.date = dt.date(2021, 1, 1)

    def __post_init__(self):
        if not self.window_start < self.window_end:
            raise ValueError("window_start must precede window_end")

    def clip_days(self, start: dt.date, end: Optional[dt.date]) -> Optional[int]:
        """Days of ``[start, end]`` inside the window, or None if disjoint."""
        lo = max(start, self.window_start)
        hi = self.window_end if end is None else min(end, self.window_end)
        if hi < lo:
            return None
        return (hi - lo).days


def weight_from_years(years: float, max_weight: int = MAX_WEIGHT) -> int:
    """Round a tenure up to whole years and clamp it to ``[1, max_weight]``."""
    return int(min(max(int(np.ceil(years)), 1), max_weight))


def weight_from_days(days: int, max_weight: int = MAX_WEIGHT) -> int:
    years_up = -(-4 * days // _QUARTER_DAYS_PER_YEAR)
    return int(min(max(years_up, 1), max_weight))


def compute_edge_weight(
    start: dt.date,
    end: Optional[dt.date],
    window: ObservationWindow,
    max_weight: int = MAX_WEIGHT,
) -> Optional[int]:
    """Tenure weight in whole years, rounded up; None when the stint lies outside the window."""
    days = window.clip_days(start, end)
    if days is None:
        return None
    return weight_from_days(days, max_weight)


@dataclass(frozen=True)
class SurrogateMap:
    """Entities that occur both as a company and as a person, split in two."""

    pairs: dict = field(default_factory=dict)

    def company_id(self, entity_id: str) -> str:
        pair = self.pairs.get(entity_id)
        return entity_id if pair is None else pair[0]

    def person_id(self, entity_id: str) -> str:
        pair = self.pairs.get(entity_id)
        return entity_id if pair is None else pair[1]

    def original(self) -> dict:
        """Reverse lookup from surrogate id to source entity id."""
        out = {}
        for entity, (c, p) in self.pairs.items():
            out[c] = entity
            out[p] = entity
        return out

    def __len__(self):
        return len(self.pairs)


def _free_id(base: str, suffix: str, taken: set) -> str:
    candidate = base + suffix
    while candidate in taken:
        candidate += suffix[-1]
    return candidate


def split_surrogate(entity_id: str, taken: Iterable[str] = (), max_weight: int = MAX_WEIGHT):
    """Return ``(company_surrogate_id, person_surrogate_id, edge_weight)`` for an entity.

    Surrogate ids are ``<id>#c`` and ``<id>#p``, extended until they do not
    collide with anything in ``taken``.
    """
    taken = set(taken)
    c = _free_id(entity_id, "#c", taken)
    taken.add(c)
    p = _free_id(entity_id, "#p", taken)
    return c, p, max_weight


@dataclass
class BipartiteGraph:
    """Weighted company-person graph; edges are index pairs into the two node lists."""

    company_ids: list
    person_ids: list
    edge_company: np.ndarray
    edge_person: np.ndarray
    weight: np.ndarray

    @classmethod
    def empty(cls) -> "BipartiteGraph":
        z = np.zeros(0, dtype=np.int64)
        return cls([], [], z, z.copy(), np.zeros(0, dtype=np.float64))

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], company_ids=None, person_ids=None):
        """Build from ``(company_id, person_id, weight)`` triples. Node order is sorted by id."""
        edges = list(edges)
        companies = sorted(set(company_ids or ()) | {e[0] for e in edges})
        persons = sorted(set(person_ids or ()) | {e[1] for e in edges})
        ci = {c: i for i, c in enumerate(companies)}
        pi = {p: i for i, p in enumerate(persons)}
        merged = {}
        for c, p, w in edges:
            key = (ci[c], pi[p])
            if key in merged:
                raise ValueError(f"duplicate edge ({c}, {p})")
            if w <= 0:
                raise ValueError(f"non-positive weight on edge ({c}, {p})")
            merged[key] = float(w)
        keys = sorted(merged)
        return cls(
            companies,
            persons,
            np.array([k[0] for k in keys], dtype=np.int64),
            np.array([k[1] for k in keys], dtype=np.int64),
            np.array([merged[k] for k in keys], dtype=np.float64),
        )

    @property
    def n_companies(self) -> int:
        return len(self.company_ids)

    @property
    def n_persons(self) -> int:
        return len(self.person_ids)

    @property
    def n_edges(self) -> int:
        return int(self.weight.size)

    def weight_matrix(self) -> sp.csr_matrix:
        """Company-by-person weight matrix."""
        return sp.csr_matrix(
            (self.weight, (self.edge_company, self.edge_person)),
            shape=(self.n_companies, self.n_persons),
        )

    def edges(self):
        for c, p, w in zip(self.edge_company, self.edge_person, self.weight):
            yield self.company_ids[c], self.person_ids[p], float(w)

    def is_bipartite(self) -> bool:
        """2-color check by BFS over the node-kind-agnostic id graph.

        Node ids are pooled without their kind, so a shared id on both sides
        makes the coloring fail.
        """
        adj = defaultdict(set)
        for c, p, _ in self.edges():
            adj[c].add(p)
            adj[p].add(c)
        color = {}
        for root in adj:
            if root in color:
                continue
            color[root] = 0
            stack = [root]
            while stack:
                u = stack.pop()
                for v in adj[u]:
                    if v not in color:
                        color[v] = 1 - color[u]
                        stack.append(v)
                    elif color[v] == color[u]:
                        return False
        return not set(self.company_ids) & set(self.person_ids)


@dataclass
class UnipartiteGraph:
    """Weighted undirected company graph; each edge stored once with ``i < j``."""

    node_ids: list
    edge_i: np.ndarray
    edge_j: np.ndarray
    weight: np.ndarray

    @classmethod
    def from_edges(cls, edges: Iterable[tuple], node_ids=None) -> "UnipartiteGraph":
        edges = list(edges)
        nodes = sorted(set(node_ids or ()) | {e[0] for e in edges} | {e[1] for e in edges})
        idx = {n: i for i, n in enumerate(nodes)}
        merged = {}
        for a, b, w in edges:
            i, j = idx[a], idx[b]
            if i == j:
                raise ValueError(f"self-loop on {a}")
            key = (min(i, j), max(i, j))
            if key in merged:
                raise ValueError(f"duplicate edge ({a}, {b})")
            merged[key] = float(w)
        keys = sorted(merged)
        return cls(
            nodes,
            np.array([k[0] for k in keys], dtype=np.int64),
            np.array([k[1] for k in keys], dtype=np.int64),
            np.array([merged[k] for k in keys], dtype=np.float64),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return int(self.weight.size)

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency matrix."""
        n = self.n_nodes
        rows = np.concatenate([self.edge_i, self.edge_j])
        cols = np.concatenate([self.edge_j, self.edge_i])
        data = np.concatenate([self.weight, self.weight])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    def edges(self):
        for i, j, w in zip(self.edge_i, self.edge_j, self.weight):
            yield self.node_ids[i], self.node_ids[j], float(w)

    def subgraph(self, nodes: Iterable[str]) -> "UnipartiteGraph":
        """Induced subgraph on ``nodes``, keeping sorted node order."""
        keep = sorted(set(nodes))
        index = {n: i for i, n in enumerate(self.node_ids)}
        old = np.array([index[n] for n in keep], dtype=np.int64)
        remap = np.full(self.n_nodes, -1, dtype=np.int64)
        remap[old] = np.arange(old.size)
        mask = (remap[self.edge_i] >= 0) & (remap[self.edge_j] >= 0)
        return UnipartiteGraph(
            keep, remap[self.edge_i[mask]], remap[self.edge_j[mask]], self.weight[mask].copy()
        )


@dataclass
class RiskVector:
    """Known binary risk labels keyed by entity id; anything absent is unknown."""

    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, value in self.labels.items():
            if value not in (0, 1):
                raise ValueError(f"risk label for {key} must be 0 or 1, got {value!r}")

    def __len__(self):
        return len(self.labels)

    def get(self, entity_id: str) -> int:
        return self.labels.get(entity_id, UNKNOWN)

    def align(self, company_ids: Iterable[str], surrogates: Optional[SurrogateMap] = None) -> np.ndarray:
        """Labels for ``company_ids`` as an int array, ``-1`` for unknown.

        Company surrogate ids inherit the label of the entity they were split from.
        """
        back = surrogates.original() if surrogates is not None else {}
        return np.array(
            [self.labels.get(back.get(c, c), UNKNOWN) for c in company_ids], dtype=np.int64
        )


def build_bipartite(
    records: Iterable[RegisterRecord],
    window: ObservationWindow = ObservationWindow(),
    max_weight: int = MAX_WEIGHT,
):
    """Build the company-person graph from register records.

    Repeated stints of one (person, company) pair are merged by summing their
    in-window days before rounding up. Entities found on both sides (one-person
    enterprises, managing firms) are split into a company and a person
    surrogate joined by an edge of ``max_weight``; that edge replaces any
    tenure edge between the two halves.

    Returns ``(graph, surrogates, skipped)`` where ``skipped`` lists records
    lying entirely outside the window.
    """
    days = defaultdict(int)
    skipped = []
    for rec in records:
        d = window.clip_days(rec.start_date, rec.end_date)
        if d is None:
            skipped.append(rec)
            continue
        days[(rec.company_id, rec.person_id)] += d
    if skipped:
        logger.warning("%d record(s) outside the observation window skipped", len(skipped))

    companies = {c for c, _ in days}
    persons = {p for _, p in days}
    taken = companies | persons
    pairs = {}
    for entity in sorted(companies & persons):
        c, p, _ = split_surrogate(entity, taken, max_weight)
        taken.update((c, p))
        pairs[entity] = (c, p)
    surrogates = SurrogateMap(pairs)

    edges = {}
    for (c, p), d in days.items():
        edges[(surrogates.company_id(c), surrogates.person_id(p))] = weight_from_days(d, max_weight)
    for c, p in pairs.values():
        edges[(c, p)] = max_weight

    graph = BipartiteGraph.from_edges((c, p, w) for (c, p), w in edges.items())
    return graph, surrogates, skipped


def project_unipartite(b: BipartiteGraph) -> UnipartiteGraph:
    """Company-company projection over shared persons.

    A person with companies ``a`` and ``b`` contributes ``min(w_a, w_b)`` to
    the pair; contributions of all shared persons are summed. Every company of
    ``b`` is kept as a node, including those without a shared person.
    """
    n = b.n_companies
    if b.n_edges == 0:
        z = np.zeros(0, dtype=np.int64)
        return UnipartiteGraph(list(b.company_ids), z, z.copy(), np.zeros(0))

    order = np.lexsort((b.edge_company, b.edge_person))
    persons = b.edge_person[order]
    companies = b.edge_company[order]
    weights = b.weight[order]
    bounds = np.flatnonzero(np.diff(persons)) + 1
    starts = np.concatenate([[0], bounds])
    stops = np.concatenate([bounds, [persons.size]])

    keys, contrib = [], []
    for s, e in zip(starts, stops):
        d = e - s
        if d < 2:
            continue
        a, c = np.triu_indices(d, 1)
        ca, cb = companies[s:e][a], companies[s:e][c]
        keys.append(np.minimum(ca, cb) * n + np.maximum(ca, cb))
        contrib.append(np.minimum(weights[s:e][a], weights[s:e][c]))

    if not keys:
        z = np.zeros(0, dtype=np.int64)
        return UnipartiteGraph(list(b.company_ids), z, z.copy(), np.zeros(0))

    keys = np.concatenate(keys)
    contrib = np.concatenate(contrib)
    uniq, inverse = np.unique(keys, return_inverse=True)
    summed = np.bincount(inverse, weights=contrib, minlength=uniq.size)
    return UnipartiteGraph(list(b.company_ids), uniq // n, uniq % n, summed)


def _histogram(degrees: np.ndarray) -> dict:
    values, counts = np.unique(degrees, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def graph_stats(g) -> dict:
    """Node, edge, density and degree-histogram counts for either graph kind."""
    if isinstance(g, BipartiteGraph):
        nc, npers, m = g.n_companies, g.n_persons, g.n_edges
        return {
            "kind": "bipartite",
            "n_companies": nc,
            "n_persons": npers,
            "n_nodes": nc + npers,
            "n_edges": m,
            "density": m / (nc * npers) if nc and npers else 0.0,
            "total_weight": float(g.weight.sum()),
            "company_degree_histogram": _histogram(np.bincount(g.edge_company, minlength=nc)),
            "person_degree_histogram": _histogram(np.bincount(g.edge_person, minlength=npers)),
        }
    if isinstance(g, UnipartiteGraph):
        n, m = g.n_nodes, g.n_edges
        deg = np.bincount(np.concatenate([g.edge_i, g.edge_j]), minlength=n)
        return {
            "kind": "unipartite",
            "n_companies": n,
            "n_nodes": n,
            "n_edges": m,
            "density": 2.0 * m / (n * (n - 1)) if n > 1 else 0.0,
            "total_weight": float(g.weight.sum()),
            "degree_histogram": _histogram(deg),
        }
    raise TypeError(f"unsupported graph type {type(g).__name__}")
