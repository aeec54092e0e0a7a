"""Synthetic directorship registers with planted risk homophily.

Persons draw a number of directorships from a truncated power law; a few
explicit hubs model super-directors. Companies sit in clusters and ordinary
persons mostly direct companies of one cluster, hubs direct companies
anywhere. Risk is seeded at ``base_rate`` and spread for one round along
shared-director links with probability ``homophily``.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from riskrank.graph import ObservationWindow, RegisterRecord, RiskVector, Role

DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class GenConfig:
    n_persons: int = 10000
    n_companies: int = 6000
    degree_exponent: float = 2.5
    max_degree: int = 30
    hub_count: int = 0
    hub_degree: int = 0
    tenure_min: float = 0.1
    tenure_max: float = 30.0
    base_rate: float = 0.03
    homophily: float = 0.6
    one_person_rate: float = 0.02
    managing_firm_rate: float = 0.005
    label_rate: float = 0.5
    cluster_size: int = 40
    cross_cluster_rate: float = 0.1
    repeat_stint_rate: float = 0.05
    open_ended_rate: float = 0.2
    shareholder_rate: float = 0.3
    hub_contagion: bool = False
    window_start: dt.date = dt.date(1991, 1, 1)
    window_end: dt.date = dt.date(2021, 1, 1)
    seed: int = 0

    def __post_init__(self):
        for name in ("n_persons", "n_companies", "max_degree", "cluster_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in (
            "base_rate",
            "homophily",
            "one_person_rate",
            "managing_firm_rate",
            "label_rate",
            "cross_cluster_rate",
            "repeat_stint_rate",
            "open_ended_rate",
            "shareholder_rate",
        ):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.hub_count < 0 or self.hub_degree < 0:
            raise ValueError("hub_count and hub_degree must be non-negative")
        if self.hub_count > self.n_persons:
            raise ValueError("more hubs than persons")
        if not 0 < self.tenure_min <= self.tenure_max:
            raise ValueError("need 0 < tenure_min <= tenure_max")
        if self.degree_exponent <= 0:
            raise ValueError("degree_exponent must be positive")

    @property
    def window(self) -> ObservationWindow:
        return ObservationWindow(self.window_start, self.window_end)

    def degree_pmf(self) -> np.ndarray:
        """Probability of 1..max_degree directorships for an ordinary person."""
        k = np.arange(1, self.max_degree + 1, dtype=np.float64)
        w = k ** -self.degree_exponent
        return w / w.sum()


def register_preset(seed: int = 0, **overrides) -> GenConfig:
    """Roughly 1/50 of the register: 6000 companies, 10000 persons.

    The hubs make the company projection several times denser than the
    company-person graph, as with the real register.
    """
    cfg = GenConfig(
        n_persons=10000,
        n_companies=6000,
        degree_exponent=2.8,
        max_degree=30,
        hub_count=20,
        hub_degree=80,
        base_rate=0.03,
        homophily=0.6,
        seed=seed,
    )
    return replace(cfg, **overrides)


@dataclass
class GeneratedData:
    config: GenConfig
    records: list
    risk: RiskVector
    truth: list = field(default_factory=list)
    degrees: Optional[np.ndarray] = None

    def truth_rows(self):
        return self.truth


def person_id(i: int) -> str:
    return f"P{i:06d}"


def company_id(j: int) -> str:
    return f"C{j:06d}"


def _degrees(cfg: GenConfig, rng) -> np.ndarray:
    deg = rng.choice(np.arange(1, cfg.max_degree + 1), size=cfg.n_persons, p=cfg.degree_pmf())
    deg[: cfg.hub_count] = cfg.hub_degree
    if deg.max(initial=0) > cfg.n_companies:
        raise ValueError("a person's degree exceeds the number of companies")
    if int(deg.sum()) > cfg.n_persons * cfg.n_companies:
        raise ValueError("infeasible degree demands")
    return deg


def _assign_companies(cfg: GenConfig, deg: np.ndarray, rng):
    n_c = cfg.n_companies
    n_clusters = max(1, n_c // cfg.cluster_size)
    cluster = rng.permutation(np.arange(n_c) % n_clusters)
    members = [np.flatnonzero(cluster == k) for k in range(n_clusters)]

    links = [set() for _ in range(cfg.n_persons)]
    home = np.full(cfg.n_persons, -1, dtype=np.int64)

    # every company gets one director from a shuffled pool of stubs
    stubs = rng.permutation(np.repeat(np.arange(cfg.n_persons), deg))
    order = rng.permutation(n_c)
    for j, p in zip(order, stubs[:n_c]):
        links[p].add(int(j))
        if home[p] < 0:
            home[p] = cluster[j]
    unset = home < 0
    home[unset] = rng.integers(0, n_clusters, size=int(unset.sum()))

    for p in range(cfg.n_persons):
        hub = p < cfg.hub_count
        need = int(deg[p]) - len(links[p])
        while need > 0:
            if not hub and rng.random() >= cfg.cross_cluster_rate:
                pool = members[home[p]]
                free = [int(j) for j in pool if int(j) not in links[p]]
                if free:
                    links[p].add(free[int(rng.integers(len(free)))])
                    need -= 1
                    continue
            j = int(rng.integers(n_c))
            if j not in links[p]:
                links[p].add(j)
                need -= 1
    return [sorted(s) for s in links], cluster


def _stints(cfg: GenConfig, rng):
    """Date intervals for one directorship, possibly split in two stints."""
    ws, we = cfg.window_start, cfg.window_end
    span = (we - ws).days
    days = int(round(rng.uniform(cfg.tenure_min, cfg.tenure_max) * DAYS_PER_YEAR))
    days = max(1, min(days, span))
    if rng.random() < cfg.open_ended_rate:
        return [(we - dt.timedelta(days=days), None)]
    start = ws + dt.timedelta(days=int(rng.integers(0, span - days + 1)))
    end = start + dt.timedelta(days=days)
    if days >= 2 and rng.random() < cfg.repeat_stint_rate:
        cut = int(rng.integers(1, days))
        gap_end = start + dt.timedelta(days=cut)
        return [(start, gap_end), (gap_end, end)]
    return [(start, end)]


def _role(cfg: GenConfig, rng) -> Role:
    if rng.random() < cfg.shareholder_rate:
        return Role.SHAREHOLDER_MANAGING_DIRECTOR
    return Role.MANAGING_DIRECTOR


def generate(config: GenConfig) -> GeneratedData:
    """Register records, known risk labels and ground truth; deterministic per seed.

    Ground truth rows are ``(company_id, cluster_id, risk)`` for every company.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    deg = _degrees(cfg, rng)
    links, cluster = _assign_companies(cfg, deg, rng)

    records = []
    for p, companies in enumerate(links):
        pid = person_id(p)
        for j in companies:
            role = _role(cfg, rng)
            for start, end in _stints(cfg, rng):
                records.append(RegisterRecord(pid, company_id(j), role, start, end))

    n_c = cfg.n_companies
    # one-person enterprises: the company directs itself
    for j in np.flatnonzero(rng.random(n_c) < cfg.one_person_rate):
        cid = company_id(int(j))
        for start, end in _stints(cfg, rng):
            records.append(
                RegisterRecord(cid, cid, Role.SHAREHOLDER_MANAGING_DIRECTOR, start, end)
            )
    # managing firms: a company directs another company of its cluster
    for j in np.flatnonzero(rng.random(n_c) < cfg.managing_firm_rate):
        peers = np.flatnonzero((cluster == cluster[j]) & (np.arange(n_c) != j))
        if peers.size == 0:
            continue
        target = int(peers[int(rng.integers(peers.size))])
        for start, end in _stints(cfg, rng):
            records.append(
                RegisterRecord(company_id(int(j)), company_id(target), Role.MANAGING_DIRECTOR, start, end)
            )

    seed_risk = rng.random(n_c) < cfg.base_rate
    exposed = np.zeros(n_c, dtype=bool)
    for p, companies in enumerate(links):
        if p < cfg.hub_count and not cfg.hub_contagion:
            continue
        if companies and seed_risk[companies].any():
            exposed[companies] = True
    spread = rng.random(n_c) < cfg.homophily
    risk = seed_risk | (exposed & spread)

    known = rng.random(n_c) < cfg.label_rate
    labels = {company_id(int(j)): int(risk[j]) for j in np.flatnonzero(known)}
    truth = [(company_id(j), int(cluster[j]), int(risk[j])) for j in range(n_c)]
    return GeneratedData(cfg, records, RiskVector(labels), truth, deg)
