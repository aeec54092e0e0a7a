import hashlib
from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest

from riskrank.datagen import GenConfig, generate, register_preset
from riskrank.graph import build_bipartite, project_unipartite
from riskrank.io import write_records


def _graphs(data):
    b, surr, _ = build_bipartite(data.records, data.config.window)
    return b, project_unipartite(b), surr


def _record_hash(data, tmp_path, name):
    path = write_records(tmp_path / name, data.records)
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_config_validation():
    with pytest.raises(ValueError):
        GenConfig(base_rate=1.5)
    with pytest.raises(ValueError):
        GenConfig(n_companies=0)
    with pytest.raises(ValueError):
        GenConfig(tenure_min=5, tenure_max=1)


def test_infeasible_degree_demand_rejected():
    with pytest.raises(ValueError):
        generate(GenConfig(n_persons=5, n_companies=3, hub_count=1, hub_degree=10))


def test_null_config_without_seeds_has_no_risk():
    data = generate(GenConfig(n_persons=800, n_companies=500, homophily=0.0, base_rate=0.0, seed=1))
    assert not any(data.risk.labels.values())
    assert all(t[2] == 0 for t in data.truth)


def test_same_seed_same_records(tmp_path):
    cfg = GenConfig(n_persons=600, n_companies=400, seed=9)
    assert _record_hash(generate(cfg), tmp_path, "a.csv") == _record_hash(generate(cfg), tmp_path, "b.csv")
    other = generate(replace(cfg, seed=10))
    assert _record_hash(other, tmp_path, "c.csv") != _record_hash(generate(cfg), tmp_path, "d.csv")


def test_preset_scale_and_determinism(tmp_path):
    a = generate(register_preset(seed=0))
    companies = {r.company_id for r in a.records if r.company_id.startswith("C")}
    persons = {r.person_id for r in a.records if r.person_id.startswith("P")}
    assert abs(len(companies) - 6000) <= 60
    assert abs(len(persons) - 10000) <= 100
    # roles wholly outside the observation window drop a few companies from the graph
    b, _, _ = _graphs(a)
    in_window = [c for c in b.company_ids if c.startswith("C") and "#" not in c]
    assert 0.95 * len(companies) <= len(in_window) <= len(companies)
    assert _record_hash(a, tmp_path, "x.csv") == _record_hash(generate(register_preset(seed=0)), tmp_path, "y.csv")


def test_every_company_has_a_director():
    data = generate(GenConfig(n_persons=500, n_companies=450, seed=2))
    assert {r.company_id for r in data.records} >= {t[0] for t in data.truth}


@pytest.mark.parametrize("seed", [0, 1])
def test_person_degrees_follow_configured_law(seed):
    cfg = GenConfig(n_persons=6000, n_companies=4000, seed=seed)
    b, _, _ = _graphs(generate(cfg))
    w = b.weight_matrix().tocsc()
    deg = np.diff(w.indptr)
    persons = np.array([p.startswith("P") for p in b.person_ids])
    observed = np.sort(deg[persons])
    support = np.arange(1, cfg.max_degree + 1)
    ecdf = np.searchsorted(observed, support, side="right") / observed.size
    ks = np.abs(ecdf - np.cumsum(cfg.degree_pmf())).max()
    assert observed.size >= 5000
    assert ks <= 0.1


def test_homophily_is_structural():
    cfg = GenConfig(n_persons=6000, n_companies=4000, seed=3, homophily=0.6, base_rate=0.03)
    data = generate(cfg)
    risk = {c: r for c, _, r in data.truth}
    by_person = {}
    for r in data.records:
        by_person.setdefault(r.person_id, set()).add(r.company_id)
    neighbours = set()
    for companies in by_person.values():
        if any(risk.get(c, 0) for c in companies):
            neighbours |= {c for c in companies if c in risk}
    rate = np.mean([risk[c] for c in neighbours])
    assert rate > cfg.base_rate


def test_hub_clique_adds_its_uncovered_pairs():
    k = 40
    cfg = GenConfig(n_persons=3000, n_companies=2000, hub_count=1, hub_degree=k, seed=4)
    data = generate(cfg)
    hub = "P000000"
    without = replace(data, records=[r for r in data.records if r.person_id != hub])
    b_all, u_all, _ = _graphs(data)
    _, u_wo, _ = _graphs(without)
    hub_roles = {r.company_id for r in data.records if r.person_id == hub}
    assert len(hub_roles) == k
    # only roles overlapping the window become edges
    w = b_all.weight_matrix().tocsc()
    col = b_all.person_ids.index(hub)
    hub_companies = sorted(b_all.company_ids[i] for i in w.indices[w.indptr[col]:w.indptr[col + 1]])
    k = len(hub_companies)
    present = {(a, c) for a, c, _ in u_wo.edges()}
    uncovered = [p for p in combinations(hub_companies, 2) if p not in present]
    assert u_all.n_edges - u_wo.n_edges == len(uncovered)
    assert len(uncovered) <= k * (k - 1) // 2
    assert len(uncovered) >= 0.9 * k * (k - 1) // 2


def test_hubs_inflate_projection():
    hubbed = _graphs(generate(register_preset(seed=0)))
    flat = _graphs(generate(register_preset(seed=0, hub_count=0)))
    ratio = lambda g: g[1].n_edges / g[0].n_edges  # noqa: E731
    assert ratio(hubbed) > 3
    assert ratio(flat) < 1.2
