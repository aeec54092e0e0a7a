"""Acceptance criteria 1-10; the terminal summary prints one PASS/FAIL line per criterion."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_bipartite, random_unipartite
from oracles import (
    brute_force_projection,
    dense_birank,
    dense_fiedler,
    dense_pagerank,
    mann_whitney_oracle,
    spearman_oracle,
    splits_agree,
    target_chart_oracle,
    topn_oracle,
)
from riskrank import pipeline
from riskrank.crossval import assign_folds, cv_rank
from riskrank.datagen import GenConfig, generate, register_preset
from riskrank.evaluate import mann_whitney, precision_recall_at, spearman, target_chart
from riskrank.graph import BipartiteGraph, UnipartiteGraph, build_bipartite, project_unipartite
from riskrank.partition import fiedler_vector, recursive_partition, restrict_bipartite, restrict_unipartite
from riskrank.ranking import BiRankParams, PageRankParams, birank, pagerank, row_normalize, symmetric_normalize

criterion = pytest.mark.criterion
WORKERS = pipeline.default_workers()


def _tree(root, skip=("timing.json",)):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name not in skip
    }


def _graphs(cfg):
    data = generate(cfg)
    b, surr, _ = build_bipartite(data.records, cfg.window)
    return data, b, surr, project_unipartite(b)


# ---------------------------------------------------------------- 1

@criterion(1, "sparse PageRank/BiRank equal dense recurrences on 20 graphs within 1e-10, < 10 s")
def test_c1_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        g, w = random_unipartite(seed)
        assert g.n_nodes <= 100
        e = (np.random.default_rng(seed).random(g.n_nodes) < 0.3).astype(float)
        ref, _ = dense_pagerank(w, e, 0.85, 1e-8, 1000)
        worst = max(worst, np.abs(pagerank(row_normalize(g), e).scores - ref).max())

        b, wb = random_bipartite(seed)
        assert b.n_companies + b.n_persons <= 100
        u0 = (np.random.default_rng(seed).random(b.n_companies) < 0.3).astype(float)
        p0 = np.zeros(b.n_persons)
        u, p = birank(symmetric_normalize(b), u0, p0)
        ru, rp, _ = dense_birank(wb, u0, p0, 0.85, 0.85, 1e-8, 1000)
        worst = max(worst, np.abs(u.scores - ru).max(), np.abs(p.scores - rp).max())
    assert worst <= 1e-10
    assert time.perf_counter() - t0 < 10


# ---------------------------------------------------------------- 2

@criterion(2, "two-node PageRank (0.540541, 0.459459) and single-edge BiRank (2/3, 1/3) to 1e-6")
def test_c2_fixed_points():
    a = row_normalize(UnipartiteGraph.from_edges([("A", "B", 1)]))
    r = pagerank(a, [1.0, 0.0], PageRankParams(0.85, 1e-12, 10000))
    np.testing.assert_allclose(r.scores, [0.540541, 0.459459], atol=1e-6)
    s = symmetric_normalize(BipartiteGraph.from_edges([("A", "P", 1)]))
    u, p = birank(s, [1.0], [0.0], BiRankParams(0.5, 0.5, 1e-12, 10000))
    np.testing.assert_allclose([u.scores[0], p.scores[0]], [2 / 3, 1 / 3], atol=1e-6)


# ---------------------------------------------------------------- 3

@pytest.fixture(scope="module")
def leak_world():
    cfg = GenConfig(n_persons=700, n_companies=400, seed=5, homophily=0.6, base_rate=0.08)
    data, b, surr, u = _graphs(cfg)
    parts = recursive_partition(u, max_size=150, min_size=3)
    retained = [c for p in parts.partitions for c in p]
    aligned = data.risk.align(retained, surr)
    labels = {c: int(v) for c, v in zip(retained, aligned) if v >= 0}
    return restrict_unipartite(u, parts), restrict_bipartite(b, parts), labels


@criterion(3, "flipping a node's own label leaves its cross-validated score unchanged (50 nodes)")
@pytest.mark.parametrize("algorithm", ["pagerank", "birank"])
def test_c3_no_label_leakage(leak_world, algorithm):
    ug, bg, labels = leak_world
    graphs = ug if algorithm == "pagerank" else bg
    folds = assign_folds(labels, k=10, seed=0)
    base = cv_rank(graphs, labels, folds, algorithm, workers=WORKERS).as_dict()
    chosen = np.random.default_rng(1).choice(sorted(labels), size=50, replace=False)
    for c in chosen:
        flipped = dict(labels)
        flipped[c] = 1 - flipped[c]
        assert cv_rank(graphs, flipped, folds, algorithm, workers=WORKERS).as_dict()[c] - base[c] == 0


# ---------------------------------------------------------------- 4

@criterion(4, "projected edge count equals brute force; hub preset ratio > 3, hub-free < 1.2")
def test_c4_projection_law():
    for seed in range(10):
        b, _ = random_bipartite(seed)
        assert project_unipartite(b).n_edges == len(brute_force_projection(list(b.edges())))
    _, b, _, u = _graphs(register_preset(seed=0))
    _, fb, _, fu = _graphs(register_preset(seed=0, hub_count=0))
    assert u.n_edges / b.n_edges > 3
    assert fu.n_edges / fb.n_edges < 1.2


# ---------------------------------------------------------------- 5

@criterion(5, "5000-node partition within [10, 500) and Fiedler splits match dense on 20 graphs, < 60 s")
def test_c5_partitioning():
    t0 = time.perf_counter()
    _, _, _, u = _graphs(GenConfig(n_companies=5000, n_persons=8000, seed=0))
    assert u.n_nodes == 5000
    parts = recursive_partition(u, max_size=500, min_size=10)
    sizes = [len(p) for p in parts.partitions]
    assert sizes and all(10 <= s < 500 for s in sizes)
    for seed in range(20):
        n = 20 + 9 * seed
        g, w = random_unipartite(seed, n=n, density=3.0 / n)
        assert g.n_nodes <= 200
        _, dense = dense_fiedler(w)
        assert splits_agree(fiedler_vector(g).vector, dense)
    assert time.perf_counter() - t0 < 60


# ---------------------------------------------------------------- 6

S20 = [0.9, 0.8, 0.8, 0.7, 0.7, 0.7, 0.65, 0.6, 0.55, 0.5, 0.5, 0.45, 0.4, 0.35, 0.3, 0.3, 0.25, 0.2, 0.1, 0.05]
Y20 = [1, 0, 1, 1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0]
ID20 = [f"c{(7 * i) % 20:02d}" for i in range(20)]


def _metrics(s, y, ids):
    s, y = np.asarray(s, dtype=float), np.asarray(y)
    return (
        spearman(s, y),
        mann_whitney(s[y == 0], s[y == 1]),
        [precision_recall_at(s, y, m, ids) for m in range(1, y.size + 1)],
        target_chart(s, y, 3, ids),
    )


@criterion(6, "statistics match exact oracles on fixed datasets and are invariant under x^3 + 1")
def test_c6_statistics_fixtures():
    x = np.arange(1.0, 11.0)
    y = np.array([0, 0, 1, 0, 1, 0, 0, 1, 1, 1])
    rho, _ = spearman(x, y)
    sxy, sxx, syy, _ = spearman_oracle(x, y)
    assert sxy**2 / (sxx * syy) == Fraction(3, 11)
    assert abs(rho - math.sqrt(3 / 11)) <= 1e-9

    g0, g1 = [1, 2, 2, 3, 3, 3], [2, 3, 3, 4, 4, 5]
    u, z, _ = mann_whitney(g0, g1)
    ou, ovar, oz = mann_whitney_oracle(g0, g1)
    assert (Fraction(u), ovar) == (ou, Fraction(783, 22))
    assert abs(z - oz) <= 1e-9

    s20, y20 = np.array(S20), np.array(Y20)
    rho20, _ = spearman(s20, y20)
    assert abs(rho20 - spearman_oracle(S20, Y20)[3]) <= 1e-9
    u20, z20, _ = mann_whitney(s20[y20 == 0], s20[y20 == 1])
    ou20, _, oz20 = mann_whitney_oracle(s20[y20 == 0].tolist(), s20[y20 == 1].tolist())
    assert Fraction(u20) == ou20 and abs(z20 - oz20) <= 1e-9
    for m in range(1, 21):
        prec, rec = precision_recall_at(S20, Y20, m, ID20)
        assert (Fraction(prec), Fraction(rec)) == tuple(Fraction(float(v)) for v in topn_oracle(S20, Y20, ID20, m))
        assert prec == float(topn_oracle(S20, Y20, ID20, m)[0])
    for got, ref in zip(target_chart(S20, Y20, 3, ID20), target_chart_oracle(S20, Y20, ID20, 3)):
        assert got[:3] == (ref[0], ref[1], float(ref[2]))
        assert abs(got[3] - float(ref[3])) <= 1e-9

    assert _metrics(s20, Y20, ID20) == _metrics(s20**3 + 1, Y20, ID20)


# ---------------------------------------------------------------- 7-9

def _reproduce(path, homophily):
    t0 = time.perf_counter()
    report = pipeline.run_reproduce(path, pipeline.ReproduceConfig(seed=0, homophily=homophily, workers=WORKERS))
    return report, time.perf_counter() - t0


@pytest.fixture(scope="session")
def planted(tmp_path_factory):
    return _reproduce(tmp_path_factory.mktemp("planted"), 0.6) + (tmp_path_factory.getbasetemp(),)


@criterion(7, "preset reproduction with h = 0.6: every qualitative claim holds, < 5 min")
def test_c7_qualitative_reproduction(planted):
    report, seconds, _ = planted
    assert 5900 <= report["generator"]["records"] and report["graphs"]["bipartite_companies"] >= 5500
    for algo in ("pagerank", "birank"):
        m = report["metrics"][algo]
        assert m["rho"] > 0 and m["rho_p"] < 0.01
        assert m["Z"] > 0
    assert report["metrics"]["birank"]["top_bin_lift"] > 2
    recall = next(c for c in report["claims"] if c["claim"].startswith("birank recall"))["observed"]
    assert recall["birank_recall"] >= recall["pagerank_recall"]
    assert report["all_pass"]
    assert seconds < 300


@criterion(8, "null control with h = 0: |rho| < 0.05 for both algorithms")
def test_c8_null_control(tmp_path):
    report, _ = _reproduce(tmp_path, 0.0)
    for algo in ("pagerank", "birank"):
        assert abs(report["metrics"][algo]["rho"]) < 0.05


@criterion(9, "two reproduce runs with the same seed give byte-identical non-timing outputs")
def test_c9_determinism(planted, tmp_path):
    _, _, base = planted
    first = next(base.glob("planted*"))
    _reproduce(tmp_path, 0.6)
    a, b = _tree(first), _tree(tmp_path)
    assert set(a) == set(b) and len(a) > 20
    assert [k for k in a if a[k] != b[k]] == []


# ---------------------------------------------------------------- 10

@criterion(10, "bench reports mean, sd and per-run times over 20 repetitions for both algorithms")
def test_c10_bench_harness(tmp_path):
    cfg = GenConfig(n_persons=500, n_companies=300, seed=2, base_rate=0.1)
    pipeline.run_generate(cfg, tmp_path / "data")
    pipeline.run_build(tmp_path / "data" / "records.csv", tmp_path / "graphs", cfg.window)
    pipeline.run_partition(tmp_path / "graphs", tmp_path / "parts", max_size=120, min_size=3)
    report = pipeline.run_bench(
        tmp_path / "graphs", tmp_path / "parts" / "partitions.csv", tmp_path / "data" / "risk.csv",
        tmp_path / "bench", k=5, workers=WORKERS,
    )
    assert report["repetitions"] == 20
    algos = report["algorithms"]
    assert set(algos) == {"pagerank", "birank"}
    for t in algos.values():
        assert len(t["runs_s"]) == 20 and all(r > 0 for r in t["runs_s"])
        assert t["mean_s"] == pytest.approx(np.mean(t["runs_s"]))
        assert t["sd_s"] == pytest.approx(np.std(t["runs_s"], ddof=1))
    assert algos["pagerank"]["partitions"] == algos["birank"]["partitions"] == report["partitions"] > 1
    assert (tmp_path / "bench" / "bench_runs.csv").exists()
