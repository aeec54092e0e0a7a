import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from riskrank.graph import BipartiteGraph, UnipartiteGraph  # noqa: E402


def random_bipartite(seed, n_companies=None, n_persons=None, density=0.15, max_weight=30):
    """Seeded company-person graph with integer weights; no isolated nodes."""
    rng = np.random.default_rng(seed)
    nc = n_companies or int(rng.integers(3, 40))
    npers = n_persons or int(rng.integers(3, 50))
    mask = rng.random((nc, npers)) < density
    # every node gets at least one edge
    mask[np.arange(nc), rng.integers(0, npers, nc)] = True
    mask[rng.integers(0, nc, npers), np.arange(npers)] = True
    w = np.where(mask, rng.integers(1, max_weight + 1, (nc, npers)), 0)
    edges = [(f"C{i:03d}", f"P{j:03d}", float(w[i, j])) for i, j in zip(*np.nonzero(w))]
    return BipartiteGraph.from_edges(edges), w.astype(np.float64)


def random_unipartite(seed, n=None, density=0.1, connected=True):
    """Seeded weighted company graph; a spanning path keeps it connected."""
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(3, 100))
    w = np.triu(np.where(rng.random((n, n)) < density, rng.integers(1, 20, (n, n)), 0), 1)
    if connected:
        perm = rng.permutation(n)
        for a, b in zip(perm[:-1], perm[1:]):
            i, j = min(a, b), max(a, b)
            if w[i, j] == 0:
                w[i, j] = int(rng.integers(1, 20))
    w = (w + w.T).astype(np.float64)
    ids = [f"C{i:03d}" for i in range(n)]
    edges = [(ids[i], ids[j], w[i, j]) for i, j in zip(*np.nonzero(np.triu(w, 1)))]
    return UnipartiteGraph.from_edges(edges, ids), w


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance summary

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args))


def pytest_runtest_logreport(report):
    for key, value in report.user_properties:
        if key != "criterion":
            continue
        number, title = value
        entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "seen": 0})
        if report.when == "call" or report.outcome != "passed":
            entry["seen"] += report.when == "call"
            entry["ok"] = entry["ok"] and report.outcome == "passed"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        ok = entry["ok"] and entry["seen"] > 0
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {entry['title']}")
