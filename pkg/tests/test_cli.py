import datetime as dt
import json

import numpy as np
import pytest

import riskrank.crossval as cv
from riskrank import io, pipeline
from riskrank.cli import build_parser, main
from riskrank.datagen import register_preset
from riskrank.graph import RegisterRecord, RiskVector, Role, build_bipartite, project_unipartite
from riskrank.ranking import NumericalError

HEADER = "person_id,company_id,role,start_date,end_date\n"


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    d = tmp_path_factory.mktemp("world")
    assert main(["generate", "--preset", "plain", "--out", str(d / "data"), "--seed", "5",
                 "--n-companies", "400", "--n-persons", "700", "--base-rate", "0.08"]) == 0
    assert main(["build", "--records", str(d / "data" / "records.csv"), "--out", str(d / "graphs")]) == 0
    assert main(["partition", "--graphs", str(d / "graphs"), "--out", str(d / "parts"),
                 "--max-size", "150", "--min-size", "3"]) == 0
    return d


def _rank_args(world, out, *extra):
    return ["rank", "--graphs", str(world / "graphs"), "--partitions", str(world / "parts" / "partitions.csv"),
            "--risk", str(world / "data" / "risk.csv"), "--out", str(out), "--folds", "5",
            "--workers", "2", "--no-figures", *extra]


# ---------------------------------------------------------------- io

def test_records_round_trip(tmp_path):
    recs = [
        RegisterRecord("P1", "C1", Role.MANAGING_DIRECTOR, dt.date(2000, 1, 1), dt.date(2004, 1, 1)),
        RegisterRecord("P2", "C1", Role.SHAREHOLDER_MANAGING_DIRECTOR, dt.date(2010, 5, 6), None),
    ]
    path = io.write_records(tmp_path / "r.csv", recs)
    assert io.read_records(path) == (recs, [])


def test_foreign_role_rejected_not_fatal(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text(HEADER + "P1,C1,auditor,2000-01-01,\nP1,C2,managing_director,2000-01-01,\n")
    recs, rejected = io.read_records(path)
    assert [r.company_id for r in recs] == ["C2"] and rejected[0][0] == 2


def test_risk_round_trip_and_validation(tmp_path):
    risk = RiskVector({"C1": 1, "C2": 0})
    assert io.read_risk(io.write_risk(tmp_path / "k.csv", risk)).labels == risk.labels
    (tmp_path / "bad.csv").write_text("entity_id,risk\nC1,2\n")
    with pytest.raises(io.InputError, match=":2"):
        io.read_risk(tmp_path / "bad.csv")


def test_graph_files_round_trip(world, tmp_path):
    data = io.read_records(world / "data" / "records.csv")[0]
    b, surr, _ = build_bipartite(data)
    u = project_unipartite(b)
    io.write_graphs(tmp_path, b, u, surr, {})
    b2, u2, s2 = io.read_graphs(tmp_path)
    assert b2.company_ids == b.company_ids and b2.person_ids == b.person_ids
    assert (b2.weight_matrix() != b.weight_matrix()).nnz == 0
    assert list(u2.edges()) == list(u.edges())
    assert s2.pairs == surr.pairs


# ---------------------------------------------------------------- build

def test_build_tiny_fixture(tmp_path, capsys):
    rec = tmp_path / "r.csv"
    rec.write_text(HEADER + "P1,C1,managing_director,2000-01-01,2004-01-01\n"
                            "P1,C2,managing_director,2002-01-01,\n"
                            "P2,C2,shareholder_managing_director,2010-01-01,2012-01-01\n")
    assert main(["build", "--records", str(rec), "--out", str(tmp_path / "g")]) == 0
    stats = io.read_json(tmp_path / "g" / io.GRAPH_STATS)
    assert stats["bipartite"]["n_companies"] == 2 and stats["bipartite"]["n_persons"] == 2
    assert stats["bipartite"]["n_edges"] == 3 and stats["unipartite"]["n_edges"] == 1


def test_build_empty_file_warns(tmp_path, caplog):
    rec = tmp_path / "r.csv"
    rec.write_text(HEADER)
    assert main(["build", "--records", str(rec), "--out", str(tmp_path / "g")]) == 0
    assert "no usable records" in caplog.text
    assert io.read_json(tmp_path / "g" / io.GRAPH_STATS)["bipartite"]["n_edges"] == 0


def test_build_malformed_date_names_line(tmp_path, capsys):
    rec = tmp_path / "r.csv"
    rec.write_text(HEADER + "P1,C1,managing_director,2000-01-01,\nP2,C1,managing_director,2000-13-01,\n")
    assert main(["build", "--records", str(rec), "--out", str(tmp_path / "g")]) == 1
    assert "r.csv:3" in capsys.readouterr().err


def test_build_rejected_role_exits_nonzero(tmp_path):
    rec = tmp_path / "r.csv"
    rec.write_text(HEADER + "P1,C1,auditor,2000-01-01,\nP1,C2,managing_director,2000-01-01,\n")
    assert main(["build", "--records", str(rec), "--out", str(tmp_path / "g")]) == 1
    assert (tmp_path / "g" / io.GRAPH_STATS).exists()


def test_build_aligns_risk(world, tmp_path):
    assert main(["build", "--records", str(world / "data" / "records.csv"),
                 "--risk", str(world / "data" / "risk.csv"), "--out", str(tmp_path)]) == 0
    rows = [r for _, r in io.read_table(tmp_path / "risk_aligned.csv")]
    assert {r["risk"] for r in rows} <= {"-1", "0", "1"}
    assert io.read_json(tmp_path / io.GRAPH_STATS)["labeled_companies"] == sum(r["risk"] != "-1" for r in rows)


# ---------------------------------------------------------------- usage

def test_usage_errors_are_input_errors(tmp_path):
    assert main(["rank", "--no-such-flag"]) == 1
    assert main(["partition", "--graphs", str(tmp_path / "missing")]) == 1
    assert main(["partition"]) == 1
    assert main(["build", "--records", str(tmp_path / "missing.csv")]) == 1


def test_every_option_lists_its_default():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.choices and "rank" in a.choices)
    for name, sp in sub.choices.items():
        for action in sp._actions:
            if action.dest != "help":
                text = action.help or ""
                assert "default" in text or "(required)" in text, (name, action.dest)


def test_rank_default_folds_is_ten():
    args = build_parser().parse_args(["rank"])
    assert args.folds == 10 and args.algorithm == "both"


def test_config_file_and_flag_precedence(world, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"min_size": 5, "partition": {"max_size": 120}, "rank": {"bins": 7}}))
    out = tmp_path / "p"
    assert main(["partition", "--config", str(cfg), "--graphs", str(world / "graphs"),
                 "--out", str(out), "--min-size", "4"]) == 0
    summary = io.read_json(out / "partition_summary.json")
    assert summary["max_size"] == 120 and summary["min_size"] == 4


def test_config_unknown_key_rejected(world, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"partition": {"maxsize": 3}}))
    assert main(["partition", "--config", str(cfg), "--graphs", str(world / "graphs")]) == 1
    cfg.write_text("{not json")
    assert main(["partition", "--config", str(cfg), "--graphs", str(world / "graphs")]) == 1


def test_bad_parameter_value_is_input_error(world, tmp_path):
    assert main(_rank_args(world, tmp_path, "--alpha", "1.5")) == 1


# ---------------------------------------------------------------- partition / rank / bench

def test_partition_idempotent(world, tmp_path):
    assert main(["partition", "--graphs", str(world / "graphs"), "--out", str(tmp_path),
                 "--max-size", "150", "--min-size", "3"]) == 0
    assert _tree(tmp_path) == _tree(world / "parts")


def test_rank_rerun_identical_bytes(world, tmp_path):
    assert main(_rank_args(world, tmp_path / "a")) == 0
    assert main(_rank_args(world, tmp_path / "b", "--workers", "1")) == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a == b
    assert {"metrics_pagerank.json", "metrics_birank.json", "scores_birank.csv", "folds.csv"} <= set(a)


def test_rank_nonconvergence_is_partial(world, tmp_path):
    assert main(_rank_args(world, tmp_path, "--algorithm", "pagerank", "--max-iter", "2")) == 3
    assert io.read_json(tmp_path / "metrics_pagerank.json")["status"] == "partial"


def test_one_algorithm_failing_keeps_the_other(world, tmp_path, monkeypatch):
    def broken(*_a, **_k):
        raise NumericalError(3)

    monkeypatch.setattr(cv, "pagerank", broken)
    assert main(_rank_args(world, tmp_path)) == 2
    assert io.read_json(tmp_path / "metrics_pagerank.json")["status"] == "numeric_failure"
    assert io.read_json(tmp_path / "metrics_birank.json")["status"] == "ok"
    assert (tmp_path / "scores_birank.csv").exists()


def test_bench_single_repetition_has_no_sd(world, tmp_path):
    args = _rank_args(world, tmp_path, "--repetitions", "1")
    args[0] = "bench"
    args.remove("--no-figures")
    assert main(args) == 0
    report = io.read_json(tmp_path / "bench.json")
    for algo in ("pagerank", "birank"):
        t = report["algorithms"][algo]
        assert t["sd_s"] is None and len(t["runs_s"]) == 1
    assert report["algorithms"]["pagerank"]["partitions"] == report["algorithms"]["birank"]["partitions"]


# ---------------------------------------------------------------- composability

def test_commands_compose_to_reproduce(tmp_path):
    gen = register_preset(seed=3, n_companies=1500, n_persons=2500)
    cfg = pipeline.ReproduceConfig(seed=3, workers=2, figures=False)
    pipeline.run_reproduce(tmp_path / "auto", cfg, gen)

    m = tmp_path / "manual"
    assert main(["generate", "--out", str(m / "data"), "--seed", "3",
                 "--n-companies", "1500", "--n-persons", "2500"]) == 0
    assert main(["build", "--records", str(m / "data" / "records.csv"), "--out", str(m / "graphs")]) == 0
    assert main(["partition", "--graphs", str(m / "graphs"), "--out", str(m / "partitions"),
                 "--max-size", "1000", "--min-size", "10"]) == 0
    assert main(["rank", "--graphs", str(m / "graphs"), "--partitions", str(m / "partitions" / "partitions.csv"),
                 "--risk", str(m / "data" / "risk.csv"), "--out", str(m / "rank"), "--no-figures"]) in (0, 3)

    for step in ("data", "graphs", "partitions", "rank"):
        assert _tree(m / step) == _tree(tmp_path / "auto" / step), step
    scores = io.read_scores(m / "rank" / "scores_birank.csv")
    assert np.isfinite(list(scores.values())).all()
