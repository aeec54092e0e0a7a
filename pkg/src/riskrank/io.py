"""Delimited-text and JSON readers/writers for records, graphs, partitions and scores."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from riskrank.graph import (
    BipartiteGraph,
    RegisterRecord,
    RiskVector,
    Role,
    SurrogateMap,
    UnipartiteGraph,
)
from riskrank.partition import PartitionSet, partition_assignment_rows

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ("person_id", "company_id", "role", "start_date", "end_date")

BIPARTITE_EDGES = "bipartite_edges.csv"
UNIPARTITE_EDGES = "unipartite_edges.csv"
COMPANIES = "companies.csv"
PERSONS = "persons.csv"
SURROGATES = "surrogates.csv"
GRAPH_STATS = "graph_stats.json"
SKIPPED = "skipped_records.csv"


class InputError(ValueError):
    """Rejected input file content; the message carries the line number."""


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    if value is None:
        return ""
    return str(value)


def write_table(path, header: Sequence[str], rows: Iterable[Sequence], delimiter: str = ",") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path, delimiter: str = ",", required: Sequence[str] = ()):
    """Yield ``(line_number, row_dict)``; checks the header for ``required`` columns."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"{path}:1: missing column(s) {', '.join(missing)}")
        for row in reader:
            yield reader.line_num, row


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (dt.date,)):
        return obj.isoformat()
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def _parse_date(text: str, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise InputError(f"{where}: malformed date {text!r}") from None


def read_records(path, delimiter: str = ","):
    """Parse a register file.

    Returns ``(records, rejected)``; ``rejected`` holds ``(line, reason)`` for
    rows with a role outside the two director roles. Malformed rows raise
    InputError naming the line.
    """
    records, rejected = [], []
    roles = {r.value for r in Role}
    for line, row in read_table(path, delimiter, RECORD_COLUMNS):
        where = f"{path}:{line}"
        if None in row or any(row.get(c) is None for c in RECORD_COLUMNS):
            raise InputError(f"{where}: wrong number of fields")
        role = row["role"].strip()
        if role not in roles:
            logger.warning("%s: role %r not accepted, record skipped", where, role)
            rejected.append((line, f"role {role!r}"))
            continue
        start = _parse_date(row["start_date"], where)
        end_text = row["end_date"].strip()
        end = _parse_date(end_text, where) if end_text else None
        try:
            records.append(
                RegisterRecord(row["person_id"].strip(), row["company_id"].strip(), Role(role), start, end)
            )
        except ValueError as exc:
            raise InputError(f"{where}: {exc}") from None
    return records, rejected


def write_records(path, records: Iterable[RegisterRecord], delimiter: str = ",") -> Path:
    rows = (
        (r.person_id, r.company_id, r.role.value, r.start_date.isoformat(),
         r.end_date.isoformat() if r.end_date else "")
        for r in records
    )
    return write_table(path, RECORD_COLUMNS, rows, delimiter)


def read_risk(path, delimiter: str = ",") -> RiskVector:
    labels = {}
    for line, row in read_table(path, delimiter, ("entity_id", "risk")):
        value = (row["risk"] or "").strip()
        if value not in ("0", "1"):
            raise InputError(f"{path}:{line}: risk must be 0 or 1, got {value!r}")
        entity = (row["entity_id"] or "").strip()
        if not entity:
            raise InputError(f"{path}:{line}: empty entity_id")
        labels[entity] = int(value)
    return RiskVector(labels)


def write_risk(path, risk: RiskVector, delimiter: str = ",") -> Path:
    return write_table(path, ("entity_id", "risk"), sorted(risk.labels.items()), delimiter)


def write_graphs(out_dir, b: BipartiteGraph, u: UnipartiteGraph, surrogates: SurrogateMap,
                 stats: dict, skipped: Sequence[RegisterRecord] = ()) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / COMPANIES, ("company_id",), ((c,) for c in b.company_ids))
    write_table(out / PERSONS, ("person_id",), ((p,) for p in b.person_ids))
    write_table(out / BIPARTITE_EDGES, ("company_id", "person_id", "weight"), b.edges())
    write_table(out / UNIPARTITE_EDGES, ("company_a", "company_b", "weight"), u.edges())
    write_table(
        out / SURROGATES,
        ("entity_id", "company_surrogate_id", "person_surrogate_id"),
        ((e, c, p) for e, (c, p) in sorted(surrogates.pairs.items())),
    )
    write_records(out / SKIPPED, skipped)
    write_json(out / GRAPH_STATS, stats)
    return out


def read_graphs(graph_dir):
    """Load ``(bipartite, unipartite, surrogates)`` written by :func:`write_graphs`."""
    d = Path(graph_dir)
    companies = [r["company_id"] for _, r in read_table(d / COMPANIES, required=("company_id",))]
    persons = [r["person_id"] for _, r in read_table(d / PERSONS, required=("person_id",))]
    bedges = [
        (r["company_id"], r["person_id"], float(r["weight"]))
        for _, r in read_table(d / BIPARTITE_EDGES, required=("company_id", "person_id", "weight"))
    ]
    uedges = [
        (r["company_a"], r["company_b"], float(r["weight"]))
        for _, r in read_table(d / UNIPARTITE_EDGES, required=("company_a", "company_b", "weight"))
    ]
    pairs = {
        r["entity_id"]: (r["company_surrogate_id"], r["person_surrogate_id"])
        for _, r in read_table(d / SURROGATES)
    } if (d / SURROGATES).exists() else {}
    b = BipartiteGraph.from_edges(bedges, companies, persons)
    u = UnipartiteGraph.from_edges(uedges, companies)
    return b, u, SurrogateMap(pairs)


def write_partitions(out_dir, node_ids, p: PartitionSet) -> Path:
    out = Path(out_dir)
    write_table(out / "partitions.csv", ("company_id", "partition_id", "dropped_flag"),
                partition_assignment_rows(node_ids, p))
    summary = p.summary()
    summary["provenance"] = [
        {"partition_id": k, "root_component": root, "path": path}
        for k, (root, path) in enumerate(p.provenance)
    ]
    write_json(out / "partition_summary.json", summary)
    return out / "partitions.csv"


def read_partitions(path, max_size: int = 0, min_size: int = 0) -> PartitionSet:
    parts: dict = {}
    dropped = []
    for line, row in read_table(path, required=("company_id", "partition_id", "dropped_flag")):
        if row["dropped_flag"].strip() == "1":
            dropped.append(row["company_id"])
            continue
        try:
            k = int(row["partition_id"])
        except ValueError:
            raise InputError(f"{path}:{line}: bad partition_id {row['partition_id']!r}") from None
        parts.setdefault(k, []).append(row["company_id"])
    keys = sorted(parts)
    summary_path = Path(path).with_name("partition_summary.json")
    prov = [(None, "")] * len(keys)
    if summary_path.exists():
        summary = read_json(summary_path)
        max_size = max_size or summary.get("max_size", 0)
        min_size = min_size or summary.get("min_size", 0)
        entries = {e["partition_id"]: (e["root_component"], e["path"]) for e in summary.get("provenance", [])}
        prov = [entries.get(k, (None, "")) for k in keys]
    return PartitionSet(
        [sorted(parts[k]) for k in keys], prov, sorted(dropped), [], max_size or 50000, min_size or 50
    )


def write_folds(path, folds) -> Path:
    return write_table(path, ("company_id", "fold_id"), sorted(folds.folds.items()))


SCORE_HEADER = ("node_id", "node_kind", "score", "partition_id", "fold_id", "iterations", "converged")


def write_scores(path, cv_scores) -> Path:
    return write_table(path, SCORE_HEADER, cv_scores.rows())


def read_scores(path) -> dict:
    return {r["node_id"]: float(r["score"]) for _, r in read_table(path, required=SCORE_HEADER)}
