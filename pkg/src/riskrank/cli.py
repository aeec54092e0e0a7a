"""Command line: ``riskrank {generate,build,partition,rank,bench,reproduce}``.

Every option can also come from a JSON config file given with ``--config``.
Top-level keys apply to any subcommand that has the option; a nested object
named after a subcommand applies to that subcommand only. Flags given on the
command line win over the file.

Exit codes: 0 success, 1 input error, 2 numeric failure, 3 partial results
(some ranking runs did not converge).
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from riskrank import pipeline
from riskrank.crossval import ALGORITHMS
from riskrank.datagen import GenConfig, register_preset
from riskrank.graph import MAX_WEIGHT, ObservationWindow
from riskrank.io import InputError
from riskrank.partition import FiedlerConvergenceError
from riskrank.ranking import BiRankParams, NumericalError, PageRankParams

logger = logging.getLogger("riskrank")

SUBCOMMANDS = ("generate", "build", "partition", "rank", "bench", "reproduce")


class UsageError(Exception):
    """Bad flags or config; reported as an input error."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as a numeric failure here
    def error(self, message):
        raise UsageError(message)


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}") from None


def _add_common(p):
    p.add_argument("--config", type=Path, default=None, help="JSON config file (default: none)")
    p.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"),
                   help="logging verbosity (default: %(default)s)")


def _add_rank_params(p):
    pr, br = PageRankParams(), BiRankParams()
    g = p.add_argument_group("ranking parameters")
    g.add_argument("--alpha", type=float, default=pr.alpha, help="PageRank damping (default: %(default)s)")
    g.add_argument("--epsilon", type=float, default=pr.epsilon,
                   help="PageRank L2 stopping threshold (default: %(default)s)")
    g.add_argument("--max-iter", type=int, default=pr.max_iter,
                   help="PageRank iteration cap (default: %(default)s)")
    g.add_argument("--birank-alpha", type=float, default=br.alpha,
                   help="BiRank company-side damping (default: %(default)s)")
    g.add_argument("--birank-beta", type=float, default=br.beta,
                   help="BiRank person-side damping (default: %(default)s)")
    g.add_argument("--birank-epsilon", type=float, default=br.epsilon,
                   help="BiRank L1 stopping threshold (default: %(default)s)")
    g.add_argument("--birank-max-iter", type=int, default=br.max_iter,
                   help="BiRank iteration cap (default: %(default)s)")


def _add_cv(p, seed_flag="--seed"):
    p.add_argument("--folds", type=int, default=10, help="cross-validation folds (default: %(default)s)")
    p.add_argument(seed_flag, type=int, default=0, dest="fold_seed" if seed_flag != "--seed" else "seed",
                   help="fold assignment seed (default: %(default)s)")
    p.add_argument("--workers", type=int, default=pipeline.default_workers(),
                   help="concurrent (partition x fold) tasks (default: %(default)s, the CPU count)")


def _add_rank_inputs(p):
    p.add_argument("--graphs", type=Path, default=None, help="graph directory written by build (required)")
    p.add_argument("--partitions", type=Path, default=None, help="partitions.csv written by partition (required)")
    p.add_argument("--risk", type=Path, default=None, help="risk label file (required)")
    p.add_argument("--algorithm", choices=("pagerank", "birank", "both"), default="both",
                   help="algorithm selection (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="riskrank", description="Risk ranking of companies on director networks.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    gen_defaults = GenConfig()

    p = sub.add_parser("generate", help="write a synthetic register, risk labels and ground truth")
    _add_common(p)
    p.add_argument("--out", type=Path, default=Path("data"), help="output directory (default: %(default)s)")
    p.add_argument("--preset", choices=("register", "plain"), default="register",
                   help="'register' adds super-director hubs; 'plain' is hub-free (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default: %(default)s)")
    p.add_argument("--homophily", type=float, default=gen_defaults.homophily,
                   help="risk spread probability along shared directors (default: %(default)s)")
    p.add_argument("--base-rate", type=float, default=gen_defaults.base_rate,
                   help="seed risk rate (default: %(default)s)")
    p.add_argument("--n-companies", type=int, default=gen_defaults.n_companies,
                   help="companies (default: %(default)s)")
    p.add_argument("--n-persons", type=int, default=gen_defaults.n_persons, help="persons (default: %(default)s)")
    p.add_argument("--label-rate", type=float, default=gen_defaults.label_rate,
                   help="share of companies with a known label (default: %(default)s)")

    p = sub.add_parser("build", help="build the company-person and company-company graphs")
    _add_common(p)
    p.add_argument("--records", type=Path, default=None, help="register records file (required)")
    p.add_argument("--risk", type=Path, default=None,
                   help="optional risk file; validated and aligned to company nodes (default: none)")
    p.add_argument("--out", type=Path, default=Path("graphs"), help="output directory (default: %(default)s)")
    window = ObservationWindow()
    p.add_argument("--window-start", type=_date, default=window.window_start,
                   help="observation window start (default: %(default)s)")
    p.add_argument("--window-end", type=_date, default=window.window_end,
                   help="observation window end; open stints run to here (default: %(default)s)")
    p.add_argument("--max-weight", type=int, default=MAX_WEIGHT,
                   help="edge weight cap in years (default: %(default)s)")
    p.add_argument("--delimiter", default=",", help="field delimiter of the input files (default: %(default)r)")

    p = sub.add_parser("partition", help="split the company graph into bounded partitions")
    _add_common(p)
    p.add_argument("--graphs", type=Path, default=None, help="graph directory written by build (required)")
    p.add_argument("--out", type=Path, default=Path("partitions"), help="output directory (default: %(default)s)")
    p.add_argument("--max-size", type=int, default=50000,
                   help="pieces of this size or more are bisected (default: %(default)s)")
    p.add_argument("--min-size", type=int, default=50,
                   help="final pieces below this size are dropped (default: %(default)s)")
    p.add_argument("--tol", type=float, default=1e-8,
                   help="eigenvector residual tolerance and zero band for the sign split (default: %(default)s)")
    p.add_argument("--fiedler-max-iter", type=int, default=10000,
                   help="eigensolver operator-application cap (default: %(default)s)")

    p = sub.add_parser("rank", help="cross-validated ranking and evaluation")
    _add_common(p)
    _add_rank_inputs(p)
    p.add_argument("--out", type=Path, default=Path("rank"), help="output directory (default: %(default)s)")
    _add_cv(p)
    p.add_argument("--bins", type=int, default=20, help="target chart bins (default: %(default)s)")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures (default: off)")
    _add_rank_params(p)

    p = sub.add_parser("bench", help="time full cross-validated runs of both algorithms")
    _add_common(p)
    _add_rank_inputs(p)
    p.add_argument("--out", type=Path, default=Path("bench"), help="output directory (default: %(default)s)")
    p.add_argument("--repetitions", type=int, default=20, help="timed runs per algorithm (default: %(default)s)")
    _add_cv(p)
    _add_rank_params(p)

    p = sub.add_parser("reproduce", help="synthetic end-to-end run with the qualitative claims checked")
    _add_common(p)
    rc = pipeline.ReproduceConfig()
    p.add_argument("--out", type=Path, default=Path("reproduce"), help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=int, default=rc.seed, help="generator seed (default: %(default)s)")
    p.add_argument("--homophily", type=float, default=rc.homophily,
                   help="risk spread probability; 0 gives a null control (default: %(default)s)")
    p.add_argument("--max-size", type=int, default=rc.max_size, help="partition size bound (default: %(default)s)")
    p.add_argument("--min-size", type=int, default=rc.min_size,
                   help="smallest retained partition (default: %(default)s)")
    p.add_argument("--selection-fraction", type=float, default=rc.selection_fraction,
                   help="share of labeled companies selected for the recall claim (default: %(default)s)")
    p.add_argument("--lift-threshold", type=float, default=rc.lift_threshold,
                   help="top-bin lift the BiRank claim must exceed (default: %(default)s)")
    p.add_argument("--p-threshold", type=float, default=rc.p_threshold,
                   help="significance level of the correlation claim (default: %(default)s)")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures (default: off)")
    _add_cv(p, seed_flag="--fold-seed")
    _add_rank_params(p)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_config(parser, command: str, path: Path) -> None:
    """Install config values as defaults of ``command`` so explicit flags still win."""
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: config must be a JSON object")

    sp = _subparser(parser, command)
    known = {a.dest for a in sp._actions}
    values = {}
    for key, value in doc.items():
        if key in SUBCOMMANDS:
            if not isinstance(value, dict):
                raise InputError(f"{path}: section {key!r} must be an object")
            if key == command:
                for k, v in value.items():
                    dest = k.replace("-", "_")
                    if dest not in known:
                        raise InputError(f"{path}: unknown option {k!r} for {command}")
                    values[dest] = v
            continue
        dest = key.replace("-", "_")
        if dest in known:
            values.setdefault(dest, value)
        elif not any(dest in {a.dest for a in _subparser(parser, c)._actions} for c in SUBCOMMANDS):
            raise InputError(f"{path}: unknown option {key!r}")
    values.pop("config", None)
    for action in sp._actions:
        if action.dest in values and isinstance(values[action.dest], str) and action.type is not None:
            try:
                values[action.dest] = action.type(values[action.dest])
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise InputError(f"{path}: option {action.dest!r}: {exc}") from None
    sp.set_defaults(**values)


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is not None and known.command in SUBCOMMANDS:
        _apply_config(parser, known.command, known.config)
    return parser.parse_args(argv)


def _require(args, *names):
    for name in names:
        value = getattr(args, name)
        if value is None:
            raise InputError(f"--{name.replace('_', '-')} is required")
        if not Path(value).exists():
            raise InputError(f"--{name.replace('_', '-')}: path does not exist: {value}")


def _algorithms(args) -> tuple:
    return ALGORITHMS if args.algorithm == "both" else (args.algorithm,)


def _rank_params(args):
    return (
        PageRankParams(args.alpha, args.epsilon, args.max_iter),
        BiRankParams(args.birank_alpha, args.birank_beta, args.birank_epsilon, args.birank_max_iter),
    )


def _positive(args, *names):
    for name in names:
        if getattr(args, name) < 1:
            raise InputError(f"--{name.replace('_', '-')} must be positive")


def cmd_generate(args) -> int:
    overrides = dict(
        homophily=args.homophily, base_rate=args.base_rate, n_companies=args.n_companies,
        n_persons=args.n_persons, label_rate=args.label_rate,
    )
    if args.preset == "register":
        cfg = register_preset(seed=args.seed, **overrides)
    else:
        cfg = GenConfig(seed=args.seed, **overrides)
    summary = pipeline.run_generate(cfg, args.out)
    print(f"wrote {summary['records']} records, {summary['labeled']} labels to {args.out}")
    return pipeline.EXIT_OK


def cmd_build(args) -> int:
    _require(args, "records")
    if args.risk is not None:
        _require(args, "risk")
    window = ObservationWindow(args.window_start, args.window_end)
    stats = pipeline.run_build(args.records, args.out, window, args.delimiter, args.max_weight, args.risk)
    b, u = stats["bipartite"], stats["unipartite"]
    print(
        f"bipartite: {b['n_companies']} companies, {b['n_persons']} persons, {b['n_edges']} edges; "
        f"unipartite: {u['n_edges']} edges -> {args.out}"
    )
    if stats["records_rejected_role"]:
        logger.warning("%d records rejected for their role", stats["records_rejected_role"])
        return pipeline.EXIT_INPUT
    return pipeline.EXIT_OK


def cmd_partition(args) -> int:
    _require(args, "graphs")
    summary = pipeline.run_partition(
        args.graphs, args.out, args.max_size, args.min_size, args.tol, args.fiedler_max_iter
    )
    print(
        f"{summary['partition_count']} partitions, {summary['retained_nodes']} retained, "
        f"{summary['dropped_nodes']} dropped -> {args.out}"
    )
    if summary["unsplit_partitions"]:
        logger.warning("kept whole after a failed bisection: %s", ", ".join(summary["unsplit_partitions"]))
        return pipeline.EXIT_PARTIAL
    return pipeline.EXIT_OK


def cmd_rank(args) -> int:
    _require(args, "graphs", "partitions", "risk")
    _positive(args, "workers", "bins")
    pr, br = _rank_params(args)
    outcomes = pipeline.run_rank(
        args.graphs, args.partitions, args.risk, args.out, _algorithms(args), pr, br,
        args.folds, args.seed, args.workers, args.bins, figures=not args.no_figures,
    )
    for algo, o in outcomes.items():
        if o.report is None:
            print(f"{algo}: {o.status} ({o.error})")
        else:
            r = o.report
            print(f"{algo}: {o.status} rho={r.rho:.4f} (p={r.rho_p:.3g}) Z={r.Z:.3f} n={r.n}")
    return pipeline.rank_exit_code(outcomes)


def cmd_bench(args) -> int:
    _require(args, "graphs", "partitions", "risk")
    _positive(args, "workers", "repetitions")
    pr, br = _rank_params(args)
    report = pipeline.run_bench(
        args.graphs, args.partitions, args.risk, args.out, args.repetitions, _algorithms(args),
        pr, br, args.folds, args.seed, args.workers,
    )
    for algo, t in report["algorithms"].items():
        sd = "n/a" if t["sd_s"] is None else f"{t['sd_s']:.4f}"
        print(f"{algo}: mean {t['mean_s']:.4f} s, sd {sd} s over {report['repetitions']} runs")
    return pipeline.EXIT_OK


def cmd_reproduce(args) -> int:
    _positive(args, "workers")
    cfg = pipeline.ReproduceConfig(
        seed=args.seed, homophily=args.homophily, max_size=args.max_size, min_size=args.min_size,
        k=args.folds, fold_seed=args.fold_seed, selection_fraction=args.selection_fraction,
        lift_threshold=args.lift_threshold, p_threshold=args.p_threshold, workers=args.workers,
        figures=not args.no_figures,
    )
    pr, br = _rank_params(args)
    report = pipeline.run_reproduce(args.out, cfg, None, pr, br)
    print(Path(args.out, "reproduce_report.txt").read_text(), end="")
    return pipeline.status_exit_code(report["status"].values())


COMMANDS = {
    "generate": cmd_generate,
    "build": cmd_build,
    "partition": cmd_partition,
    "rank": cmd_rank,
    "bench": cmd_bench,
    "reproduce": cmd_reproduce,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"riskrank: error: {exc}", file=sys.stderr)
        return pipeline.EXIT_INPUT
    except InputError as exc:
        print(f"riskrank: input error: {exc}", file=sys.stderr)
        return pipeline.EXIT_INPUT
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (NumericalError, FiedlerConvergenceError, FloatingPointError) as exc:
        print(f"riskrank: numeric failure: {exc}", file=sys.stderr)
        return pipeline.EXIT_NUMERIC
    except (InputError, FileNotFoundError) as exc:
        print(f"riskrank: input error: {exc}", file=sys.stderr)
        return pipeline.EXIT_INPUT
    except ValueError as exc:
        # parameter validation in the library raises ValueError
        print(f"riskrank: input error: {exc}", file=sys.stderr)
        return pipeline.EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
