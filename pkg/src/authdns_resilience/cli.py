"""Command-line entry point.

Exit codes: 0 success, 1 partial failure (some domains or invariant
violations), 2 fatal (bad input or configuration, nothing assessed).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .aggregation import AggregationPlan, aggregate_domain
from .attributes import AttributeValue
from .config import RunConfig
from .configdoc import ConfigError
from .reporting import (
    FACETS,
    ReportError,
    breakdown,
    distribution,
    format_distribution,
    load_dataset,
    read_matrix,
    run_pipeline,
)
from .schema import SchemaError, deserialize
from .scoring import AttributeScore, ScoringCriteria, score_all
from .simulation import SweepSpec, run_sweep, write_series, write_summary

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2

log = logging.getLogger("authdns_resilience")


def _emit(doc, out: Optional[Path]) -> None:
    text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise ReportError(f"{path}: not JSON ({exc})") from None


def _records(path: Path):
    path = Path(path)
    if path.is_dir():
        return load_dataset(path)
    return [deserialize(path.read_bytes())]


def _report_run(result, stream=None) -> int:
    stream = stream or sys.stderr
    for o in result.failures:
        print(f"failed: {o.domain} [{o.stage}] {o.error}", file=stream)
    print(f"{len(result.assessed)} ok, {len(result.failures)} failed; manifest {result.manifest.digest}", file=stream)
    return result.exit_code


# -- subcommands ----------------------------------------------------------------


def cmd_pipeline(args) -> int:
    config = RunConfig.load(args.config)
    result = run_pipeline(args.domains, config, args.out)
    return _report_run(result)


def cmd_collect(args) -> int:
    config = RunConfig.load(args.config)
    result = run_pipeline(args.domains, config, args.out, collect_only=True)
    return _report_run(result)


def cmd_derive(args) -> int:
    context = RunConfig.load(args.config).context()
    docs = []
    for record in _records(args.input):
        values = context.derive(record)
        docs.append({
            "domain": record.domain_name,
            "flags": list(record.flags),
            "attributes": [v.to_dict() for v in values],
        })
    _emit(docs, args.out)
    return EXIT_OK


def cmd_score(args) -> int:
    criteria = ScoringCriteria.load(args.criteria)
    docs = []
    for doc in _read_json(args.input):
        values = [AttributeValue.from_dict(v) for v in doc["attributes"]]
        scores = score_all(values, criteria)
        docs.append({
            "domain": doc["domain"],
            "flags": doc.get("flags", []),
            "scores": [
                {"attribute_id": s.attribute_id, "hierarchy_level": s.hierarchy_level,
                 "subject": list(s.subject), "score": s.score, "gap": s.gap}
                for s in scores
            ],
        })
    _emit(docs, args.out)
    return EXIT_OK


def cmd_aggregate(args) -> int:
    plan = AggregationPlan.load(args.plan)
    docs = []
    for doc in _read_json(args.input):
        scores = [
            AttributeScore(s["attribute_id"], s["hierarchy_level"], tuple(s["subject"]), float(s["score"]), bool(s.get("gap")))
            for s in doc["scores"]
        ]
        assessment = aggregate_domain(doc["domain"], scores, plan, doc.get("flags", ()), args.overall_mode)
        docs.append(assessment.to_dict(with_trace=args.trace))
    _emit(docs, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    matrix = read_matrix(args.run)
    columns = args.column or ["f_p", "f_c", "f_d", "overall"]
    stats = {c: distribution(matrix.column(c)) for c in columns}
    if args.json:
        _emit(stats, None)
    else:
        print("\n".join(format_distribution(c, s) for c, s in stats.items()))
    return EXIT_OK


def cmd_breakdown(args) -> int:
    context = RunConfig.load(args.config).context()
    records = load_dataset(args.run)
    print(breakdown(records, args.facet, context).format())
    return EXIT_OK


def cmd_simulate(args) -> int:
    strategies = ("best", "worst") if args.strategy == "both" else (args.strategy,)
    spec = SweepSpec(
        strategies=strategies,
        lengths=tuple(range(1, args.sweep_length + 1)),
        max_n=args.max_n,
        cap=args.cap,
        bases=tuple(args.base) if args.base else (5, 4, 3, 2, 1),
        others=tuple(args.other) if args.other else None,
    )
    report = run_sweep(spec)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            write_series(report, fh)
    write_summary(report, sys.stdout)
    return EXIT_OK if report.ok else EXIT_PARTIAL


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="authdns-resilience",
        description="Assess the resilience of the authoritative DNS infrastructure behind domain names.",
    )
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("-c", "--config", type=Path, help="run configuration (YAML); AUTHDNS_* variables override it")
        return p

    p = with_config(sub.add_parser("pipeline", help="collect, derive, score and aggregate a domain list"))
    p.add_argument("domains", type=Path, help="one FQDN per line, '#' comments")
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_pipeline)

    p = with_config(sub.add_parser("collect", help="collect records only"))
    p.add_argument("domains", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True)
    p.set_defaults(func=cmd_collect)

    p = with_config(sub.add_parser("derive", help="derive attribute values from collected records"))
    p.add_argument("input", type=Path, help="record file, dataset directory or run directory")
    p.add_argument("-o", "--out", type=Path)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("score", help="score derived attribute values")
    p.add_argument("input", type=Path, help="output of 'derive'")
    p.add_argument("--criteria", type=Path, help="criteria file (default: bundled)")
    p.add_argument("-o", "--out", type=Path)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("aggregate", help="aggregate leaf scores to per-domain assessments")
    p.add_argument("input", type=Path, help="output of 'score'")
    p.add_argument("--plan", type=Path, help="aggregation plan (default: bundled)")
    p.add_argument("--overall-mode", choices=("phase", "flat"), default="phase")
    p.add_argument("--trace", action="store_true", help="include intermediate level scores")
    p.add_argument("-o", "--out", type=Path)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("report", help="distribution statistics of matrix columns")
    p.add_argument("run", type=Path, help="run directory or matrix.csv")
    p.add_argument("--column", action="append", help="column to summarise (repeatable)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)

    p = with_config(sub.add_parser("breakdown", help="tabulate collected records by facet"))
    p.add_argument("run", type=Path, help="run or dataset directory")
    p.add_argument("--facet", choices=FACETS, required=True)
    p.set_defaults(func=cmd_breakdown)

    p = sub.add_parser("simulate", help="check both aggregation strategies by simulation")
    p.add_argument("--strategy", choices=("best", "worst", "both"), default="both")
    p.add_argument("--base", type=int, action="append", choices=range(1, 6), help="boundary base value (repeatable)")
    p.add_argument("--other", type=int, action="append", choices=range(1, 6), help="boundary other value (repeatable)")
    p.add_argument("--max-n", type=int, default=1000, help="longest boundary series")
    p.add_argument("--sweep-length", type=int, default=10, help="exhaustive sweep over lengths 1..N")
    p.add_argument("--cap", type=int, default=2_000_000, help="evaluation budget of the exhaustive sweep")
    p.add_argument("--output", type=Path, help="write boundary series as columnar text")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ReportError, SchemaError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
