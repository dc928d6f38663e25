"""End-to-end runs and cross-domain reports.

Output directory layout of a pipeline run::

    <out>/manifest.json          run inputs, content hashes, timestamps
    <out>/dataset/<domain>.json  one collected record per domain
    <out>/dataset/index.json     manifest hash and the record files
    <out>/assessments.json       per-domain scores and summaries
    <out>/failures.json          domains that could not be assessed, with reasons
    <out>/matrix.csv             one row per domain, 26 score columns

``matrix.csv`` starts with a ``# manifest=<hash>`` line, then a header row
``domain,PP1,...,DA1,f_pp,f_pa,f_cp,f_ca,f_p,f_c,f_d,overall``. Floats
are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .aggregation import MATRIX_COLUMNS, DomainAssessment, assess
from .attributes import ENTERPRISE_OPTIONS, AttributeContext, AttributeValue
from .collector import CollectionError, Collector, DomainUnreachable, make_backend
from .config import RunConfig, file_digest
from .schema import (
    DomainRecord,
    canonical_name,
    deserialize,
    domain_filename,
    is_valid_domain,
    serialize,
)

log = logging.getLogger(__name__)

TIMESTAMP_FIELDS = ("started_at", "finished_at")
FACETS = ("primary-enterprise-type", "authoritative-enterprise-type", "anycast-subnet-enterprise", "axfr-dnssec")


class ReportError(RuntimeError):
    pass


def _json(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def read_domains(path: Path) -> List[str]:
    """One name per line; ``#`` starts a comment. Duplicates keep their first position."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot read domain list {path}: {exc.strerror}") from None
    seen, out = set(), []
    for line in text.splitlines():
        name = line.split("#", 1)[0].strip()
        if not name:
            continue
        name = canonical_name(name)
        if name not in seen:
            seen.add(name)
            out.append(name)
    return out


# -- manifest -------------------------------------------------------------------


@dataclass
class RunManifest:
    input_path: str
    input_sha256: str
    country_context: str
    vantage_country: Optional[str]
    backend_kind: str
    inputs: Dict[str, str]  # name -> sha256 of catalog, criteria, plan, ...
    overall_mode: str
    started_at: str = ""
    finished_at: str = ""

    def hashed_fields(self) -> dict:
        # paths and timestamps stay out so reruns elsewhere hash the same
        return {
            "input_sha256": self.input_sha256,
            "country_context": self.country_context,
            "vantage_country": self.vantage_country,
            "backend_kind": self.backend_kind,
            "inputs": dict(sorted(self.inputs.items())),
            "overall_mode": self.overall_mode,
        }

    @property
    def digest(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        doc = {"manifest_hash": self.digest, "tool_version": __version__, "input_path": self.input_path}
        doc.update(self.hashed_fields())
        doc["started_at"] = self.started_at
        doc["finished_at"] = self.finished_at
        return doc

    @classmethod
    def for_run(cls, domains_file: Path, config: RunConfig) -> "RunManifest":
        return cls(
            input_path=str(domains_file),
            input_sha256=file_digest(domains_file),
            country_context=config.country_context,
            vantage_country=config.vantage_country or config.country_context,
            backend_kind=config.backend.kind,
            inputs=config.digests(),
            overall_mode=config.overall_mode,
        )


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


# -- matrix ---------------------------------------------------------------------


def write_matrix(assessments: Sequence[DomainAssessment], manifest_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# manifest={manifest_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("domain",) + MATRIX_COLUMNS)
    for a in assessments:
        w.writerow([a.domain_name] + [repr(v) for v in a.row()])
    return buf.getvalue()


@dataclass
class ScoreMatrix:
    manifest_hash: Optional[str]
    domains: List[str]
    columns: Tuple[str, ...]
    values: np.ndarray  # rows x columns

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ReportError(f"unknown column {name!r}; columns: {', '.join(self.columns)}")
        return self.values[:, self.columns.index(name)]


def read_matrix(path: Path) -> ScoreMatrix:
    path = Path(path)
    if path.is_dir():
        path = path / "matrix.csv"
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ReportError(f"cannot read matrix {path}: {exc.strerror}") from None
    manifest = None
    if lines and lines[0].startswith("# manifest="):
        manifest = lines[0].split("=", 1)[1].strip()
        lines = lines[1:]
    rows = list(csv.reader(lines))
    if not rows:
        raise ReportError(f"{path}: no header row")
    header = tuple(rows[0])
    if header[0] != "domain":
        raise ReportError(f"{path}: first column must be 'domain'")
    body = rows[1:]
    values = np.array([[float(x) for x in r[1:]] for r in body], dtype=float).reshape(len(body), len(header) - 1)
    return ScoreMatrix(manifest, [r[0] for r in body], header[1:], values)


# -- distribution ---------------------------------------------------------------

HIST_EDGES = np.linspace(1.0, 5.0, 17)  # 16 bins of width 0.25


def distribution(values) -> dict:
    xs = np.asarray(values, dtype=float)
    if xs.size == 0:
        raise ReportError("empty matrix: no rows to summarise")
    q1, median, q3 = np.percentile(xs, [25, 50, 75])
    counts, _ = np.histogram(xs, bins=HIST_EDGES)
    return {
        "count": int(xs.size),
        "mean": float(xs.mean()),
        "median": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(xs.min()),
        "max": float(xs.max()),
        "bins": [[float(lo), float(hi), int(c)] for lo, hi, c in zip(HIST_EDGES[:-1], HIST_EDGES[1:], counts)],
    }


def format_distribution(name: str, stats: dict) -> str:
    lines = [
        f"column {name}: n={stats['count']} mean={stats['mean']:.4f} median={stats['median']:.4f} "
        f"q1={stats['q1']:.4f} q3={stats['q3']:.4f} min={stats['min']:.4f} max={stats['max']:.4f}"
    ]
    for lo, hi, c in stats["bins"]:
        lines.append(f"  [{lo:.2f}, {hi:.2f}{']' if hi == 5.0 else ')'} {c}")
    return "\n".join(lines)


# -- pipeline -------------------------------------------------------------------


@dataclass
class DomainOutcome:
    domain: str
    record: Optional[DomainRecord] = None
    assessment: Optional[DomainAssessment] = None
    error: Optional[str] = None
    stage: Optional[str] = None


@dataclass
class PipelineResult:
    manifest: RunManifest
    outcomes: List[DomainOutcome] = field(default_factory=list)
    collect_only: bool = False

    def _done(self, o: DomainOutcome) -> bool:
        return o.record is not None if self.collect_only else o.assessment is not None

    @property
    def assessed(self) -> List[DomainOutcome]:
        return [o for o in self.outcomes if self._done(o)]

    @property
    def failures(self) -> List[DomainOutcome]:
        return [o for o in self.outcomes if not self._done(o)]

    @property
    def exit_code(self) -> int:
        if not self.assessed:
            return 2
        return 1 if self.failures else 0


def collect_domain(domain: str, collector: Collector, config: RunConfig) -> DomainOutcome:
    if not is_valid_domain(domain):
        return DomainOutcome(domain, error="invalid domain name", stage="validate")
    try:
        if not collector.validate_domain(domain):
            return DomainOutcome(domain, error="name does not resolve (no SOA, NS or A answer)", stage="validate")
        record = collector.collect(domain, config.country_context, config.vantage_country)
    except DomainUnreachable as exc:
        return DomainOutcome(domain, error=str(exc), stage="validate")
    except CollectionError as exc:
        return DomainOutcome(domain, error=str(exc), stage="collect")
    except Exception as exc:  # one bad domain never aborts the run
        log.exception("%s: collection failed", domain)
        return DomainOutcome(domain, error=f"{type(exc).__name__}: {exc}", stage="collect")
    return DomainOutcome(domain, record=record)


def assess_outcome(outcome: DomainOutcome, context: AttributeContext, criteria, plan, mode: str) -> DomainOutcome:
    if outcome.record is None:
        return outcome
    try:
        outcome.assessment = assess(outcome.record, context, criteria, plan, mode)
    except Exception as exc:
        log.exception("%s: assessment failed", outcome.domain)
        outcome.error = f"{type(exc).__name__}: {exc}"
        outcome.stage = "assess"
    return outcome


def run_pipeline(domains_file: Path, config: RunConfig, out_dir: Path, collect_only: bool = False) -> PipelineResult:
    """Collect, derive, score and aggregate every listed domain and write
    the output directory. Raises :class:`ReportError` for fatal input problems."""
    domains = read_domains(domains_file)
    if not domains:
        raise ReportError("no domains")
    if not collect_only:
        context, criteria, plan = config.context(), config.criteria(), config.plan()
    manifest = RunManifest.for_run(Path(domains_file), config)
    manifest.started_at = _now()

    collector = Collector(make_backend(config.backend))
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        outcomes = list(pool.map(lambda d: collect_domain(d, collector, config), domains))
        if not collect_only:
            outcomes = list(
                pool.map(lambda o: assess_outcome(o, context, criteria, plan, config.overall_mode), outcomes)
            )
    result = PipelineResult(manifest, outcomes, collect_only)
    manifest.finished_at = _now()
    write_outputs(result, Path(out_dir))
    return result


def write_outputs(result: PipelineResult, out_dir: Path) -> None:
    digest = result.manifest.digest
    dataset = out_dir / "dataset"
    dataset.mkdir(parents=True, exist_ok=True)
    for old in dataset.glob("*.json"):
        old.unlink()
    files = []
    for o in result.outcomes:
        if o.record is not None:
            name = domain_filename(o.record.domain_name)
            (dataset / name).write_bytes(serialize(o.record))
            files.append(name)
    (dataset / "index.json").write_text(_json({"manifest_hash": digest, "records": files}), encoding="utf-8")

    failures = [{"domain": o.domain, "stage": o.stage, "reason": o.error} for o in result.failures]
    (out_dir / "failures.json").write_text(_json({"manifest_hash": digest, "failures": failures}), encoding="utf-8")
    (out_dir / "manifest.json").write_text(_json(result.manifest.to_dict()), encoding="utf-8")
    if result.collect_only:
        return
    assessed = [o.assessment for o in result.assessed]
    (out_dir / "assessments.json").write_text(
        _json({"manifest_hash": digest, "assessments": [a.to_dict() for a in assessed]}), encoding="utf-8"
    )
    (out_dir / "matrix.csv").write_text(write_matrix(assessed, digest), encoding="utf-8")


def load_dataset(path: Path) -> List[DomainRecord]:
    """Records from a dataset directory (or a run directory containing one)."""
    path = Path(path)
    if (path / "dataset").is_dir():
        path = path / "dataset"
    if not path.is_dir():
        raise ReportError(f"no dataset at {path}")
    records = []
    for f in sorted(path.glob("*.json")):
        if f.name == "index.json":
            continue
        records.append(deserialize(f.read_bytes()))
    return records


# -- breakdowns -----------------------------------------------------------------

ENTERPRISE_RANK = {t: i for i, t in enumerate(ENTERPRISE_OPTIONS)}  # 0 = most resilient
AXFR_ORDER = ("none", "manual", "automatic")
DNSSEC_ORDER = ("not-configured", "not-recommended", "recommended")


def dominant_category(categories: Sequence[str]) -> Tuple[str, bool, bool]:
    """Majority category; ties go to the lower-resilience category.

    Returns ``(category, tied, multi_category)``.
    """
    counts = Counter(categories)
    top = max(counts.values())
    leaders = [c for c, n in counts.items() if n == top]
    chosen = max(leaders, key=lambda c: ENTERPRISE_RANK[c])
    return chosen, len(leaders) > 1, len(counts) > 1


def _values(values: Sequence[AttributeValue], attr: str) -> List[AttributeValue]:
    return [v for v in values if v.attribute_id == attr]


def _worst(options: Sequence[str], order: Sequence[str]) -> str:
    return min(options, key=order.index)


def _subnet_label(values, attr: str) -> str:
    v = _values(values, attr)
    if not v or v[0].gap:
        return "subnets=unknown"
    return f"subnets={v[0].value}"


def _anycast_label(values, attr: str) -> str:
    kinds = {v.value for v in _values(values, attr)}
    if kinds == {"anycast"}:
        return "anycast"
    if kinds == {"unicast"}:
        return "unicast"
    return "mixed"


@dataclass
class Breakdown:
    facet: str
    rows: List[Tuple[Tuple[str, ...], int]]
    flagged: Dict[str, List[str]] = field(default_factory=dict)

    def format(self) -> str:
        lines = [f"# facet={self.facet}"]
        for key, count in self.rows:
            lines.append("\t".join(key) + f"\t{count}")
        for flag, domains in sorted(self.flagged.items()):
            lines.append(f"# {flag}: {', '.join(domains) if domains else '-'}")
        return "\n".join(lines)


def breakdown(records: Sequence[DomainRecord], facet: str, context: AttributeContext) -> Breakdown:
    if facet not in FACETS:
        raise ReportError(f"unknown facet {facet!r}; choose from {', '.join(FACETS)}")
    per_domain = [(r.domain_name, context.derive(r)) for r in records]

    def primary_type(values):
        return dominant_category([v.value for v in _values(values, "PP1")])

    if facet == "primary-enterprise-type":
        counts: Counter = Counter()
        tied, multi = [], []
        for name, values in per_domain:
            cat, tie, many = primary_type(values)
            counts[cat] += 1
            if tie:
                tied.append(name)
            if many:
                multi.append(name)
        rows = [((c,), counts[c]) for c in ENTERPRISE_OPTIONS if counts[c]]
        return Breakdown(facet, rows, {"tie-broken": tied, "multi-category": multi})

    if facet == "authoritative-enterprise-type":
        counts = Counter()
        tied, multi = [], []
        for name, values in per_domain:
            cat, tie, many = dominant_category([v.value for v in _values(values, "PA1")])
            counts[cat] += 1
            if tie:
                tied.append(name)
            if many:
                multi.append(name)
        rows = [((c,), counts[c]) for c in ENTERPRISE_OPTIONS if counts[c]]
        return Breakdown(facet, rows, {"tie-broken": tied, "multi-category": multi})

    if facet == "anycast-subnet-enterprise":
        # primary hosting: enterprise -> subnet diversity -> anycast use
        edges: Counter = Counter()
        for name, values in per_domain:
            cat = primary_type(values)[0]
            subnets = _subnet_label(values, "CP4")
            anycast = _anycast_label(values, "CP1")
            edges[(cat, subnets)] += 1
            edges[(subnets, anycast)] += 1
        return Breakdown(facet, [(k, edges[k]) for k in sorted(edges)])

    # axfr-dnssec: enterprise -> AXFR enforcement -> worst DNSSEC across authoritative instances
    edges = Counter()
    for name, values in per_domain:
        cat = primary_type(values)[0]
        axfr = _worst([v.value for v in _values(values, "DP1")], AXFR_ORDER)
        dnssec = _worst([v.value for v in _values(values, "DA1")], DNSSEC_ORDER)
        edges[(cat, f"axfr={axfr}")] += 1
        edges[(f"axfr={axfr}", f"dnssec={dnssec}")] += 1
    return Breakdown(facet, [(k, edges[k]) for k in sorted(edges)])
