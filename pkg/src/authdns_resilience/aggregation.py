"""Hierarchical score aggregation.

Two group strategies anchor the result at an extreme of the group and move
it by at most one value step:

* best: start at the highest score and subtract ``(ct * dD / n) ** val``
  for each distinct lower value ``val`` held by ``ct`` of the ``n`` items;
* worst: start at the lowest score and add ``(ct * dD / n) ** (6 - val)``
  for each distinct higher value.

A plan routes every attribute from the level it is defined at up to the
infrastructure, one transition per level.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .attributes import ATTRIBUTE_IDS, ATTRIBUTE_LEVEL, LEVELS, AttributeContext, sample_data_path
from .configdoc import Document
from .schema import DomainRecord
from .scoring import MAX_SCORE, MIN_SCORE, AttributeScore, ScoringCriteria, score_all

TOLERANCE = 1e-9
STRATEGIES = ("best", "worst", "direct")


class AggregationError(ValueError):
    pass


def group_values(values: Iterable[float], tol: float = TOLERANCE) -> List[Tuple[float, int]]:
    """Ascending ``(value, count)`` groups; values within ``tol`` of a
    group's first member join it."""
    groups: List[List] = []
    for v in sorted(values):
        if groups and v - groups[-1][0] <= tol:
            groups[-1][1] += 1
        else:
            groups.append([v, 1])
    return [(v, c) for v, c in groups]


def _check(values: Sequence[float], delta: float) -> List[float]:
    values = [float(v) for v in values]
    if not values:
        raise AggregationError("cannot aggregate an empty score array")
    if not delta > 0:
        raise AggregationError(f"value step must be positive, got {delta!r}")
    for v in values:
        if not (MIN_SCORE - TOLERANCE <= v <= MAX_SCORE + TOLERANCE):
            raise AggregationError(f"score {v!r} outside [{MIN_SCORE}, {MAX_SCORE}]")
    return values


def _clamp(x: float) -> float:
    return float(min(MAX_SCORE, max(MIN_SCORE, x)))


def best_from_groups(groups: Sequence[Tuple[float, int]], delta: float = 1.0) -> float:
    n = sum(c for _, c in groups)
    base = max(v for v, _ in groups)
    penalty = math.fsum((ct * delta / n) ** val for val, ct in groups if val < base - TOLERANCE)
    return _clamp(base - penalty)


def worst_from_groups(groups: Sequence[Tuple[float, int]], delta: float = 1.0) -> float:
    n = sum(c for _, c in groups)
    base = min(v for v, _ in groups)
    uplift = math.fsum((ct * delta / n) ** (6 - val) for val, ct in groups if val > base + TOLERANCE)
    return _clamp(base + uplift)


def aggregate_best(values: Sequence[float], delta: float = 1.0) -> float:
    values = _check(values, delta)
    if len(values) == 1:
        return values[0]
    return best_from_groups(group_values(values), delta)


def aggregate_worst(values: Sequence[float], delta: float = 1.0) -> float:
    values = _check(values, delta)
    if len(values) == 1:
        return values[0]
    return worst_from_groups(group_values(values), delta)


AGGREGATORS = {"best": aggregate_best, "worst": aggregate_worst}


# -- plan -----------------------------------------------------------------------


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    strategy: str


@dataclass(frozen=True)
class AggregationPlan:
    routes: Dict[str, Tuple[Transition, ...]]
    value_step: float = 1.0
    version: str = ""
    digest: str = ""

    @staticmethod
    def check_route(attr: str, route: Sequence[Transition]) -> Optional[str]:
        """Reason the route is malformed, or None."""
        if not route:
            return f"{attr} has no transitions"
        if route[0].source != ATTRIBUTE_LEVEL[attr]:
            return f"{attr} is defined at {ATTRIBUTE_LEVEL[attr]} level but its route starts at {route[0].source}"
        for t in route:
            if t.strategy not in STRATEGIES:
                return f"{attr}: unknown strategy {t.strategy!r}"
            if t.source not in LEVELS or t.target not in LEVELS:
                return f"{attr}: unknown level in {t.source} -> {t.target}"
            if LEVELS.index(t.target) != LEVELS.index(t.source) + 1:
                return f"{attr}: transition {t.source} -> {t.target} skips or reverses a level"
        for a, b in zip(route, route[1:]):
            if a.target != b.source:
                return f"{attr}: route breaks between {a.target} and {b.source}"
        if route[-1].target != "infrastructure":
            return f"{attr}: route ends at {route[-1].target}, not infrastructure"
        return None

    @classmethod
    def from_document(cls, doc: Document) -> "AggregationPlan":
        top = doc.mapping(doc.root, "plan")
        version = doc.string(top["version"][1], "version") if "version" in top else ""
        step = 1.0
        if "value_step" in top:
            node = top["value_step"][1]
            step = doc.number(node, "value_step")
            if step <= 0:
                doc.fail(node, "value_step must be positive")
        attrs_node = doc.require(top, "attributes", doc.root, "plan")
        attrs = doc.mapping(attrs_node, "attributes")
        for name, (knode, _) in attrs.items():
            if name not in ATTRIBUTE_LEVEL:
                doc.fail(knode, f"unknown attribute {name!r}")
        routes = {}
        for attr in ATTRIBUTE_IDS:
            if attr not in attrs:
                doc.fail(attrs_node, f"attribute {attr} has no route")
            node = attrs[attr][1]
            route = []
            for step_node in doc.sequence(node, attr):
                parts = doc.sequence(step_node, f"{attr} transition")
                if len(parts) != 3:
                    doc.fail(step_node, f"{attr} transition must be [from, to, strategy]")
                route.append(Transition(*(doc.string(p, f"{attr} transition") for p in parts)))
            problem = cls.check_route(attr, route)
            if problem:
                doc.fail(node, problem)
            routes[attr] = tuple(route)
        return cls(routes, step, version, doc.digest)

    @classmethod
    def load(cls, path: Union[str, Path, None] = None) -> "AggregationPlan":
        return cls.from_document(Document.load(path or sample_data_path("aggregation_plan.yaml")))

    @classmethod
    def from_text(cls, text: str, source: str = "<plan>") -> "AggregationPlan":
        return cls.from_document(Document(text, source))


# -- routing --------------------------------------------------------------------


@dataclass
class AttributeAggregate:
    attribute_id: str
    score: float
    # level -> {subject: score}, starting with the leaf level
    trace: Dict[str, Dict[Tuple[str, ...], float]] = field(default_factory=dict)


def aggregate_attribute(
    attribute_id: str,
    scores: Sequence[AttributeScore],
    plan: AggregationPlan,
) -> AttributeAggregate:
    """Route the leaf scores of one attribute up to one infrastructure score.

    Subjects are paths; moving up a level drops the last path element, so
    instance ``(function, fqdn, ip)`` scores group by ``(function, fqdn)``.
    """
    route = plan.routes.get(attribute_id)
    if route is None:
        raise AggregationError(f"plan has no route for {attribute_id}")
    if not scores:
        raise AggregationError(f"{attribute_id}: no scores at {route[0].source} level")
    for s in scores:
        if s.attribute_id != attribute_id:
            raise AggregationError(f"score for {s.attribute_id} passed to {attribute_id}")
        if s.hierarchy_level != route[0].source:
            raise AggregationError(
                f"{attribute_id}: route starts at {route[0].source} level but got a {s.hierarchy_level} score"
            )

    current: Dict[Tuple[str, ...], float] = {}
    for s in scores:
        if s.subject in current:
            raise AggregationError(f"{attribute_id}: duplicate subject {s.subject}")
        current[s.subject] = s.score
    trace = {route[0].source: dict(sorted(current.items()))}

    for t in route:
        groups: Dict[Tuple[str, ...], List[float]] = defaultdict(list)
        for subject in sorted(current):
            if not subject:
                raise AggregationError(f"{attribute_id}: subject path too short for {t.source} -> {t.target}")
            groups[subject[:-1]].append(current[subject])
        nxt = {}
        for parent, vals in groups.items():
            if len(vals) == 1:
                nxt[parent] = vals[0]
            elif t.strategy == "direct":
                raise AggregationError(
                    f"{attribute_id}: direct {t.source} -> {t.target} mapping got {len(vals)} items under {parent}"
                )
            else:
                nxt[parent] = AGGREGATORS[t.strategy](vals, plan.value_step)
        current = nxt
        trace[t.target] = dict(sorted(current.items()))

    if len(current) != 1:
        raise AggregationError(f"{attribute_id}: {len(current)} values reached the infrastructure level")
    return AttributeAggregate(attribute_id, next(iter(current.values())), trace)


# -- summaries ------------------------------------------------------------------

PLACEMENT = ("PP1", "PP2", "PA1", "PA2")
CONFIGURATION = ("CP1", "CP2", "CP3", "CP4", "CP5", "CA1", "CA2", "CA3", "CA4", "CA5", "CA6", "CA7")
DISPATCH = ("DP1", "DA1")

SUMMARY_COLUMNS = ("f_pp", "f_pa", "f_cp", "f_ca", "f_p", "f_c", "f_d", "overall")
MATRIX_COLUMNS = ATTRIBUTE_IDS + SUMMARY_COLUMNS


def _mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def summarize(vector: Dict[str, float], overall_mode: str = "phase") -> Dict[str, float]:
    """Sub-summaries, phase means and overall score from the 18 attribute
    scores. ``overall_mode`` picks the mean of the three phase scores
    (``phase``) or of all 18 attributes (``flat``); both are returned as
    ``overall_phase`` / ``overall_flat``."""
    missing = [a for a in ATTRIBUTE_IDS if a not in vector]
    if missing:
        raise AggregationError(f"summary needs all attributes; missing {', '.join(missing)}")
    if overall_mode not in ("phase", "flat"):
        raise AggregationError(f"unknown overall mode {overall_mode!r}")
    v = vector
    out = {
        "f_pp": _mean([v["PP1"], v["PP2"]]),
        "f_pa": _mean([v["PA1"], v["PA2"]]),
        "f_cp": _mean([v[a] for a in CONFIGURATION if a.startswith("CP")]),
        "f_ca": _mean([v[a] for a in CONFIGURATION if a.startswith("CA")]),
        "f_p": _mean([v[a] for a in PLACEMENT]),
        "f_c": _mean([v[a] for a in CONFIGURATION]),
        "f_d": _mean([v[a] for a in DISPATCH]),
    }
    out["overall_phase"] = _mean([out["f_p"], out["f_c"], out["f_d"]])
    out["overall_flat"] = _mean([v[a] for a in ATTRIBUTE_IDS])
    out["overall"] = out["overall_phase"] if overall_mode == "phase" else out["overall_flat"]
    return out


@dataclass
class DomainAssessment:
    domain_name: str
    attribute_scores: Dict[str, float]
    summaries: Dict[str, float]
    flags: Tuple[str, ...] = ()
    gaps: Tuple[str, ...] = ()  # attributes with at least one gap-marked leaf
    trace: Dict[str, Dict[str, Dict[Tuple[str, ...], float]]] = field(default_factory=dict, repr=False)

    @property
    def overall(self) -> float:
        return self.summaries["overall"]

    @property
    def degraded(self) -> bool:
        return "degraded" in self.flags

    def row(self) -> List[float]:
        return [self.attribute_scores[a] for a in ATTRIBUTE_IDS] + [self.summaries[c] for c in SUMMARY_COLUMNS]

    def to_dict(self, with_trace: bool = False) -> dict:
        doc = {
            "domain_name": self.domain_name,
            "attribute_scores": {a: self.attribute_scores[a] for a in ATTRIBUTE_IDS},
            "summaries": {k: self.summaries[k] for k in SUMMARY_COLUMNS + ("overall_phase", "overall_flat")},
            "flags": list(self.flags),
            "gaps": list(self.gaps),
        }
        if with_trace:
            doc["trace"] = {
                attr: {level: [["/".join(s), v] for s, v in items.items()] for level, items in levels.items()}
                for attr, levels in self.trace.items()
            }
        return doc


def aggregate_domain(
    domain_name: str,
    scores: Sequence[AttributeScore],
    plan: AggregationPlan,
    flags: Sequence[str] = (),
    overall_mode: str = "phase",
) -> DomainAssessment:
    by_attr: Dict[str, List[AttributeScore]] = defaultdict(list)
    for s in scores:
        by_attr[s.attribute_id].append(s)
    vector, trace, gaps = {}, {}, []
    for attr in ATTRIBUTE_IDS:
        if attr not in by_attr:
            raise AggregationError(f"{domain_name}: no scores for {attr}")
        agg = aggregate_attribute(attr, by_attr[attr], plan)
        vector[attr] = agg.score
        trace[attr] = agg.trace
        if any(s.gap for s in by_attr[attr]):
            gaps.append(attr)
    flags = set(flags)
    if gaps:
        flags.add("degraded")
    return DomainAssessment(domain_name, vector, summarize(vector, overall_mode), tuple(sorted(flags)), tuple(gaps), trace)


def assess(
    record: DomainRecord,
    context: AttributeContext,
    criteria: ScoringCriteria,
    plan: AggregationPlan,
    overall_mode: str = "phase",
) -> DomainAssessment:
    """Full chain for one collected record: derive, score, aggregate."""
    scores = score_all(context.derive(record), criteria)
    return aggregate_domain(record.domain_name, scores, plan, record.flags, overall_mode)


# -- boundary series ------------------------------------------------------------


def simulate_boundaries(
    strategy: str, base: int, other: int, max_n: int = 1000, delta: float = 1.0
) -> List[Tuple[int, float]]:
    """``(n, aggregate([base] + n * [other]))`` for n = 1..max_n."""
    if strategy not in AGGREGATORS:
        raise AggregationError(f"unknown strategy {strategy!r}")
    for v in (base, other):
        if not MIN_SCORE <= v <= MAX_SCORE:
            raise AggregationError(f"score {v} outside [{MIN_SCORE}, {MAX_SCORE}]")
    if strategy == "best" and other > base:
        raise AggregationError("best-strategy boundary needs other <= base")
    if strategy == "worst" and other < base:
        raise AggregationError("worst-strategy boundary needs other >= base")
    fn = best_from_groups if strategy == "best" else worst_from_groups
    series = []
    for n in range(1, max_n + 1):
        groups = [(float(base), n + 1)] if other == base else sorted([(float(base), 1), (float(other), n)])
        series.append((n, fn(groups, delta)))
    return series
