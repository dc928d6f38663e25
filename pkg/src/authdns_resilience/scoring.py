"""Five-point scoring of attribute values, plus the saturation curve behind
the count thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

from .attributes import (
    ATTRIBUTE_IDS,
    ATTRIBUTE_LEVEL,
    ATTRIBUTE_OPTIONS,
    COUNT_ATTRIBUTES,
    AttributeValue,
    sample_data_path,
)
from .configdoc import ConfigError, Document

MIN_SCORE = 1
MAX_SCORE = 5

# s(x) = 5 - A * exp(-k x) through (1, 1) and (2, 4)
SATURATION_A = 16.0
SATURATION_K = math.log(4.0)


@dataclass(frozen=True)
class CountRule:
    full: int = 5
    good: Tuple[int, int] = (2, 4)

    def __post_init__(self):
        lo, hi = self.good
        if not 2 <= lo <= hi:
            raise ValueError(f"count rule good range {self.good} must satisfy 2 <= lo <= hi")
        if self.full != hi + 1:
            raise ValueError(f"count rule leaves a hole: good ends at {hi}, full starts at {self.full}")

    def score(self, count: int) -> int:
        if count >= self.full:
            return 5
        if count >= self.good[0]:
            return 4
        return 1


@dataclass(frozen=True)
class ScoringCriteria:
    options: Dict[str, Dict[str, int]]
    count_rule: CountRule = CountRule()
    version: str = ""
    digest: str = ""

    def worst(self, attribute_id: str) -> int:
        if attribute_id in COUNT_ATTRIBUTES:
            return MIN_SCORE
        return min(self.options[attribute_id].values())

    @classmethod
    def from_document(cls, doc: Document) -> "ScoringCriteria":
        top = doc.mapping(doc.root, "criteria")
        version = doc.string(top["version"][1], "version") if "version" in top else ""

        rule = CountRule()
        if "count_rule" in top:
            node = top["count_rule"][1]
            rf = doc.mapping(node, "count_rule")
            full = doc.integer(doc.require(rf, "full", node, "count_rule"), "count_rule.full")
            good_node = doc.require(rf, "good", node, "count_rule")
            good = doc.sequence(good_node, "count_rule.good")
            if len(good) != 2:
                doc.fail(good_node, "count_rule.good must be [low, high]")
            lo, hi = (doc.integer(n, "count_rule.good") for n in good)
            try:
                rule = CountRule(full, (lo, hi))
            except ValueError as exc:
                doc.fail(node, str(exc))

        attrs_node = doc.require(top, "attributes", doc.root, "criteria")
        attrs = doc.mapping(attrs_node, "attributes")
        for name, (knode, _) in attrs.items():
            if name not in ATTRIBUTE_LEVEL:
                doc.fail(knode, f"unknown attribute {name!r}")
        options: Dict[str, Dict[str, int]] = {}
        for attr in ATTRIBUTE_IDS:
            if attr not in attrs:
                doc.fail(attrs_node, f"attribute {attr} has no criteria")
            node = attrs[attr][1]
            fields = doc.mapping(node, attr)
            kind = doc.string(doc.require(fields, "kind", node, attr), f"{attr}.kind")
            expected = "count" if attr in COUNT_ATTRIBUTES else "categorical"
            if kind != expected:
                doc.fail(fields["kind"][1], f"{attr} must be kind {expected!r}, got {kind!r}")
            if expected == "count":
                if "options" in fields:
                    doc.fail(fields["options"][0], f"{attr} is scored by the count rule and takes no options")
                continue
            opt_node = doc.require(fields, "options", node, attr)
            opts = doc.mapping(opt_node, f"{attr}.options")
            table = {}
            for opt, (okey, oval) in opts.items():
                if opt not in ATTRIBUTE_OPTIONS[attr]:
                    doc.fail(okey, f"{attr} has no option {opt!r}")
                s = doc.integer(oval, f"{attr}.{opt}")
                if not MIN_SCORE <= s <= MAX_SCORE:
                    doc.fail(oval, f"{attr}.{opt} score {s} outside [{MIN_SCORE}, {MAX_SCORE}]")
                table[opt] = s
            missing = [o for o in ATTRIBUTE_OPTIONS[attr] if o not in table]
            if missing:
                doc.fail(opt_node, f"{attr} is missing scores for {', '.join(missing)}")
            options[attr] = {o: table[o] for o in ATTRIBUTE_OPTIONS[attr]}
        return cls(options, rule, version, doc.digest)

    @classmethod
    def load(cls, path: Union[str, Path, None] = None) -> "ScoringCriteria":
        return cls.from_document(Document.load(path or sample_data_path("criteria.yaml")))

    @classmethod
    def from_text(cls, text: str, source: str = "<criteria>") -> "ScoringCriteria":
        return cls.from_document(Document(text, source))


@dataclass(frozen=True)
class AttributeScore:
    attribute_id: str
    hierarchy_level: str
    subject: Tuple[str, ...]
    score: float
    gap: bool = False

    def __post_init__(self):
        if not MIN_SCORE <= self.score <= MAX_SCORE:
            raise ValueError(f"{self.attribute_id} score {self.score!r} outside [1, 5]")
        object.__setattr__(self, "subject", tuple(self.subject))


def score(value: AttributeValue, criteria: ScoringCriteria) -> AttributeScore:
    """Leaf score of one attribute value. Gap values take the worst score."""
    attr = value.attribute_id
    if value.gap:
        s = criteria.worst(attr)
    elif attr in COUNT_ATTRIBUTES:
        s = criteria.count_rule.score(value.value)
    else:
        table = criteria.options.get(attr)
        if table is None:
            raise ConfigError(f"no criteria for attribute {attr}")
        if value.value not in table:
            raise ConfigError(f"criteria for {attr} have no option {value.value!r}")
        s = table[value.value]
    return AttributeScore(attr, value.hierarchy_level, value.subject, float(s), value.gap)


def score_all(values: Iterable[AttributeValue], criteria: ScoringCriteria) -> List[AttributeScore]:
    return [score(v, criteria) for v in values]


def saturation(x: float) -> float:
    """Bounded growth curve through (1, 1) and (2, 4), tending to 5."""
    if x < 1:
        raise ValueError(f"saturation is defined for x >= 1, got {x!r}")
    # exp(-k x) == 4**-x; the power form is exact at integer x
    return MAX_SCORE - SATURATION_A * 4.0 ** (-x)
