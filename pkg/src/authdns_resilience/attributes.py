"""Derive the 18 resilience attributes from a collected :class:`DomainRecord`.

Each attribute is attached at its finest hierarchy level:

=========  ==============  ==========================================
attribute  level           value
=========  ==============  ==========================================
PP1, PA1   instance        hosting enterprise type (5 categories)
PP2, PA2   instance        ``inside`` / ``outside`` the assessing country
CP1, CA1   instance        ``anycast`` / ``unicast``
CP2        instance        ``exposed`` (IP shared with an NS) / ``dedicated``
CP3-CP5    name-server     distinct IPs / subnets / ASes of the primary
CA2-CA4    name-server     distinct IPs / subnets / ASes per NS
CA5-CA7    functionality   NS names / subnets / ASes across all NS
DP1        instance        ``automatic`` / ``manual`` / ``none`` AXFR control
DA1        instance        ``recommended`` / ``not-recommended`` / ``not-configured``
=========  ==============  ==========================================
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .schema import DomainRecord, HostingInstance

ATTRIBUTE_IDS = (
    "PP1", "PP2", "PA1", "PA2",
    "CP1", "CP2", "CP3", "CP4", "CP5",
    "CA1", "CA2", "CA3", "CA4", "CA5", "CA6", "CA7",
    "DP1", "DA1",
)  # fmt: skip

LEVELS = ("instance", "name-server", "functionality", "infrastructure")

ATTRIBUTE_LEVEL = {
    "PP1": "instance", "PP2": "instance", "PA1": "instance", "PA2": "instance",
    "CP1": "instance", "CP2": "instance",
    "CP3": "name-server", "CP4": "name-server", "CP5": "name-server",
    "CA1": "instance",
    "CA2": "name-server", "CA3": "name-server", "CA4": "name-server",
    "CA5": "functionality", "CA6": "functionality", "CA7": "functionality",
    "DP1": "instance", "DA1": "instance",
}  # fmt: skip

ATTRIBUTE_FUNCTION = {a: ("primary" if a[1] == "P" else "authoritative") for a in ATTRIBUTE_IDS}

COUNT_ATTRIBUTES = ("CP3", "CP4", "CP5", "CA2", "CA3", "CA4", "CA5", "CA6", "CA7")

# RFC 8624 signing algorithms at MUST/RECOMMENDED/MAY level; editable via config
RECOMMENDED_DNSSEC_ALGORITHMS = frozenset({8, 13, 14, 15, 16})


class EnterpriseType(str, Enum):
    STATE_OWNED = "state-owned"
    LOCAL_PRIVATE = "local-private"
    FOREIGN_LARGE = "foreign-large"
    FOREIGN_SME = "foreign-sme"
    UNREGISTERED = "unregistered"


ENTERPRISE_OPTIONS = tuple(t.value for t in EnterpriseType)

# closed option space of every categorical attribute, best first
ATTRIBUTE_OPTIONS = {
    "PP1": ENTERPRISE_OPTIONS, "PA1": ENTERPRISE_OPTIONS,
    "PP2": ("inside", "outside"), "PA2": ("inside", "outside"),
    "CP1": ("anycast", "unicast"), "CA1": ("anycast", "unicast"),
    "CP2": ("dedicated", "exposed"),
    "DP1": ("automatic", "manual", "none"),
    "DA1": ("recommended", "not-recommended", "not-configured"),
}  # fmt: skip


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class OrgPattern:
    pattern: str
    match: str = "substring"  # substring | anchored (regex, full match)
    priority: int = 100

    def __post_init__(self):
        if self.match not in ("substring", "anchored"):
            raise CatalogError(f"unknown match mode {self.match!r} for pattern {self.pattern!r}")
        if self.match == "anchored":
            try:
                re.compile(self.pattern)
            except re.error as exc:
                raise CatalogError(f"bad pattern {self.pattern!r}: {exc}") from None

    def matches(self, org: str) -> bool:
        if self.match == "substring":
            return self.pattern.casefold() in org.casefold()
        return re.fullmatch(self.pattern, org, flags=re.IGNORECASE) is not None


def _first_match(entries: Sequence[Tuple[OrgPattern, object]], org: str):
    # stable sort keeps file order among equal priorities
    for pat, payload in sorted(entries, key=lambda e: e[0].priority):
        if pat.matches(org):
            return payload
    return None


def _parse_pattern(entry: dict, where: str) -> OrgPattern:
    if not isinstance(entry, dict) or "pattern" not in entry:
        raise CatalogError(f"{where}: entry needs a 'pattern'")
    return OrgPattern(str(entry["pattern"]), entry.get("match", "substring"), int(entry.get("priority", 100)))


@dataclass(frozen=True)
class EnterpriseCatalog:
    country_context: str
    entries: Tuple[Tuple[OrgPattern, EnterpriseType], ...]
    default: EnterpriseType = EnterpriseType.LOCAL_PRIVATE
    version: str = ""

    def classify(self, org: Optional[str]) -> EnterpriseType:
        if org is None or not org.strip():
            return EnterpriseType.UNREGISTERED
        found = _first_match(self.entries, org)
        return found if found is not None else self.default

    @classmethod
    def from_dict(cls, doc: dict) -> "EnterpriseCatalog":
        try:
            country = doc["country_context"]
            entries = []
            for i, e in enumerate(doc.get("entries", ())):
                entries.append((_parse_pattern(e, f"entries[{i}]"), EnterpriseType(e["type"])))
            default = EnterpriseType(doc.get("default", EnterpriseType.LOCAL_PRIVATE.value))
        except KeyError as exc:
            raise CatalogError(f"catalog missing key {exc}") from None
        except ValueError as exc:
            raise CatalogError(str(exc)) from None
        return cls(country, tuple(entries), default, str(doc.get("version", "")))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EnterpriseCatalog":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ManagedDnsList:
    providers: Tuple[OrgPattern, ...]
    version: str = ""

    def matches(self, org: Optional[str]) -> bool:
        if not org:
            return False
        return _first_match([(p, True) for p in self.providers], org) is not None

    @classmethod
    def from_dict(cls, doc: dict) -> "ManagedDnsList":
        providers = tuple(_parse_pattern(p, f"providers[{i}]") for i, p in enumerate(doc.get("providers", ())))
        return cls(providers, str(doc.get("version", "")))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ManagedDnsList":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_recommended_algorithms(path: Union[str, Path]) -> frozenset:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    algs = frozenset(int(a) for a in doc["recommended"])
    if any(not 0 <= a <= 255 for a in algs):
        raise CatalogError("DNSSEC algorithm numbers must lie in [0, 255]")
    return algs


def sample_data_path(name: str) -> Path:
    """Path of a file shipped in the package ``data`` directory."""
    return Path(str(resources.files("authdns_resilience") / "data" / name))


Subject = Tuple[str, ...]
Value = Union[str, int, None]


@dataclass(frozen=True)
class AttributeValue:
    """A derived attribute at one point of the hierarchy.

    ``subject`` is the path of the item it describes: ``(function, fqdn,
    ip)`` for instances, ``(function, fqdn)`` for name servers and
    ``(function,)`` for a functionality. ``gap`` marks values derived from
    missing source data; they are scored as the worst option.
    """

    attribute_id: str
    hierarchy_level: str
    subject: Subject
    value: Value
    gap: bool = False

    def __post_init__(self):
        if self.attribute_id not in ATTRIBUTE_LEVEL:
            raise ValueError(f"unknown attribute {self.attribute_id!r}")
        if ATTRIBUTE_LEVEL[self.attribute_id] != self.hierarchy_level:
            raise ValueError(
                f"{self.attribute_id} is defined at {ATTRIBUTE_LEVEL[self.attribute_id]} level, not {self.hierarchy_level}"
            )
        object.__setattr__(self, "subject", tuple(self.subject))
        if self.attribute_id in COUNT_ATTRIBUTES and not self.gap:
            if isinstance(self.value, bool) or not isinstance(self.value, int) or self.value < 1:
                raise ValueError(f"{self.attribute_id} count must be an integer >= 1, got {self.value!r}")

    def to_dict(self) -> dict:
        return {
            "attribute_id": self.attribute_id,
            "hierarchy_level": self.hierarchy_level,
            "subject": list(self.subject),
            "value": self.value,
            "gap": self.gap,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AttributeValue":
        return cls(doc["attribute_id"], doc["hierarchy_level"], tuple(doc["subject"]), doc["value"], bool(doc.get("gap")))


def _inst(attr: str, function: str, fqdn: str, inst: HostingInstance, value, gap=False) -> AttributeValue:
    return AttributeValue(attr, "instance", (function, fqdn, inst.ip), value, gap)


def _distinct(instances: Iterable[HostingInstance], name: str) -> Tuple[Optional[int], bool]:
    """Count distinct values of ``name``; any missing value marks a gap."""
    values = set()
    for inst in instances:
        v = getattr(inst, name)
        if v is None:
            return None, True
        values.add(v)
    return len(values), False


# -- placement ----------------------------------------------------------------


def effective_country(record: DomainRecord, inst: HostingInstance) -> Optional[str]:
    """Serving country of an instance.

    Anycast addresses answered from an in-country vantage are treated as
    serving locally whatever their registered location.
    """
    vantage = record.vantage_country or record.country_context
    if inst.anycast and inst.responsive and vantage == record.country_context:
        return record.country_context
    return inst.geolocation_country


def derive_placement(record: DomainRecord, catalog: EnterpriseCatalog) -> List[AttributeValue]:
    if catalog.country_context != record.country_context:
        raise CatalogError(
            f"catalog is for {catalog.country_context}, record assessed from {record.country_context}"
        )
    out: List[AttributeValue] = []

    def placement(org_attr: str, geo_attr: str, function: str, fqdn: str, inst: HostingInstance):
        org_type = catalog.classify(inst.host_org_name)
        out.append(_inst(org_attr, function, fqdn, inst, org_type.value, inst.host_org_name is None))
        country = effective_country(record, inst)
        if country is None:
            out.append(_inst(geo_attr, function, fqdn, inst, "outside", True))
        else:
            out.append(_inst(geo_attr, function, fqdn, inst, "inside" if country == record.country_context else "outside"))

    for inst in record.primary.instances:
        placement("PP1", "PP2", "primary", record.primary.fqdn, inst)
    for ns in record.authoritative.name_servers:
        for inst in ns.instances:
            placement("PA1", "PA2", "authoritative", ns.fqdn, inst)
    return out


# -- configuration ------------------------------------------------------------


def _anycast(attr: str, function: str, fqdn: str, inst: HostingInstance) -> AttributeValue:
    if inst.anycast is None:
        return _inst(attr, function, fqdn, inst, "unicast", True)
    return _inst(attr, function, fqdn, inst, "anycast" if inst.anycast else "unicast")


def _count(attr: str, subject: Subject, count: Optional[int], gap: bool) -> AttributeValue:
    return AttributeValue(attr, ATTRIBUTE_LEVEL[attr], subject, count, gap)


def derive_configuration(record: DomainRecord) -> List[AttributeValue]:
    out: List[AttributeValue] = []
    prim = record.primary
    auth_ips = {inst.address for inst in record.authoritative.instances()}

    for inst in prim.instances:
        out.append(_anycast("CP1", "primary", prim.fqdn, inst))
        out.append(_inst("CP2", "primary", prim.fqdn, inst, "exposed" if inst.address in auth_ips else "dedicated"))
    subject = ("primary", prim.fqdn)
    out.append(_count("CP3", subject, len({i.address for i in prim.instances}), False))
    out.append(_count("CP4", subject, *_distinct(prim.instances, "admin_subnet")))
    out.append(_count("CP5", subject, *_distinct(prim.instances, "admin_asn")))

    servers = record.authoritative.name_servers
    for ns in servers:
        for inst in ns.instances:
            out.append(_anycast("CA1", "authoritative", ns.fqdn, inst))
        subject = ("authoritative", ns.fqdn)
        out.append(_count("CA2", subject, len({i.address for i in ns.instances}), False))
        out.append(_count("CA3", subject, *_distinct(ns.instances, "admin_subnet")))
        out.append(_count("CA4", subject, *_distinct(ns.instances, "admin_asn")))
    all_auth = record.authoritative.instances()
    out.append(_count("CA5", ("authoritative",), len({ns.fqdn for ns in servers}), False))
    out.append(_count("CA6", ("authoritative",), *_distinct(all_auth, "admin_subnet")))
    out.append(_count("CA7", ("authoritative",), *_distinct(all_auth, "admin_asn")))
    return out


# -- dispatch -----------------------------------------------------------------


def derive_dispatch(
    record: DomainRecord,
    managed: ManagedDnsList,
    recommended_algorithms: Iterable[int] = RECOMMENDED_DNSSEC_ALGORITHMS,
) -> List[AttributeValue]:
    recommended = frozenset(recommended_algorithms)
    out: List[AttributeValue] = []
    prim = record.primary
    for inst in prim.instances:
        if inst.axfr_status == "open":
            out.append(_inst("DP1", "primary", prim.fqdn, inst, "none"))
        elif inst.axfr_status == "not-probed":
            # unmeasured transfer control counts as unenforced
            out.append(_inst("DP1", "primary", prim.fqdn, inst, "none", True))
        elif managed.matches(inst.host_org_name):
            out.append(_inst("DP1", "primary", prim.fqdn, inst, "automatic"))
        else:
            out.append(_inst("DP1", "primary", prim.fqdn, inst, "manual"))

    for ns in record.authoritative.name_servers:
        for inst in ns.instances:
            if inst.is_gap("dnssec_records"):
                out.append(_inst("DA1", "authoritative", ns.fqdn, inst, "not-configured", True))
                continue
            algorithms = {r.algorithm_number for r in inst.dnssec_records}
            if not algorithms:
                value = "not-configured"
            elif algorithms <= recommended:
                value = "recommended"
            else:
                value = "not-recommended"
            out.append(_inst("DA1", "authoritative", ns.fqdn, inst, value))
    return out


def derive_all(
    record: DomainRecord,
    catalog: EnterpriseCatalog,
    managed: ManagedDnsList,
    recommended_algorithms: Iterable[int] = RECOMMENDED_DNSSEC_ALGORITHMS,
) -> List[AttributeValue]:
    values = (
        derive_placement(record, catalog)
        + derive_configuration(record)
        + derive_dispatch(record, managed, recommended_algorithms)
    )
    order = {a: i for i, a in enumerate(ATTRIBUTE_IDS)}
    return sorted(values, key=lambda v: (order[v.attribute_id], v.subject))


@dataclass
class AttributeContext:
    """The curated inputs attribute derivation needs besides the record."""

    catalog: EnterpriseCatalog
    managed: ManagedDnsList
    recommended_algorithms: frozenset = field(default_factory=lambda: RECOMMENDED_DNSSEC_ALGORITHMS)

    def derive(self, record: DomainRecord) -> List[AttributeValue]:
        return derive_all(record, self.catalog, self.managed, self.recommended_algorithms)
