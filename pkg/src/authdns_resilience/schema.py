"""Hierarchical per-domain data model and its JSON document format.

A record mirrors the layout of an authoritative DNS deployment::

    DomainRecord
      primary: PrimaryFunction          (SOA MNAME)
        instances: [HostingInstance]
      authoritative: AuthoritativeFunction
        name_servers: [AuthoritativeNameServer]   (NS RRset)
          instances: [HostingInstance]

Every per-instance field is stored together with the source that filled it
and, if the source failed, a gap marker explaining why the value is absent.
"""

from __future__ import annotations

import ipaddress
import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Dict, List, Mapping, Optional, Tuple
from urllib.parse import quote, unquote

SCHEMA_VERSION = 1

AXFR_STATUSES = ("open", "refused", "timeout", "not-probed")
DNSSEC_RECORD_TYPES = ("DNSKEY", "DS", "RRSIG")
SOURCES = ("dns-probe", "registration", "ip-intelligence", "measured-axfr")

# field -> source that fills it by default
DEFAULT_PROVENANCE: Dict[str, str] = {
    "ip": "dns-probe",
    "responsive": "dns-probe",
    "host_org_name": "registration",
    "host_org_country": "registration",
    "admin_subnet": "registration",
    "admin_asn": "registration",
    "anycast": "ip-intelligence",
    "geolocation_country": "ip-intelligence",
    "axfr_status": "measured-axfr",
    "dnssec_records": "dns-probe",
}
INSTANCE_FIELDS = tuple(DEFAULT_PROVENANCE)

RECORD_FLAGS = ("primary-inferred", "degraded")

_LABEL_RE = re.compile(r"^[a-z0-9_](?:[a-z0-9_-]{0,61}[a-z0-9_])?$")
_COUNTRY_RE = re.compile(r"^[A-Z]{2}$")


class SchemaError(ValueError):
    """A document or record violates the data model.

    ``path`` is a dotted location inside the document, e.g.
    ``authoritative.name_servers[1].instances[0].ip``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path or '<root>'}: {message}")


def canonical_name(name: str) -> str:
    """Lowercase, trailing dot stripped."""
    return name.strip().lower().rstrip(".")


def is_valid_domain(name: str) -> bool:
    if not name or len(name) > 253:
        return False
    return all(_LABEL_RE.match(label) for label in name.split("."))


def domain_filename(domain: str) -> str:
    return quote(domain, safe="") + ".json"


def domain_from_filename(filename: str) -> str:
    if not filename.endswith(".json"):
        raise ValueError(f"not a domain document name: {filename}")
    return unquote(filename[: -len(".json")])


def _check_country(value: Optional[str], path: str) -> None:
    if value is not None and not _COUNTRY_RE.match(value):
        raise SchemaError(path, f"not an ISO 3166-1 alpha-2 code: {value!r}")


@dataclass(frozen=True)
class DnssecKeyRecord:
    record_type: str
    algorithm_number: int
    raw: str = ""

    def __post_init__(self):
        if self.record_type not in DNSSEC_RECORD_TYPES:
            raise SchemaError("record_type", f"unknown DNSSEC record type {self.record_type!r}")
        if isinstance(self.algorithm_number, bool) or not isinstance(self.algorithm_number, int):
            raise SchemaError("algorithm_number", "must be an integer")
        if not 0 <= self.algorithm_number <= 255:
            raise SchemaError("algorithm_number", f"out of range [0, 255]: {self.algorithm_number}")


@dataclass(frozen=True)
class HostingInstance:
    """One IP-addressed server behind a name-server FQDN.

    ``None`` means the value is unknown; in that case ``gaps`` normally holds
    the reason the responsible source could not supply it.
    """

    ip: str
    host_org_name: Optional[str] = None
    host_org_country: Optional[str] = None
    admin_subnet: Optional[str] = None
    admin_asn: Optional[int] = None
    anycast: Optional[bool] = None
    geolocation_country: Optional[str] = None
    axfr_status: str = "not-probed"
    dnssec_records: Tuple[DnssecKeyRecord, ...] = ()
    responsive: Optional[bool] = None
    provenance: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_PROVENANCE))
    gaps: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        try:
            addr = ipaddress.ip_address(self.ip)
        except ValueError:
            raise SchemaError("ip", f"not an IP address: {self.ip!r}") from None
        # store the compressed canonical text so joins across sources agree
        object.__setattr__(self, "ip", addr.compressed)
        object.__setattr__(self, "dnssec_records", tuple(self.dnssec_records))
        prov = dict(DEFAULT_PROVENANCE)
        prov.update(self.provenance)
        object.__setattr__(self, "provenance", prov)
        object.__setattr__(self, "gaps", dict(self.gaps))

        if self.admin_subnet is not None:
            try:
                net = ipaddress.ip_network(self.admin_subnet, strict=False)
            except ValueError:
                raise SchemaError("admin_subnet", f"not a CIDR prefix: {self.admin_subnet!r}") from None
            if addr.version != net.version or addr not in net:
                raise SchemaError("admin_subnet", f"{self.admin_subnet} does not contain {self.ip}")
        if self.admin_asn is not None and (
            isinstance(self.admin_asn, bool) or not isinstance(self.admin_asn, int) or not 0 <= self.admin_asn < 2**32
        ):
            raise SchemaError("admin_asn", f"not an AS number: {self.admin_asn!r}")
        _check_country(self.host_org_country, "host_org_country")
        _check_country(self.geolocation_country, "geolocation_country")
        if self.axfr_status not in AXFR_STATUSES:
            raise SchemaError("axfr_status", f"unknown status {self.axfr_status!r}")
        for name, source in prov.items():
            if name not in INSTANCE_FIELDS:
                raise SchemaError(f"provenance.{name}", "unknown instance field")
            if source not in SOURCES:
                raise SchemaError(f"provenance.{name}", f"unknown source {source!r}")
        for name in self.gaps:
            if name not in INSTANCE_FIELDS:
                raise SchemaError(f"gaps.{name}", "unknown instance field")

    @property
    def address(self) -> ipaddress._BaseAddress:
        return ipaddress.ip_address(self.ip)

    def is_gap(self, name: str) -> bool:
        return name in self.gaps


def _check_instances(instances: Tuple[HostingInstance, ...]) -> None:
    if not instances:
        raise SchemaError("instances", "must not be empty")
    seen = set()
    for i, inst in enumerate(instances):
        if inst.ip in seen:
            raise SchemaError(f"instances[{i}].ip", f"duplicate instance IP {inst.ip}")
        seen.add(inst.ip)


def _check_fqdn(fqdn: str, path: str) -> str:
    name = canonical_name(fqdn)
    if not is_valid_domain(name):
        raise SchemaError(path, f"invalid FQDN {fqdn!r}")
    return name


@dataclass(frozen=True)
class PrimaryFunction:
    fqdn: str
    instances: Tuple[HostingInstance, ...]

    def __post_init__(self):
        object.__setattr__(self, "fqdn", _check_fqdn(self.fqdn, "fqdn"))
        object.__setattr__(self, "instances", tuple(self.instances))
        _check_instances(self.instances)


@dataclass(frozen=True)
class AuthoritativeNameServer:
    fqdn: str
    instances: Tuple[HostingInstance, ...]

    def __post_init__(self):
        object.__setattr__(self, "fqdn", _check_fqdn(self.fqdn, "fqdn"))
        object.__setattr__(self, "instances", tuple(self.instances))
        _check_instances(self.instances)


@dataclass(frozen=True)
class AuthoritativeFunction:
    name_servers: Tuple[AuthoritativeNameServer, ...]

    def __post_init__(self):
        object.__setattr__(self, "name_servers", tuple(self.name_servers))
        if not self.name_servers:
            raise SchemaError("name_servers", "must not be empty")
        seen = set()
        for i, ns in enumerate(self.name_servers):
            if ns.fqdn in seen:
                raise SchemaError(f"name_servers[{i}].fqdn", f"duplicate name server {ns.fqdn}")
            seen.add(ns.fqdn)

    def instances(self) -> List[HostingInstance]:
        return [inst for ns in self.name_servers for inst in ns.instances]


@dataclass(frozen=True)
class DomainRecord:
    domain_name: str
    collected_at: datetime
    primary: PrimaryFunction
    authoritative: AuthoritativeFunction
    country_context: str
    vantage_country: Optional[str] = None
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        name = canonical_name(self.domain_name)
        if not is_valid_domain(name):
            raise SchemaError("domain_name", f"invalid domain name {self.domain_name!r}")
        object.__setattr__(self, "domain_name", name)
        if self.collected_at.tzinfo is None:
            raise SchemaError("collected_at", "timestamp must be timezone-aware (UTC)")
        object.__setattr__(self, "collected_at", self.collected_at.astimezone(timezone.utc))
        _check_country(self.country_context, "country_context")
        if self.country_context is None:
            raise SchemaError("country_context", "required")
        _check_country(self.vantage_country, "vantage_country")
        flags = tuple(sorted(set(self.flags)))
        for flag in flags:
            if flag not in RECORD_FLAGS:
                raise SchemaError("flags", f"unknown flag {flag!r}")
        object.__setattr__(self, "flags", flags)

    def all_instances(self) -> List[HostingInstance]:
        return list(self.primary.instances) + self.authoritative.instances()

    @property
    def has_gaps(self) -> bool:
        return any(inst.gaps for inst in self.all_instances())

    def with_flags(self, *extra: str) -> "DomainRecord":
        return replace(self, flags=tuple(self.flags) + extra)


# -- document encoding -------------------------------------------------------


def _format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _parse_ts(text: Any, path: str) -> datetime:
    if not isinstance(text, str):
        raise SchemaError(path, "timestamp must be a string")
    try:
        ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise SchemaError(path, f"bad timestamp {text!r}") from None
    if ts.tzinfo is None:
        raise SchemaError(path, "timestamp must carry a UTC offset")
    return ts


def _instance_to_doc(inst: HostingInstance) -> Dict[str, Any]:
    doc: Dict[str, Any] = {}
    for name in INSTANCE_FIELDS:
        value = getattr(inst, name)
        if name == "dnssec_records":
            value = [
                {"record_type": r.record_type, "algorithm_number": r.algorithm_number, "raw": r.raw}
                for r in value
            ]
        entry: Dict[str, Any] = {"value": value, "source": inst.provenance[name]}
        if name in inst.gaps:
            entry["gap"] = inst.gaps[name]
        doc[name] = entry
    return doc


def _server_to_doc(fqdn: str, instances) -> Dict[str, Any]:
    return {"fqdn": fqdn, "instances": [_instance_to_doc(i) for i in instances]}


def record_to_dict(record: DomainRecord) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "domain_name": record.domain_name,
        "collected_at": _format_ts(record.collected_at),
        "country_context": record.country_context,
        "vantage_country": record.vantage_country,
        "flags": list(record.flags),
        "primary": _server_to_doc(record.primary.fqdn, record.primary.instances),
        "authoritative": {
            "name_servers": [_server_to_doc(ns.fqdn, ns.instances) for ns in record.authoritative.name_servers]
        },
    }


def serialize(record: DomainRecord) -> bytes:
    """Encode a record as a UTF-8 JSON document with a fixed key order."""
    return (json.dumps(record_to_dict(record), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _require(doc: Mapping[str, Any], key: str, path: str) -> Any:
    if not isinstance(doc, Mapping):
        raise SchemaError(path, "expected an object")
    if key not in doc:
        raise SchemaError(f"{path}.{key}".lstrip("."), "missing")
    return doc[key]


def _instance_from_doc(doc: Any, path: str) -> HostingInstance:
    if not isinstance(doc, Mapping):
        raise SchemaError(path, "expected an object")
    values: Dict[str, Any] = {}
    provenance: Dict[str, str] = {}
    gaps: Dict[str, str] = {}
    for name in INSTANCE_FIELDS:
        entry = _require(doc, name, path)
        fpath = f"{path}.{name}"
        if not isinstance(entry, Mapping) or "value" not in entry:
            raise SchemaError(fpath, "expected {value, source}")
        value = entry["value"]
        if name == "dnssec_records":
            if not isinstance(value, list):
                raise SchemaError(fpath, "expected a list")
            recs = []
            for j, r in enumerate(value):
                rpath = f"{fpath}[{j}]"
                try:
                    recs.append(
                        DnssecKeyRecord(
                            _require(r, "record_type", rpath),
                            _require(r, "algorithm_number", rpath),
                            r.get("raw", ""),
                        )
                    )
                except SchemaError as exc:
                    if exc.path.startswith(rpath):
                        raise
                    raise SchemaError(f"{rpath}.{exc.path}", exc.message) from None
            value = tuple(recs)
        values[name] = value
        provenance[name] = entry.get("source", DEFAULT_PROVENANCE[name])
        if "gap" in entry:
            gaps[name] = str(entry["gap"])
    try:
        return HostingInstance(provenance=provenance, gaps=gaps, **values)
    except SchemaError as exc:
        raise SchemaError(f"{path}.{exc.path}", exc.message) from None
    except TypeError as exc:
        raise SchemaError(path, str(exc)) from None


def _instances_from_doc(doc: Mapping[str, Any], path: str) -> Tuple[HostingInstance, ...]:
    raw = _require(doc, "instances", path)
    if not isinstance(raw, list):
        raise SchemaError(f"{path}.instances", "expected a list")
    return tuple(_instance_from_doc(d, f"{path}.instances[{i}]") for i, d in enumerate(raw))


def _wrap(path: str, build):
    try:
        return build()
    except SchemaError as exc:
        raise SchemaError(f"{path}.{exc.path}".strip("."), exc.message) from None


def record_from_dict(doc: Mapping[str, Any]) -> DomainRecord:
    if not isinstance(doc, Mapping):
        raise SchemaError("", "document root must be an object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError("schema_version", f"unsupported version {version!r}")

    prim = _require(doc, "primary", "")
    p_instances = _instances_from_doc(prim, "primary")
    primary = _wrap("primary", lambda: PrimaryFunction(_require(prim, "fqdn", ""), p_instances))

    auth = _require(doc, "authoritative", "")
    raw_servers = _require(auth, "name_servers", "authoritative")
    if not isinstance(raw_servers, list):
        raise SchemaError("authoritative.name_servers", "expected a list")
    servers = []
    for i, ns in enumerate(raw_servers):
        path = f"authoritative.name_servers[{i}]"
        insts = _instances_from_doc(ns, path)
        servers.append(_wrap(path, lambda: AuthoritativeNameServer(_require(ns, "fqdn", ""), insts)))
    authoritative = _wrap("authoritative", lambda: AuthoritativeFunction(tuple(servers)))

    return _wrap(
        "",
        lambda: DomainRecord(
            domain_name=_require(doc, "domain_name", ""),
            collected_at=_parse_ts(_require(doc, "collected_at", ""), "collected_at"),
            primary=primary,
            authoritative=authoritative,
            country_context=_require(doc, "country_context", ""),
            vantage_country=doc.get("vantage_country"),
            flags=tuple(doc.get("flags", ())),
        ),
    )


def deserialize(data: bytes | str) -> DomainRecord:
    """Parse a JSON document into a validated :class:`DomainRecord`.

    Raises :class:`SchemaError` naming the offending path for malformed
    documents and invariant violations.
    """
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError("", f"malformed document: {exc}") from None
    return record_from_dict(doc)
