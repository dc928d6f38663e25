"""Populate a :class:`DomainRecord` from DNS probes, RDAP and IP intelligence."""

from __future__ import annotations

import ipaddress
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from ..schema import (
    AuthoritativeFunction,
    AuthoritativeNameServer,
    DnssecKeyRecord,
    DomainRecord,
    HostingInstance,
    PrimaryFunction,
    canonical_name,
    is_valid_domain,
)
from .backends import SourceBackend, SourceError
from .probes import ProbeResult
from .rdap import parse_registration

log = logging.getLogger(__name__)


class CollectionError(RuntimeError):
    """NS enumeration failed; nothing useful can be collected."""


class DomainUnreachable(RuntimeError):
    """Every validation probe timed out (distinct from a nonexistent name)."""


@dataclass(frozen=True)
class CollectSettings:
    address_repeats: int = 3  # repeated A/AAAA queries, answers unioned
    axfr_timeout: float = 10.0
    max_in_flight: int = 4  # per target server
    workers: int = 8


class PerTargetLimiter:
    """Caps concurrent in-flight queries per target server."""

    def __init__(self, limit: int = 4):
        if limit < 1:
            raise ValueError("limit must be >= 1")
        self.limit = limit
        self._lock = threading.Lock()
        self._sems: Dict[str, threading.BoundedSemaphore] = {}

    def _sem(self, target: str) -> threading.BoundedSemaphore:
        with self._lock:
            if target not in self._sems:
                self._sems[target] = threading.BoundedSemaphore(self.limit)
            return self._sems[target]

    @contextmanager
    def slot(self, target: str):
        sem = self._sem(target)
        with sem:
            yield


def _sort_ips(ips):
    return sorted(set(ips), key=lambda s: (ipaddress.ip_address(s).version, ipaddress.ip_address(s)))


class Collector:
    def __init__(
        self,
        backend: SourceBackend,
        settings: Optional[CollectSettings] = None,
        limiter: Optional[PerTargetLimiter] = None,
    ):
        self.backend = backend
        self.settings = settings or CollectSettings()
        self.limiter = limiter or PerTargetLimiter(self.settings.max_in_flight)

    # -- probes ---------------------------------------------------------

    def _query(self, domain: str, qname: str, rrtype: str, server: Optional[str] = None) -> ProbeResult:
        with self.limiter.slot(server or "resolver"):
            return self.backend.dns_query(domain, qname, rrtype, server)

    def validate_domain(self, name: str) -> bool:
        """True iff an SOA, NS or A lookup is answered.

        Raises :class:`DomainUnreachable` when every lookup timed out.
        """
        domain = canonical_name(name)
        if not is_valid_domain(domain):
            raise ValueError(f"invalid domain name {name!r}")
        outcomes = []
        for rrtype in ("SOA", "NS", "A"):
            result = self._query(domain, domain, rrtype)
            if result.answered:
                return True
            outcomes.append(result.outcome)
        if all(o == "timeout" for o in outcomes):
            raise DomainUnreachable(f"{domain}: all validation probes timed out")
        return False

    def probe_axfr(self, ip: str, zone: str, domain: Optional[str] = None) -> str:
        zone = canonical_name(zone)
        with self.limiter.slot(ip):
            result = self.backend.zone_transfer(domain or zone, zone, ip, self.settings.axfr_timeout)
        return axfr_status_from_probe(result)

    def _addresses(self, domain: str, fqdn: str) -> List[str]:
        found = []
        for rrtype in ("A", "AAAA"):
            for _ in range(max(1, self.settings.address_repeats)):
                result = self._query(domain, fqdn, rrtype)
                for rr in result.rdatas(rrtype):
                    found.append(rr.rdata.address)
        return _sort_ips(found)

    # -- enrichment -----------------------------------------------------

    def _enrich(self, domain: str, ip: str) -> dict:
        fields: dict = {}
        gaps: Dict[str, str] = {}
        try:
            reg = parse_registration(self.backend.registration(domain, ip), ip)
        except SourceError as exc:
            reg = {k: None for k in ("host_org_name", "host_org_country", "admin_subnet", "admin_asn")}
            for k in reg:
                gaps[k] = f"registration: {exc}"
        else:
            for k, v in reg.items():
                if v is None:
                    gaps[k] = "registration: field absent"
        fields.update(reg)

        try:
            intel = self.backend.intelligence(domain, ip)
        except SourceError as exc:
            intel = {"anycast": None, "country": None}
            gaps["anycast"] = gaps["geolocation_country"] = f"ip-intelligence: {exc}"
        else:
            if intel.get("anycast") is None:
                gaps["anycast"] = "ip-intelligence: field absent"
            if intel.get("country") is None:
                gaps["geolocation_country"] = "ip-intelligence: field absent"
        fields["anycast"] = intel.get("anycast")
        fields["geolocation_country"] = intel.get("country")

        soa = self._query(domain, domain, "SOA", ip)
        fields["responsive"] = soa.outcome != "timeout"
        fields["_soa_answered"] = soa.answered
        fields["_gaps"] = gaps
        return fields

    def _dnssec(self, domain: str, ip: str, ds_records: Tuple[DnssecKeyRecord, ...]):
        result = self._query(domain, domain, "DNSKEY", ip)
        if result.outcome == "timeout":
            return (), "dns-probe: DNSKEY query timed out"
        recs = []
        for rr in result.rdatas():
            if rr.rrtype == "DNSKEY":
                recs.append(DnssecKeyRecord("DNSKEY", int(rr.rdata.algorithm), rr.text))
            elif rr.rrtype == "RRSIG":
                recs.append(DnssecKeyRecord("RRSIG", int(rr.rdata.algorithm), rr.text))
        if recs:
            recs.extend(ds_records)
        return tuple(recs), None

    # -- assembly -------------------------------------------------------

    def collect(self, name: str, country_context: str, vantage_country: Optional[str] = None) -> DomainRecord:
        domain = canonical_name(name)
        collected_at = self.backend.collected_at(domain)
        flags = []

        ns_result = self._query(domain, domain, "NS")
        if not ns_result.answered:
            raise CollectionError(f"{domain}: NS enumeration failed ({ns_result.outcome})")
        ns_names = sorted({canonical_name(rr.rdata.target.to_text()) for rr in ns_result.rdatas("NS")})
        if not ns_names:
            raise CollectionError(f"{domain}: NS answer carried no NS records")

        with ThreadPoolExecutor(max_workers=self.settings.workers) as pool:
            addr_futs = {ns: pool.submit(self._addresses, domain, ns) for ns in ns_names}
            ns_addrs = {ns: fut.result() for ns, fut in addr_futs.items()}

        missing = [ns for ns, ips in ns_addrs.items() if not ips]
        if missing:
            log.warning("%s: name servers without addresses dropped: %s", domain, ", ".join(missing))
            flags.append("degraded")
        ns_addrs = {ns: ips for ns, ips in ns_addrs.items() if ips}
        if not ns_addrs:
            raise CollectionError(f"{domain}: no name server resolved to an address")

        soa = self._query(domain, domain, "SOA")
        mname = None
        for rr in soa.rdatas("SOA"):
            mname = canonical_name(rr.rdata.mname.to_text())
            break
        primary_ips: List[str] = []
        if mname and is_valid_domain(mname):
            primary_ips = ns_addrs.get(mname) or self._addresses(domain, mname)

        all_ips = _sort_ips([ip for ips in ns_addrs.values() for ip in ips] + primary_ips)
        ds = self._query(domain, domain, "DS")
        ds_records = tuple(
            DnssecKeyRecord("DS", int(rr.rdata.algorithm), rr.text) for rr in ds.rdatas("DS")
        )
        auth_ips = _sort_ips(ip for ips in ns_addrs.values() for ip in ips)

        with ThreadPoolExecutor(max_workers=self.settings.workers) as pool:
            enrich_futs = {ip: pool.submit(self._enrich, domain, ip) for ip in all_ips}
            dnssec_futs = {ip: pool.submit(self._dnssec, domain, ip, ds_records) for ip in auth_ips}
            enriched = {ip: f.result() for ip, f in enrich_futs.items()}
            dnssec = {ip: f.result() for ip, f in dnssec_futs.items()}

        if not primary_ips:
            # no usable MNAME: fall back to the first server answering SOA
            bearer = next(
                (ns for ns in sorted(ns_addrs) if any(enriched[ip]["_soa_answered"] for ip in ns_addrs[ns])),
                sorted(ns_addrs)[0],
            )
            mname = bearer
            primary_ips = ns_addrs[bearer]
            flags.append("primary-inferred")

        with ThreadPoolExecutor(max_workers=self.settings.workers) as pool:
            axfr_futs = {ip: pool.submit(self.probe_axfr, ip, domain, domain) for ip in primary_ips}
            axfr = {ip: f.result() for ip, f in axfr_futs.items()}

        def build(ip: str, role: str) -> HostingInstance:
            info = enriched[ip]
            gaps = dict(info["_gaps"])
            records: Tuple[DnssecKeyRecord, ...] = ()
            if role == "authoritative":
                records, dnssec_gap = dnssec[ip]
                if dnssec_gap:
                    gaps["dnssec_records"] = dnssec_gap
            axfr_status = axfr[ip] if role == "primary" else "not-probed"
            if role == "primary" and axfr_status == "not-probed":
                gaps["axfr_status"] = "measured-axfr: no transfer attempt recorded"
            return HostingInstance(
                ip=ip,
                host_org_name=info["host_org_name"],
                host_org_country=info["host_org_country"],
                admin_subnet=info["admin_subnet"],
                admin_asn=info["admin_asn"],
                anycast=info["anycast"],
                geolocation_country=info["geolocation_country"],
                axfr_status=axfr_status,
                dnssec_records=records,
                responsive=info["responsive"],
                gaps=gaps,
            )

        primary = PrimaryFunction(mname, tuple(build(ip, "primary") for ip in primary_ips))
        servers = tuple(
            AuthoritativeNameServer(ns, tuple(build(ip, "authoritative") for ip in ips))
            for ns, ips in sorted(ns_addrs.items())
        )
        record = DomainRecord(
            domain_name=domain,
            collected_at=collected_at,
            primary=primary,
            authoritative=AuthoritativeFunction(servers),
            country_context=country_context,
            vantage_country=vantage_country or country_context,
            flags=tuple(flags),
        )
        if record.has_gaps:
            record = record.with_flags("degraded")
        return record


def axfr_status_from_probe(result: ProbeResult) -> str:
    """open only for a complete transfer (first and last record SOA)."""
    if result.outcome == "timeout":
        return "timeout"
    if result.outcome == "nodata":
        # nothing recorded for this server: no attempt on file
        return "not-probed"
    if result.answered:
        types = [rr.rrtype for rr in result.rdatas()]
        if len(types) >= 2 and types[0] == "SOA" and types[-1] == "SOA":
            return "open"
    return "refused"


def validate_domain(name: str, backend: SourceBackend) -> bool:
    return Collector(backend).validate_domain(name)


def collect(name: str, backend: SourceBackend, country_context: str, **kwargs) -> DomainRecord:
    return Collector(backend).collect(name, country_context, **kwargs)


def probe_axfr(primary_instance_ip: str, zone: str, backend: SourceBackend) -> str:
    return Collector(backend).probe_axfr(primary_instance_ip, zone)
