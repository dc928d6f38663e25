"""Source backends: live network access and offline fixture replay.

Fixture layout, one directory per assessed domain::

    <root>/<domain>/meta                      key=value (collected_at)
    <root>/<domain>/dns/<qname>_<TYPE>.txt     answer via the resolver
    <root>/<domain>/dns/<qname>_<TYPE>@<ip>.txt  answer from one server
    <root>/<domain>/rdap/<ip>.json            raw RDAP ip-network object
    <root>/<domain>/rdap/<ip>.error           recorded lookup failure
    <root>/<domain>/intel/<ip>                key=value intelligence answer
    <root>/<domain>/intel/<ip>.error          recorded lookup failure

A missing DNS file replays as an empty NOERROR answer (``nodata``).
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

from .intel import IntelligenceError, normalize, parse_kv, render_kv
from .probes import ProbeResult, parse_probe, render_probe
from .rdap import RegistrationError

REPLAY_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class SourceError(RuntimeError):
    """A registration or intelligence source could not answer."""


@dataclass
class BackendConfig:
    kind: str = "fixture-replay"  # live | fixture-replay
    fixtures_dir: Optional[Path] = None
    cache_dir: Optional[Path] = None
    resolvers: tuple = ()
    dns_port: int = 53
    dns_timeout: float = 3.0
    rdap_base_url: Optional[str] = None
    intel: Dict[str, Any] = field(default_factory=dict)


def _dns_filename(qname: str, rrtype: str, server: Optional[str]) -> str:
    base = f"{qname.lower().rstrip('.')}_{rrtype.upper()}"
    return f"{base}@{server}.txt" if server else f"{base}.txt"


def _format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class SourceBackend:
    """Interface shared by all backends. ``domain`` scopes every call to the
    domain being collected so recordings land in that domain's directory."""

    kind = "abstract"

    def dns_query(self, domain: str, qname: str, rrtype: str, server: Optional[str] = None) -> ProbeResult:
        raise NotImplementedError

    def zone_transfer(self, domain: str, zone: str, server: str, timeout: float) -> ProbeResult:
        raise NotImplementedError

    def registration(self, domain: str, ip: str) -> Dict[str, Any]:
        raise NotImplementedError

    def intelligence(self, domain: str, ip: str) -> Dict[str, Any]:
        raise NotImplementedError

    def collected_at(self, domain: str) -> datetime:
        raise NotImplementedError


class FixtureReplayBackend(SourceBackend):
    kind = "fixture-replay"

    def __init__(self, root: Path):
        self.root = Path(root)

    def _dir(self, domain: str) -> Path:
        return self.root / domain

    def dns_query(self, domain, qname, rrtype, server=None):
        dns_dir = self._dir(domain) / "dns"
        candidates = [dns_dir / _dns_filename(qname, rrtype, server)]
        if server:
            candidates.append(dns_dir / _dns_filename(qname, rrtype, None))
        for path in candidates:
            if path.exists():
                return parse_probe(path.read_text(encoding="utf-8"), qname, rrtype, server)
        return ProbeResult(qname, rrtype, server, "nodata")

    def zone_transfer(self, domain, zone, server, timeout):
        return self.dns_query(domain, zone, "AXFR", server)

    def registration(self, domain, ip):
        base = self._dir(domain) / "rdap"
        doc = base / f"{ip}.json"
        if doc.exists():
            return json.loads(doc.read_text(encoding="utf-8"))
        err = base / f"{ip}.error"
        if err.exists():
            raise SourceError(err.read_text(encoding="utf-8").strip())
        raise SourceError("no registration response recorded")

    def intelligence(self, domain, ip):
        base = self._dir(domain) / "intel"
        doc = base / ip
        if doc.exists():
            return normalize(parse_kv(doc.read_text(encoding="utf-8")))
        err = base / f"{ip}.error"
        if err.exists():
            raise SourceError(err.read_text(encoding="utf-8").strip())
        raise SourceError("no intelligence response recorded")

    def collected_at(self, domain):
        meta = self._dir(domain) / "meta"
        if meta.exists():
            value = parse_kv(meta.read_text(encoding="utf-8")).get("collected_at")
            if value:
                return datetime.fromisoformat(value.replace("Z", "+00:00"))
        return REPLAY_EPOCH


class RecordingBackend(SourceBackend):
    """Wraps another backend and writes every response in fixture layout."""

    def __init__(self, inner: SourceBackend, root: Path):
        self.inner = inner
        self.root = Path(root)
        self.kind = inner.kind
        self._lock = threading.Lock()

    def _write(self, path: Path, text: str) -> None:
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")

    def dns_query(self, domain, qname, rrtype, server=None):
        result = self.inner.dns_query(domain, qname, rrtype, server)
        self._write(self.root / domain / "dns" / _dns_filename(qname, rrtype, server), render_probe(result))
        return result

    def zone_transfer(self, domain, zone, server, timeout):
        result = self.inner.zone_transfer(domain, zone, server, timeout)
        self._write(self.root / domain / "dns" / _dns_filename(zone, "AXFR", server), render_probe(result))
        return result

    def registration(self, domain, ip):
        base = self.root / domain / "rdap"
        try:
            doc = self.inner.registration(domain, ip)
        except SourceError as exc:
            self._write(base / f"{ip}.error", f"{exc}\n")
            raise
        self._write(base / f"{ip}.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return doc

    def intelligence(self, domain, ip):
        base = self.root / domain / "intel"
        try:
            data = self.inner.intelligence(domain, ip)
        except SourceError as exc:
            self._write(base / f"{ip}.error", f"{exc}\n")
            raise
        self._write(base / ip, render_kv(data))
        return data

    def collected_at(self, domain):
        ts = self.inner.collected_at(domain)
        self._write(self.root / domain / "meta", render_kv({"collected_at": _format_ts(ts)}))
        return ts


class LiveBackend(SourceBackend):
    """Talks to DNS servers, RDAP and an intelligence provider."""

    kind = "live"

    def __init__(self, prober, rdap_client, intel_provider):
        self.prober = prober
        self.rdap = rdap_client
        self.intel = intel_provider

    def dns_query(self, domain, qname, rrtype, server=None):
        return self.prober.query(qname, rrtype, server)

    def zone_transfer(self, domain, zone, server, timeout):
        return self.prober.transfer(zone, server, timeout)

    def registration(self, domain, ip):
        try:
            return self.rdap.lookup(ip)
        except RegistrationError as exc:
            raise SourceError(str(exc)) from exc

    def intelligence(self, domain, ip):
        if self.intel is None:
            raise SourceError("no intelligence provider configured")
        try:
            return self.intel.lookup(ip)
        except IntelligenceError as exc:
            raise SourceError(str(exc)) from exc

    def collected_at(self, domain):
        return datetime.now(timezone.utc)


class DnsPythonProber:
    """Live DNS probes built on dnspython."""

    def __init__(self, resolvers=(), port: int = 53, timeout: float = 3.0):
        import dns.resolver

        self.port = port
        self.timeout = timeout
        self.resolver = dns.resolver.Resolver(configure=not resolvers)
        if resolvers:
            self.resolver.nameservers = list(resolvers)
        self.resolver.port = port
        self.resolver.lifetime = timeout

    def query(self, qname: str, rrtype: str, server: Optional[str] = None) -> ProbeResult:
        import dns.exception
        import dns.message
        import dns.query
        import dns.rcode
        import dns.resolver

        start = time.monotonic()
        if server is None:
            try:
                answer = self.resolver.resolve(qname, rrtype, raise_on_no_answer=False)
            except dns.resolver.NXDOMAIN:
                return ProbeResult(qname, rrtype, None, "nxdomain", (), _ms(start))
            except dns.resolver.NoNameservers:
                return ProbeResult(qname, rrtype, None, "servfail", (), _ms(start))
            except dns.exception.Timeout:
                return ProbeResult(qname, rrtype, None, "timeout", (), _ms(start))
            records = tuple(_rrset_lines(answer.response.answer, rrtype))
            return ProbeResult(qname, rrtype, None, "answer" if records else "nodata", records, _ms(start))

        query = dns.message.make_query(qname, rrtype, want_dnssec=True)
        try:
            response, _ = dns.query.udp_with_fallback(query, server, timeout=self.timeout, port=self.port)
        except dns.exception.Timeout:
            return ProbeResult(qname, rrtype, server, "timeout", (), _ms(start))
        except OSError:
            return ProbeResult(qname, rrtype, server, "refused", (), _ms(start))
        rcode = response.rcode()
        if rcode == dns.rcode.NXDOMAIN:
            outcome = "nxdomain"
        elif rcode == dns.rcode.REFUSED:
            outcome = "refused"
        elif rcode != dns.rcode.NOERROR:
            outcome = "servfail"
        else:
            outcome = None
        records = tuple(_rrset_lines(response.answer, None))
        if outcome is None:
            outcome = "answer" if records else "nodata"
        elif records:
            records = ()
        return ProbeResult(qname, rrtype, server, outcome, records, _ms(start))

    def transfer(self, zone: str, server: str, timeout: float) -> ProbeResult:
        import dns.exception
        import dns.query
        import dns.xfr

        start = time.monotonic()
        records = []
        try:
            for message in dns.query.xfr(server, zone, port=self.port, timeout=timeout, lifetime=timeout):
                records.extend(_rrset_lines(message.answer, None))
        except dns.exception.Timeout:
            return ProbeResult(zone, "AXFR", server, "timeout", (), _ms(start))
        except (dns.xfr.TransferError, dns.exception.FormError, ConnectionError, EOFError, OSError):
            return ProbeResult(zone, "AXFR", server, "refused", (), _ms(start))
        if not records:
            return ProbeResult(zone, "AXFR", server, "refused", (), _ms(start))
        return ProbeResult(zone, "AXFR", server, "answer", tuple(records), _ms(start))


def _ms(start: float) -> float:
    return round((time.monotonic() - start) * 1000.0, 3)


def _rrset_lines(sections, rrtype: Optional[str]):
    import dns.rdatatype

    for rrset in sections:
        if rrtype is not None and dns.rdatatype.to_text(rrset.rdtype) not in (rrtype, "RRSIG", "CNAME"):
            continue
        for rdata in rrset:
            yield f"{rrset.name.to_text()} {rrset.ttl} IN {dns.rdatatype.to_text(rrset.rdtype)} {rdata.to_text()}"


def make_backend(config: BackendConfig) -> SourceBackend:
    if config.kind == "fixture-replay":
        if config.fixtures_dir is None:
            raise ValueError("fixture-replay backend needs fixtures_dir")
        return FixtureReplayBackend(config.fixtures_dir)
    if config.kind != "live":
        raise ValueError(f"unknown backend kind {config.kind!r}")

    from .intel import HttpIntelProvider
    from .rdap import RdapClient

    prober = DnsPythonProber(config.resolvers, config.dns_port, config.dns_timeout)
    rdap = RdapClient(base_url=config.rdap_base_url, cache_dir=config.cache_dir)
    intel = None
    if config.intel.get("url_template"):
        intel = HttpIntelProvider(
            config.intel["url_template"],
            mapping=config.intel.get("mapping"),
            defaults=config.intel.get("defaults"),
            token_env=config.intel.get("token_env"),
            headers=config.intel.get("headers"),
        )
    backend: SourceBackend = LiveBackend(prober, rdap, intel)
    if config.cache_dir is None:
        raise ValueError("live backend needs cache_dir to record responses for replay")
    return RecordingBackend(backend, Path(config.cache_dir) / "responses")
