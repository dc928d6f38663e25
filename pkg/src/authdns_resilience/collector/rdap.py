"""RDAP IP lookups: IANA bootstrap, one-hop referral, and field extraction."""

from __future__ import annotations

import ipaddress
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import httpx

log = logging.getLogger(__name__)

IANA_BOOTSTRAP = "https://data.iana.org/rdap/"


class RegistrationError(RuntimeError):
    pass


def _vcard_value(entity: Dict[str, Any], prop: str) -> Optional[str]:
    vcard = entity.get("vcardArray")
    if not isinstance(vcard, list) or len(vcard) < 2:
        return None
    for item in vcard[1]:
        if isinstance(item, list) and len(item) >= 4 and item[0] == prop:
            value = item[3]
            if isinstance(value, list):
                value = " ".join(str(v) for v in value if v)
            value = str(value).strip()
            if value:
                return value
    return None


def _walk_entities(entities: Iterable[Dict[str, Any]]):
    for ent in entities or ():
        if isinstance(ent, dict):
            yield ent
            yield from _walk_entities(ent.get("entities", ()))


def _org_name(doc: Dict[str, Any]) -> Optional[str]:
    for ent in _walk_entities(doc.get("entities", ())):
        if "registrant" in (ent.get("roles") or ()):
            name = _vcard_value(ent, "org") or _vcard_value(ent, "fn")
            if name:
                return name
    # APNIC-style records describe the holder in remarks instead
    for remark in doc.get("remarks", ()) or ():
        if str(remark.get("title", "")).lower() == "description":
            desc = [d for d in remark.get("description", ()) if str(d).strip()]
            if desc:
                return str(desc[0]).strip()
    return None


def _subnet(doc: Dict[str, Any], ip: str) -> Optional[str]:
    addr = ipaddress.ip_address(ip)
    candidates: List[ipaddress._BaseNetwork] = []
    for c in doc.get("cidr0_cidrs", ()) or ():
        prefix = c.get("v4prefix") or c.get("v6prefix")
        if prefix is not None and "length" in c:
            candidates.append(ipaddress.ip_network(f"{prefix}/{c['length']}", strict=False))
    if not candidates and doc.get("startAddress") and doc.get("endAddress"):
        start = ipaddress.ip_address(doc["startAddress"])
        end = ipaddress.ip_address(doc["endAddress"])
        candidates.extend(ipaddress.summarize_address_range(start, end))
    for net in candidates:
        if addr.version == net.version and addr in net:
            return net.with_prefixlen
    return None


def parse_registration(doc: Dict[str, Any], ip: str) -> Dict[str, Any]:
    """Extract org name/country, covering prefix and origin AS from an RDAP
    ``ip network`` object. Missing pieces come back as ``None``."""
    asns = doc.get("arin_originas0_originautnums") or []
    country = doc.get("country")
    return {
        "host_org_name": _org_name(doc),
        "host_org_country": str(country).upper() if country else None,
        "admin_subnet": _subnet(doc, ip),
        "admin_asn": int(asns[0]) if asns else None,
    }


class RdapClient:
    """Minimal RDAP client for IP network objects.

    With ``base_url`` every lookup goes to ``<base_url>ip/<addr>``;
    otherwise the RIR is chosen from the IANA bootstrap registry. One HTTP
    redirect (the usual RDAP referral) is followed.
    """

    def __init__(
        self,
        base_url: Optional[str] = None,
        bootstrap_url: str = IANA_BOOTSTRAP,
        client: Optional[httpx.Client] = None,
        cache_dir: Optional[Path] = None,
        timeout: float = 10.0,
    ):
        self.base_url = base_url
        self.bootstrap_url = bootstrap_url.rstrip("/") + "/"
        self.client = client or httpx.Client(timeout=timeout, headers={"Accept": "application/rdap+json"})
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._services: Dict[int, List[tuple]] = {}

    def _bootstrap(self, version: int) -> List[tuple]:
        if version in self._services:
            return self._services[version]
        fname = f"ipv{version}.json"
        cached = self.cache_dir / "bootstrap" / fname if self.cache_dir else None
        if cached is not None and cached.exists():
            data = json.loads(cached.read_text())
        else:
            resp = self.client.get(self.bootstrap_url + fname)
            resp.raise_for_status()
            data = resp.json()
            if cached is not None:
                cached.parent.mkdir(parents=True, exist_ok=True)
                cached.write_text(json.dumps(data))
        services = []
        for prefixes, urls in data.get("services", ()):
            https = [u for u in urls if u.startswith("https")] or urls
            for p in prefixes:
                services.append((ipaddress.ip_network(p, strict=False), https[0]))
        # longest prefix first
        services.sort(key=lambda s: s[0].prefixlen, reverse=True)
        self._services[version] = services
        return services

    def base_for(self, ip: str) -> str:
        if self.base_url:
            return self.base_url
        addr = ipaddress.ip_address(ip)
        for net, url in self._bootstrap(addr.version):
            if addr in net:
                return url
        raise RegistrationError(f"no RDAP service covers {ip}")

    def lookup(self, ip: str) -> Dict[str, Any]:
        url = self.base_for(ip).rstrip("/") + f"/ip/{ip}"
        try:
            resp = self.client.get(url, follow_redirects=False)
            if resp.is_redirect and "location" in resp.headers:
                resp = self.client.get(resp.headers["location"], follow_redirects=False)
        except httpx.HTTPError as exc:
            raise RegistrationError(f"RDAP request failed: {exc}") from exc
        if resp.status_code != 200:
            raise RegistrationError(f"RDAP {url} returned HTTP {resp.status_code}")
        try:
            return resp.json()
        except ValueError as exc:
            raise RegistrationError(f"RDAP {url} returned non-JSON body") from exc
