"""DNS probe results and the zone-style text format used to record them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import dns.name
import dns.rdata
import dns.rdataclass
import dns.rdatatype

# nodata = NOERROR with an empty answer section
OUTCOMES = ("answer", "nodata", "nxdomain", "refused", "timeout", "servfail")


@dataclass(frozen=True)
class ProbeResult:
    qname: str
    rrtype: str
    server: Optional[str]
    outcome: str
    records: Tuple[str, ...] = ()
    rtt_ms: float = 0.0

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown probe outcome {self.outcome!r}")
        object.__setattr__(self, "records", tuple(self.records))
        if self.outcome == "answer" and not self.records:
            raise ValueError(f"{self.qname}/{self.rrtype}: answer outcome without records")

    @property
    def answered(self) -> bool:
        return self.outcome == "answer"

    def rdatas(self, rrtype: Optional[str] = None) -> List["ParsedRR"]:
        parsed = [parse_rr(text) for text in self.records]
        if rrtype is None:
            return parsed
        return [rr for rr in parsed if rr.rrtype == rrtype]


@dataclass(frozen=True)
class ParsedRR:
    owner: str
    ttl: int
    rrtype: str
    rdata: dns.rdata.Rdata
    text: str


def parse_rr(text: str) -> ParsedRR:
    """Parse one master-file style line: ``owner [ttl] [class] type rdata``."""
    tokens = text.split()
    if len(tokens) < 3:
        raise ValueError(f"not a resource record: {text!r}")
    owner = tokens[0]
    pos = 1
    ttl = 0
    rdclass = dns.rdataclass.IN
    # TTL and class may come in either order
    for _ in range(2):
        tok = tokens[pos]
        if tok.isdigit():
            ttl = int(tok)
            pos += 1
        elif tok.upper() in ("IN", "CH", "HS", "CS"):
            rdclass = dns.rdataclass.from_text(tok.upper())
            pos += 1
    rrtype = tokens[pos].upper()
    rdata_text = " ".join(tokens[pos + 1:])
    rdata = dns.rdata.from_text(rdclass, dns.rdatatype.from_text(rrtype), rdata_text, origin=dns.name.root)
    return ParsedRR(owner.lower().rstrip(".") or ".", ttl, rrtype, rdata, text)


def render_probe(result: ProbeResult) -> str:
    lines = [
        f";; query: {result.qname} {result.rrtype} {result.server or '-'}",
        f";; outcome: {result.outcome}",
        f";; rtt_ms: {result.rtt_ms!r}",
    ]
    lines.extend(result.records)
    return "\n".join(lines) + "\n"


def parse_probe(text: str, qname: str, rrtype: str, server: Optional[str]) -> ProbeResult:
    outcome = None
    rtt = 0.0
    records = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith(";;"):
            key, _, value = line[2:].partition(":")
            key = key.strip().lower()
            if key == "outcome":
                outcome = value.strip()
            elif key == "rtt_ms":
                rtt = float(value)
            continue
        if line.startswith(";"):
            continue
        records.append(" ".join(line.split()))
    if outcome is None:
        outcome = "answer" if records else "nodata"
    return ProbeResult(qname, rrtype, server, outcome, tuple(records), rtt)
