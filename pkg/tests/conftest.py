from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest

from authdns_resilience.schema import (
    AuthoritativeFunction,
    AuthoritativeNameServer,
    DnssecKeyRecord,
    DomainRecord,
    HostingInstance,
    PrimaryFunction,
)

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
REPLAY = FIXTURES / "replay"
sys.path.insert(0, str(TESTS))  # for the oracle module

TS = datetime(2025, 11, 3, 1, 0, tzinfo=timezone.utc)


def inst(ip, org="Telstra Corporation Ltd", country="AU", subnet=None, asn=64500, anycast=False,
         geo="AU", axfr="not-probed", dnssec=(), responsive=True, gaps=None):
    if subnet is None:
        subnet = ip + ("/128" if ":" in ip else "/32")
    return HostingInstance(
        ip=ip, host_org_name=org, host_org_country=country, admin_subnet=subnet, admin_asn=asn,
        anycast=anycast, geolocation_country=geo, axfr_status=axfr,
        dnssec_records=tuple(DnssecKeyRecord("DNSKEY", a) for a in dnssec),
        responsive=responsive, gaps=gaps or {},
    )


def make_record(primary, servers, name="example.gov.au", mname="ns1.example.gov.au", country="AU",
                vantage="AU", flags=()):
    """servers: {fqdn: [HostingInstance, ...]}"""
    return DomainRecord(
        domain_name=name,
        collected_at=TS,
        primary=PrimaryFunction(mname, tuple(primary)),
        authoritative=AuthoritativeFunction(
            tuple(AuthoritativeNameServer(f, tuple(i)) for f, i in servers.items())
        ),
        country_context=country,
        vantage_country=vantage,
        flags=flags,
    )


@pytest.fixture
def replay_dir():
    return REPLAY


@pytest.fixture
def fixture_config(tmp_path):
    from authdns_resilience.config import RunConfig

    return RunConfig.load(FIXTURES / "config.yaml", environ={})
