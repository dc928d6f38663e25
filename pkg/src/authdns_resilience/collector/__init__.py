"""Data collection from DNS, registration data and IP intelligence."""

from .backends import (
    BackendConfig,
    FixtureReplayBackend,
    LiveBackend,
    RecordingBackend,
    SourceBackend,
    SourceError,
    make_backend,
)
from .core import (
    CollectionError,
    CollectSettings,
    Collector,
    DomainUnreachable,
    PerTargetLimiter,
    axfr_status_from_probe,
    collect,
    probe_axfr,
    validate_domain,
)
from .probes import ProbeResult, parse_rr

__all__ = [
    "BackendConfig",
    "CollectSettings",
    "CollectionError",
    "Collector",
    "DomainUnreachable",
    "FixtureReplayBackend",
    "LiveBackend",
    "PerTargetLimiter",
    "ProbeResult",
    "RecordingBackend",
    "SourceBackend",
    "SourceError",
    "axfr_status_from_probe",
    "collect",
    "make_backend",
    "parse_rr",
    "probe_axfr",
    "validate_domain",
]
