"""Run configuration: a YAML file plus ``AUTHDNS_*`` environment overrides.

Example::

    country_context: AU
    vantage_country: AU
    backend:
      kind: fixture-replay        # or live
      fixtures_dir: fixtures      # relative paths resolve against this file
      cache_dir: cache
    catalog: catalog_au.json      # defaults: the bundled sample files
    criteria: criteria.yaml
    plan: aggregation_plan.yaml
    overall_mode: phase           # or flat
    workers: 4
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import yaml

from .aggregation import AggregationPlan
from .attributes import (
    AttributeContext,
    EnterpriseCatalog,
    ManagedDnsList,
    load_recommended_algorithms,
    sample_data_path,
)
from .collector import BackendConfig
from .configdoc import ConfigError
from .scoring import ScoringCriteria

DEFAULT_FILES = {
    "catalog": "catalog_au.json",
    "managed_dns": "managed_dns.json",
    "dnssec_algorithms": "dnssec_algorithms.json",
    "criteria": "criteria.yaml",
    "plan": "aggregation_plan.yaml",
}

# environment variable -> (section, key); section None means top level
ENV_OVERRIDES = {
    "AUTHDNS_COUNTRY_CONTEXT": (None, "country_context"),
    "AUTHDNS_VANTAGE_COUNTRY": (None, "vantage_country"),
    "AUTHDNS_CATALOG": (None, "catalog"),
    "AUTHDNS_MANAGED_DNS": (None, "managed_dns"),
    "AUTHDNS_DNSSEC_ALGORITHMS": (None, "dnssec_algorithms"),
    "AUTHDNS_CRITERIA": (None, "criteria"),
    "AUTHDNS_PLAN": (None, "plan"),
    "AUTHDNS_OVERALL_MODE": (None, "overall_mode"),
    "AUTHDNS_WORKERS": (None, "workers"),
    "AUTHDNS_BACKEND": ("backend", "kind"),
    "AUTHDNS_FIXTURES_DIR": ("backend", "fixtures_dir"),
    "AUTHDNS_CACHE_DIR": ("backend", "cache_dir"),
    "AUTHDNS_RDAP_URL": ("backend", "rdap_base_url"),
}

TOP_KEYS = {"country_context", "vantage_country", "backend", "overall_mode", "workers"} | set(DEFAULT_FILES)
BACKEND_KEYS = {"kind", "fixtures_dir", "cache_dir", "resolvers", "dns_port", "dns_timeout", "rdap_base_url", "intel"}


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunConfig:
    country_context: str
    vantage_country: Optional[str] = None
    backend: BackendConfig = field(default_factory=BackendConfig)
    files: Dict[str, Path] = field(default_factory=dict)
    overall_mode: str = "phase"
    workers: int = 4
    source: str = "<defaults>"

    def path(self, name: str) -> Path:
        return self.files.get(name) or sample_data_path(DEFAULT_FILES[name])

    def context(self) -> AttributeContext:
        catalog = EnterpriseCatalog.load(self.path("catalog"))
        if catalog.country_context != self.country_context:
            raise ConfigError(
                f"catalog is for {catalog.country_context} but the run assesses {self.country_context}", self.source
            )
        return AttributeContext(
            catalog,
            ManagedDnsList.load(self.path("managed_dns")),
            load_recommended_algorithms(self.path("dnssec_algorithms")),
        )

    def criteria(self) -> ScoringCriteria:
        return ScoringCriteria.load(self.path("criteria"))

    def plan(self) -> AggregationPlan:
        return AggregationPlan.load(self.path("plan"))

    def digests(self) -> Dict[str, str]:
        return {name: file_digest(self.path(name)) for name in DEFAULT_FILES}

    @classmethod
    def from_mapping(
        cls, doc: Mapping[str, Any], base_dir: Path = Path("."), source: str = "<config>",
        environ: Optional[Mapping[str, str]] = None,
    ) -> "RunConfig":
        doc = dict(doc or {})
        doc["backend"] = dict(doc.get("backend") or {})
        env = os.environ if environ is None else environ
        for var, (section, key) in ENV_OVERRIDES.items():
            if env.get(var):
                (doc[section] if section else doc)[key] = env[var]

        unknown = set(doc) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}", source)
        unknown = set(doc["backend"]) - BACKEND_KEYS
        if unknown:
            raise ConfigError(f"unknown backend keys: {', '.join(sorted(unknown))}", source)

        country = doc.get("country_context")
        if not country or len(str(country)) != 2:
            raise ConfigError("country_context must be a two-letter country code", source)

        def resolve(value) -> Optional[Path]:
            if value in (None, ""):
                return None
            p = Path(os.path.expanduser(str(value)))
            return p if p.is_absolute() else (base_dir / p)

        b = doc["backend"]
        resolvers = b.get("resolvers") or ()
        if isinstance(resolvers, str):
            resolvers = [r.strip() for r in resolvers.split(",") if r.strip()]
        backend = BackendConfig(
            kind=b.get("kind", "fixture-replay"),
            fixtures_dir=resolve(b.get("fixtures_dir")),
            cache_dir=resolve(b.get("cache_dir")),
            resolvers=tuple(resolvers),
            dns_port=int(b.get("dns_port", 53)),
            dns_timeout=float(b.get("dns_timeout", 3.0)),
            rdap_base_url=b.get("rdap_base_url"),
            intel=dict(b.get("intel") or {}),
        )
        if backend.kind not in ("live", "fixture-replay"):
            raise ConfigError(f"unknown backend kind {backend.kind!r}", source)

        files = {name: resolve(doc.get(name)) for name in DEFAULT_FILES if doc.get(name)}
        for name, p in files.items():
            if not p.is_file():
                raise ConfigError(f"{name} file not found: {p}", source)
        mode = doc.get("overall_mode", "phase")
        if mode not in ("phase", "flat"):
            raise ConfigError(f"overall_mode must be phase or flat, got {mode!r}", source)
        try:
            workers = int(doc.get("workers", 4))
        except (TypeError, ValueError):
            raise ConfigError(f"workers must be an integer, got {doc.get('workers')!r}", source) from None
        if workers < 1:
            raise ConfigError("workers must be >= 1", source)
        vantage = doc.get("vantage_country")
        return cls(
            country_context=str(country).upper(),
            vantage_country=str(vantage).upper() if vantage else None,
            backend=backend,
            files=files,
            overall_mode=mode,
            workers=workers,
            source=source,
        )

    @classmethod
    def load(cls, path: Optional[Path] = None, environ: Optional[Mapping[str, str]] = None) -> "RunConfig":
        if path is None:
            return cls.from_mapping({}, Path.cwd(), "<defaults>", environ)
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read: {exc.strerror}", str(path)) from None
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", str(path),
                              mark.line + 1 if mark else None) from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a mapping", str(path))
        return cls.from_mapping(doc, path.parent, str(path), environ)
