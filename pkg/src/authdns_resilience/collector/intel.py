"""IP operational intelligence (anycast flag, serving country)."""

from __future__ import annotations

import os
from typing import Any, Dict, Mapping, Optional

import httpx

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off", ""}


class IntelligenceError(RuntimeError):
    pass


def parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def normalize(raw: Mapping[str, Any]) -> Dict[str, Any]:
    """Coerce a provider answer into ``{"anycast": bool|None, "country": str|None}``."""
    anycast = raw.get("anycast")
    country = raw.get("country")
    return {
        "anycast": None if anycast is None else parse_bool(anycast),
        "country": str(country).strip().upper() or None if country else None,
    }


def parse_kv(text: str) -> Dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"bad key-value line: {line!r}")
        out[key.strip()] = value.strip()
    return out


def render_kv(data: Mapping[str, Any]) -> str:
    lines = []
    for key in sorted(data):
        value = data[key]
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def _dig(doc: Any, path: str) -> Any:
    for part in path.split("."):
        if not isinstance(doc, Mapping) or part not in doc:
            return None
        doc = doc[part]
    return doc


class HttpIntelProvider:
    """Generic JSON-over-HTTP provider.

    ``url_template`` is formatted with ``ip`` and ``token``; ``mapping``
    maps our field names onto dotted paths of the provider's JSON answer,
    e.g. ``{"anycast": "anycast", "country": "country"}`` for ipinfo.
    ``defaults`` fill fields a provider omits (ipinfo leaves out
    ``anycast`` for unicast addresses).
    """

    def __init__(
        self,
        url_template: str,
        mapping: Optional[Mapping[str, str]] = None,
        defaults: Optional[Mapping[str, Any]] = None,
        token_env: Optional[str] = None,
        headers: Optional[Mapping[str, str]] = None,
        client: Optional[httpx.Client] = None,
        timeout: float = 10.0,
    ):
        self.url_template = url_template
        self.mapping = dict(mapping or {"anycast": "anycast", "country": "country"})
        self.defaults = dict(defaults or {"anycast": False})
        self.token = os.environ.get(token_env, "") if token_env else ""
        self.client = client or httpx.Client(timeout=timeout, headers=dict(headers or {}))

    def lookup(self, ip: str) -> Dict[str, Any]:
        url = self.url_template.format(ip=ip, token=self.token)
        try:
            resp = self.client.get(url)
        except httpx.HTTPError as exc:
            raise IntelligenceError(f"intelligence request failed: {exc}") from exc
        if resp.status_code != 200:
            raise IntelligenceError(f"intelligence provider returned HTTP {resp.status_code}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise IntelligenceError("intelligence provider returned non-JSON body") from exc
        raw = {}
        for key, path in self.mapping.items():
            value = _dig(body, path)
            raw[key] = self.defaults.get(key) if value is None else value
        return normalize(raw)
