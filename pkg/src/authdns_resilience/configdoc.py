"""YAML config documents validated against their node tree, so every error
carries the file and line it came from."""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml
from yaml.constructor import SafeConstructor


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: Optional[int] = None):
        self.message = message
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class Document:
    """A composed YAML document plus helpers that fail with line numbers."""

    def __init__(self, text: str, source: str = "<config>"):
        self.source = source
        self.text = text
        self.digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        try:
            self.root = yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", source,
                              mark.line + 1 if mark else None) from None
        if self.root is None:
            raise ConfigError("document is empty", source)
        self._ctor = SafeConstructor()

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Document":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read: {exc.strerror}", str(path)) from None
        return cls(text, str(path))

    def fail(self, node, message: str):
        line = node.start_mark.line + 1 if node is not None else None
        raise ConfigError(message, self.source, line)

    def mapping(self, node, what: str) -> Dict[str, Tuple[Any, Any]]:
        """``{key: (key_node, value_node)}``; rejects duplicate keys."""
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, f"{what} must be a mapping")
        out: Dict[str, Tuple[Any, Any]] = {}
        for k, v in node.value:
            key = self.scalar(k, f"key in {what}")
            if not isinstance(key, str):
                key = str(key)
            if key in out:
                self.fail(k, f"duplicate key {key!r} in {what}")
            out[key] = (k, v)
        return out

    def sequence(self, node, what: str):
        if not isinstance(node, yaml.SequenceNode):
            self.fail(node, f"{what} must be a list")
        return list(node.value)

    def scalar(self, node, what: str):
        if not isinstance(node, yaml.ScalarNode):
            self.fail(node, f"{what} must be a scalar")
        return self._ctor.construct_object(node)

    def integer(self, node, what: str) -> int:
        value = self.scalar(node, what)
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(node, f"{what} must be an integer, got {value!r}")
        return value

    def number(self, node, what: str) -> float:
        value = self.scalar(node, what)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(node, f"{what} must be a number, got {value!r}")
        return float(value)

    def string(self, node, what: str) -> str:
        value = self.scalar(node, what)
        if not isinstance(value, str):
            self.fail(node, f"{what} must be a string, got {value!r}")
        return value

    def require(self, fields: Dict[str, Tuple[Any, Any]], key: str, parent, what: str):
        if key not in fields:
            self.fail(parent, f"{what} is missing {key!r}")
        return fields[key][1]
