"""JSON loading helpers that keep track of where each value sits in the file.

``json`` reports line/column for syntax errors but forgets positions once the
document is parsed. Schema problems found later (a bad cutoff, a missing
field) are much easier to fix when the message points at a line, so
:func:`load_json_with_positions` records the position of every value keyed by
its path from the document root.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

_decoder = json.JSONDecoder()
_WS = " \t\n\r"

PathKey = tuple[Any, ...]


class InputError(ValueError):
    """Malformed or invalid input file. Carries an optional ``line:col``."""

    def __init__(self, message: str, source: str | None = None,
                 line: int | None = None, col: int | None = None):
        self.source = source
        self.line = line
        self.col = col
        where = source or "<input>"
        if line is not None:
            where = f"{where}:{line}:{col}"
        super().__init__(f"{where}: {message}")


def _skip(text: str, i: int) -> int:
    while i < len(text) and text[i] in _WS:
        i += 1
    return i


def _walk(text: str, i: int, path: PathKey, out: dict[PathKey, int]) -> int:
    i = _skip(text, i)
    out[path] = i
    if i >= len(text):
        raise json.JSONDecodeError("Expecting value", text, i)
    ch = text[i]
    if ch == "{":
        i = _skip(text, i + 1)
        if text[i:i + 1] == "}":
            return i + 1
        while True:
            i = _skip(text, i)
            key, i = _decoder.raw_decode(text, i)
            i = _skip(text, i)
            if text[i:i + 1] != ":":
                raise json.JSONDecodeError("Expecting ':' delimiter", text, i)
            i = _walk(text, i + 1, path + (key,), out)
            i = _skip(text, i)
            if text[i:i + 1] == ",":
                i += 1
                continue
            if text[i:i + 1] == "}":
                return i + 1
            raise json.JSONDecodeError("Expecting ',' delimiter", text, i)
    if ch == "[":
        i = _skip(text, i + 1)
        if text[i:i + 1] == "]":
            return i + 1
        k = 0
        while True:
            i = _walk(text, i, path + (k,), out)
            k += 1
            i = _skip(text, i)
            if text[i:i + 1] == ",":
                i += 1
                continue
            if text[i:i + 1] == "]":
                return i + 1
            raise json.JSONDecodeError("Expecting ',' delimiter", text, i)
    _, end = _decoder.raw_decode(text, i)
    return end


class PositionedDocument:
    """A parsed JSON document plus a path -> (line, col) lookup."""

    def __init__(self, text: str, source: str | None = None):
        self.source = source
        self.text = text
        try:
            self.data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(exc.msg, source, exc.lineno, exc.colno) from None
        self._offsets: dict[PathKey, int] = {}
        _walk(text, 0, (), self._offsets)

    def position(self, path: PathKey) -> tuple[int, int] | None:
        # fall back to the closest recorded ancestor
        path = tuple(path)
        while path not in self._offsets and path:
            path = path[:-1]
        off = self._offsets.get(path)
        if off is None:
            return None
        line = self.text.count("\n", 0, off) + 1
        col = off - (self.text.rfind("\n", 0, off) + 1) + 1
        return line, col

    def error(self, path: PathKey, message: str) -> InputError:
        pos = self.position(path) or (None, None)
        dotted = ".".join(str(p) for p in path) or "<root>"
        return InputError(f"{dotted}: {message}", self.source, *pos)


def load_json_with_positions(path: str | Path) -> PositionedDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read file ({exc.strerror})", str(path)) from None
    return PositionedDocument(text, str(path))


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Load a JSON or TOML config file into a plain dict."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            with path.open("rb") as fh:
                return tomllib.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read file ({exc.strerror})", str(path)) from None
        except tomllib.TOMLDecodeError as exc:
            raise InputError(str(exc), str(path)) from None
    doc = load_json_with_positions(path)
    if not isinstance(doc.data, dict):
        raise doc.error((), "expected a JSON object")
    return doc.data


def dump_json(obj: Any) -> str:
    """Canonical JSON text used for every file this package writes."""
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
