"""Closed, versioned schemas for structured judge and agent outputs."""

import json
import re
from dataclasses import dataclass, field

from .errors import JudgeFormatError, SchemaViolation

_TYPES = {
    "str": str,
    "list[str]": list,
    "bool": bool,
}


@dataclass(frozen=True)
class SchemaDescriptor:
    """A closed record schema.

    ``shape`` is ``"object"`` for a single record, ``"array"`` for a list of
    records and ``"string-array"`` for a plain list of strings (no fields).
    """

    name: str
    version: str
    fields: dict = field(default_factory=dict)
    optional: dict = field(default_factory=dict)
    shape: str = "object"

    def validate(self, value, path=None):
        path = path or self.name
        if self.shape == "string-array":
            if not isinstance(value, list):
                raise SchemaViolation(path, "expected an array")
            for i, v in enumerate(value):
                if not isinstance(v, str):
                    raise SchemaViolation(f"{path}[{i}]", "expected a string")
            return value
        if self.shape == "array":
            if not isinstance(value, list):
                raise SchemaViolation(path, "expected an array")
            return [self._record(v, f"{path}[{i}]") for i, v in enumerate(value)]
        return self._record(value, path)

    def _record(self, value, path):
        if not isinstance(value, dict):
            raise SchemaViolation(path, "expected an object")

        def at(name):
            return name if path == self.name else f"{path}.{name}"

        for name in value:
            if name not in self.fields and name not in self.optional:
                raise SchemaViolation(at(name), "unknown field")
        for name, kind in self.fields.items():
            if name not in value:
                raise SchemaViolation(at(name), "missing required field")
            _check_type(value[name], kind, at(name))
        for name, kind in self.optional.items():
            if name in value:
                _check_type(value[name], kind, at(name))
        return dict(value)


def _check_type(value, kind, path):
    if not isinstance(value, _TYPES[kind]):
        raise SchemaViolation(path, f"expected {kind}")
    if kind == "list[str]":
        for i, v in enumerate(value):
            if not isinstance(v, str):
                raise SchemaViolation(f"{path}[{i}]", "expected a string")


CLAIMS_SCHEMA = SchemaDescriptor(
    "claims", "v1", {"claim": "str", "context": "str", "source": "str"}, shape="array"
)
ATOMIC_FACTS_SCHEMA = SchemaDescriptor("atomic_facts", "v1", shape="string-array")
ANSWER_SCHEMA = SchemaDescriptor(
    "answer", "v1", {"answer": "str", "supporting_context": "str"}, {"question": "str"}
)
REASONING_SCHEMA = SchemaDescriptor(
    "reasoning",
    "v1",
    {
        "established_facts": "list[str]",
        "open_questions": "list[str]",
        "next_search_directions": "list[str]",
        "contradictions_or_uncertainties": "list[str]",
    },
)

_FENCE = re.compile(r"^\s*```[A-Za-z0-9_-]*\s*\n?(.*?)\n?\s*```\s*$", re.DOTALL)
_TRAILING_COMMA = re.compile(r",(\s*[\]}])")


def _repair(raw):
    text = raw.strip()
    m = _FENCE.match(text)
    if m:
        text = m.group(1)
    starts = [i for i in (text.find("["), text.find("{")) if i >= 0]
    if starts:
        start = min(starts)
        close = "]" if text[start] == "[" else "}"
        end = text.rfind(close)
        if end > start:
            text = text[start:end + 1]
    return _TRAILING_COMMA.sub(r"\1", text)


def _element_offsets(text, base):
    """Offsets of the top-level elements of a JSON array held in ``text``."""
    dec = json.JSONDecoder()
    i = text.find("[") + 1
    offsets = []
    while i < len(text):
        while i < len(text) and text[i] in " \t\r\n,":
            i += 1
        if i >= len(text) or text[i] == "]":
            break
        offsets.append(base + i)
        _, i = dec.raw_decode(text, i)
    return offsets


def parse_structured(raw, schema):
    """Parse a judge payload against ``schema``.

    Strict ``json.loads`` first; on failure a single repair pass strips code
    fences and surrounding prose and drops trailing commas. Anything still
    invalid raises ``JudgeFormatError`` with the offset into ``raw`` of the
    first violation.
    """
    text, base = raw, 0
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        text = _repair(raw)
        base = max(raw.find(text[:1]), 0) if text else 0
        try:
            value = json.loads(text)
        except json.JSONDecodeError as exc:
            raise JudgeFormatError(f"invalid JSON: {exc.msg}", raw, base + exc.pos) from exc
    try:
        return schema.validate(value)
    except SchemaViolation as exc:
        offset = base + (len(text) - len(text.lstrip()))
        if isinstance(value, list) and value:
            m = re.match(r"^[^\[]*\[(\d+)\]", str(exc.path))
            idx = int(m.group(1)) if m else None
            offs = _element_offsets(text, base)
            if idx is not None and idx < len(offs):
                offset = offs[idx]
        raise JudgeFormatError(f"schema {schema.name}: {exc}", raw, offset) from exc


def dumps(value):
    return json.dumps(value, ensure_ascii=False, indent=2)
