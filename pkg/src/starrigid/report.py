"""The JSON analysis report.

Reports have a fixed top-level key order, no timestamps, and floats written
with Python's shortest round-trip representation, so equal inputs give
byte-identical documents and :meth:`AnalysisReport.from_json` is lossless.
Non-finite floats are stored as ``null``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .tolerances import Tolerances

SCHEMA_VERSION = 1
TOOL_NAME = "starrigid"


def plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-ready builtins."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def content_digest(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return "sha256:" + hashlib.sha256(data).hexdigest()


@dataclass
class AnalysisReport:
    command: str
    input: dict
    tolerances: dict
    results: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    exit_code: int = 0
    errors: list = field(default_factory=list)
    generator: dict | None = None
    version: str = ""

    _ORDER = ("schema_version", "tool", "command", "input", "generator", "tolerances",
              "results", "verdicts", "exit_code", "errors")

    @classmethod
    def new(cls, command: str, input: dict, tol: Tolerances, **kw) -> "AnalysisReport":
        from . import __version__

        return cls(command, input, tol.as_dict(), version=__version__, **kw)

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "tool": {"name": TOOL_NAME, "version": self.version},
            "command": self.command,
            "input": self.input,
            "generator": self.generator,
            "tolerances": self.tolerances,
            "results": self.results,
            "verdicts": self.verdicts,
            "exit_code": int(self.exit_code),
            "errors": self.errors,
        }
        return plain(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {d.get('schema_version')!r}")
        return cls(d["command"], d["input"], d["tolerances"], d["results"], d["verdicts"],
                   d["exit_code"], d["errors"], d["generator"], d["tool"]["version"])

    @classmethod
    def from_json(cls, text: str) -> "AnalysisReport":
        return cls.from_dict(json.loads(text))

    @property
    def tolerance_config(self) -> Tolerances:
        return Tolerances(**self.tolerances)


_NUM = {"type": ["number", "null"]}
_MATRIX = {
    "type": "object",
    "required": ["labels", "entries", "eigenvalues", "signature", "symmetry_defect", "positive_definite"],
    "properties": {
        "entries": {"type": "array", "items": {"type": "array", "items": _NUM}},
        "eigenvalues": {"type": "array", "items": _NUM},
        "signature": {"type": "array", "items": {"type": "integer"}, "minItems": 3, "maxItems": 3},
        "symmetry_defect": _NUM,
        "positive_definite": {"type": "boolean"},
    },
}


def report_schema() -> dict:
    """JSON Schema (draft 2020-12) for :class:`AnalysisReport` documents."""
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "starrigid analysis report",
        "type": "object",
        "required": list(AnalysisReport._ORDER),
        "additionalProperties": False,
        "$defs": {"curvature_matrix": _MATRIX},
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "tool": {"type": "object", "required": ["name", "version"],
                     "properties": {"name": {"const": TOOL_NAME}, "version": {"type": "string"}}},
            "command": {"enum": ["analyze", "hat"]},
            "input": {
                "type": "object",
                "required": ["kind", "source", "digest"],
                "properties": {
                    "kind": {"enum": ["file", "generator"]},
                    "source": {"type": "string"},
                    "format": {"type": ["string", "null"]},
                    "seed": {"type": ["integer", "null"]},
                    "digest": {"type": "string", "pattern": "^sha256:[0-9a-f]{64}$"},
                },
            },
            "generator": {"type": ["object", "null"]},
            "tolerances": {
                "type": "object",
                "required": list(Tolerances().as_dict()),
                "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
            },
            "results": {
                "type": "object",
                "properties": {
                    "stars": {"type": "array", "items": {
                        "type": "object", "required": ["apex", "star_shaped"],
                        "properties": {"apex": {"type": "integer"}, "star_shaped": {"type": "boolean"},
                                       "lambda_P": {"$ref": "#/$defs/curvature_matrix"}}}},
                    "hat": {"type": "object", "properties": {"lambda_H": {"$ref": "#/$defs/curvature_matrix"}}},
                },
            },
            "verdicts": {"type": "object"},
            "exit_code": {"enum": [0, 1, 2, 3]},
            "errors": {"type": "array", "items": {"type": "object", "required": ["type", "message"]}},
        },
    }


__all__ = ["AnalysisReport", "SCHEMA_VERSION", "content_digest", "plain", "report_schema"]
