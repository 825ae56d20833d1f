"""Lossless JSON encoding of FoamDict trees for database storage."""

from __future__ import annotations

from typing import Any

from .values import (
    DimensionVector,
    Dimensioned,
    Directive,
    FoamDict,
    FoamList,
    FoamSeq,
    FoamValue,
    KeywordEntry,
    NonuniformField,
    QuotedString,
    UniformField,
)


def to_json(value: FoamValue) -> Any:
    if value is None or isinstance(value, bool):
        return {"_": "null"} if value is None else value
    if isinstance(value, QuotedString):
        return {"_": "quoted", "s": str(value)}
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        return value
    if isinstance(value, DimensionVector):
        return {"_": "dims", "e": list(value.exponents)}
    if isinstance(value, Dimensioned):
        return {
            "_": "dimensioned",
            "name": value.name,
            "e": list(value.dimensions.exponents),
            "v": list(value.value) if isinstance(value.value, tuple) else value.value,
            "vec": isinstance(value.value, tuple),
        }
    if isinstance(value, UniformField):
        return {
            "_": "uniform",
            "v": list(value.value) if isinstance(value.value, tuple) else value.value,
            "vec": isinstance(value.value, tuple),
        }
    if isinstance(value, NonuniformField):
        return {"_": "nonuniform", "type": value.list_type, "n": value.count, "span": value.span}
    if isinstance(value, Directive):
        return {"_": "directive", "name": value.name, "arg": value.argument}
    if isinstance(value, KeywordEntry):
        return {"_": "entry", "k": _key_json(value.keyword), "v": to_json(value.value)}
    if isinstance(value, FoamList):
        return {"_": "list", "n": value.count, "items": [to_json(v) for v in value.items]}
    if isinstance(value, FoamSeq):
        return {"_": "seq", "items": [to_json(v) for v in value.items]}
    if isinstance(value, FoamDict):
        return {
            "_": "dict",
            "entries": [[_key_json(k), to_json(v)] for k, v in value.entries],
        }
    raise TypeError(f"cannot encode {type(value).__name__}")


def _key_json(key) -> Any:
    if key is None:
        return None
    if isinstance(key, QuotedString):
        return {"_": "quoted", "s": str(key)}
    return key


def _key_from_json(obj: Any):
    if obj is None:
        return None
    if isinstance(obj, dict):
        return QuotedString(obj["s"])
    return obj


def from_json(obj: Any) -> FoamValue:
    if isinstance(obj, bool) or isinstance(obj, (int, float)):
        return obj
    if isinstance(obj, str):
        return obj
    if not isinstance(obj, dict):
        raise ValueError(f"unexpected JSON node {obj!r}")
    tag = obj.get("_")
    if tag == "null":
        return None
    if tag == "quoted":
        return QuotedString(obj["s"])
    if tag == "dims":
        return DimensionVector(tuple(obj["e"]))
    if tag == "dimensioned":
        v = tuple(obj["v"]) if obj.get("vec") else obj["v"]
        return Dimensioned(DimensionVector(tuple(obj["e"])), v, name=obj.get("name"))
    if tag == "uniform":
        v = tuple(obj["v"]) if obj.get("vec") else obj["v"]
        return UniformField(v)
    if tag == "nonuniform":
        return NonuniformField(obj.get("type"), obj["n"], obj["span"])
    if tag == "directive":
        return Directive(obj["name"], obj["arg"])
    if tag == "entry":
        return KeywordEntry(_key_from_json(obj["k"]), from_json(obj["v"]))
    if tag == "list":
        return FoamList(tuple(from_json(v) for v in obj["items"]), count=obj.get("n"))
    if tag == "seq":
        return FoamSeq(tuple(from_json(v) for v in obj["items"]))
    if tag == "dict":
        return FoamDict([(_key_from_json(k), from_json(v)) for k, v in obj["entries"]])
    raise ValueError(f"unknown node tag {tag!r}")
