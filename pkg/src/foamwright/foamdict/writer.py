"""Canonical serializer for FoamDict trees.

Output is single-space-normalized and always re-parses to an equal tree;
byte identity with upstream files is not a goal.
"""

from __future__ import annotations

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

_INDENT = "    "
_KEY_WIDTH = 15


def _number(value: float) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _scalar_or_vector(value) -> str:
    if isinstance(value, tuple):
        return "(" + " ".join(_number(v) for v in value) + ")"
    if isinstance(value, (int, float)):
        return _number(value)
    return str(value)


def _inline(value: FoamValue) -> str:
    if value is None:
        return ""
    if isinstance(value, QuotedString):
        return f'"{str(value)}"'
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return _number(value)
    if isinstance(value, str):
        return value
    if isinstance(value, DimensionVector):
        return str(value)
    if isinstance(value, Dimensioned):
        parts = [] if value.name is None else [value.name]
        parts.append(str(value.dimensions))
        parts.append(_scalar_or_vector(value.value))
        return " ".join(parts)
    if isinstance(value, UniformField):
        return "uniform " + _scalar_or_vector(value.value)
    if isinstance(value, NonuniformField):
        parts = ["nonuniform"]
        if value.list_type:
            parts.append(value.list_type)
        parts.append(f"{value.count}{value.span}")
        return " ".join(parts)
    if isinstance(value, FoamSeq):
        return " ".join(_inline(item) for item in value.items)
    if isinstance(value, FoamList):
        prefix = "" if value.count is None else str(value.count)
        return prefix + "(" + " ".join(_inline(item) for item in value.items) + ")"
    raise TypeError(f"cannot inline {type(value).__name__}")


def _is_block(value: FoamValue) -> bool:
    if isinstance(value, FoamDict):
        return True
    if isinstance(value, FoamList):
        return any(isinstance(item, (FoamDict, KeywordEntry)) for item in value.items) or (
            len(value.items) > 12
        )
    return False


def _block_lines(value: FoamValue, indent: int, out: list) -> None:
    pad = _INDENT * indent
    if isinstance(value, FoamDict):
        out.append(pad + "{")
        _entry_lines(value, indent + 1, out)
        out.append(pad + "}")
        return
    if isinstance(value, FoamList):
        if value.count is not None:
            out.append(pad + str(value.count))
        out.append(pad + "(")
        for item in value.items:
            if isinstance(item, KeywordEntry):
                out.append(pad + _INDENT + item.keyword)
                _block_lines(item.value, indent + 1, out)
            elif _is_block(item):
                _block_lines(item, indent + 1, out)
            else:
                out.append(pad + _INDENT + _inline(item))
        out.append(pad + ")")
        return
    raise TypeError(f"cannot render block {type(value).__name__}")


def _entry_lines(tree: FoamDict, indent: int, out: list) -> None:
    pad = _INDENT * indent
    for key, value in tree.entries:
        if key is None:
            if isinstance(value, Directive):
                arg = f" {value.argument}" if value.argument else ""
                out.append(pad + value.name + arg)
            else:
                _block_lines(value, indent, out)
            continue
        rendered_key = f'"{str(key)}"' if isinstance(key, QuotedString) else key
        if isinstance(value, FoamDict):
            out.append(pad + rendered_key)
            _block_lines(value, indent, out)
            continue
        if _is_block(value):
            out.append(pad + rendered_key)
            _block_lines(value, indent, out)
            out[-1] += ";"
            continue
        body = _inline(value)
        if body:
            out.append(pad + rendered_key.ljust(_KEY_WIDTH) + " " + body + ";")
        else:
            out.append(pad + rendered_key + ";")


def serialize_dictionary(tree: FoamDict) -> str:
    """Render a FoamDict back to dictionary text."""
    out: list = []
    _entry_lines(tree, 0, out)
    return "\n".join(out) + "\n"


def serialize_value(value: FoamValue) -> str:
    """Render a single value (no trailing ';')."""
    if _is_block(value):
        out: list = []
        _block_lines(value, 0, out)
        return "\n".join(out)
    return _inline(value)
