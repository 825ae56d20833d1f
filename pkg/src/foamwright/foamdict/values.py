"""Value tree for the OpenFOAM dictionary format.

A parsed file is a FoamDict whose entries are (keyword, value) pairs in
source order.  Directive entries (``#include`` and friends) and standalone
data blocks carry a ``None`` keyword; keyword uniqueness is enforced over
named entries only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple, Union

#: SI exponent order used by OpenFOAM dimension sets.
DIMENSION_NAMES = ("mass", "length", "time", "temperature", "moles", "current", "luminous")

KNOWN_CLASSES = frozenset(
    {
        "dictionary",
        "volScalarField",
        "volVectorField",
        "volSphericalTensorField",
        "volSymmTensorField",
        "volTensorField",
        "surfaceScalarField",
        "surfaceVectorField",
        "pointScalarField",
        "pointVectorField",
        "polyBoundaryMesh",
        "uniformDimensionedScalarField",
        "uniformDimensionedVectorField",
        "faceList",
        "labelList",
        "vectorField",
        "regIOobject",
    }
)


@dataclass(frozen=True)
class DimensionVector:
    """Seven signed integer SI exponents in OpenFOAM order."""

    exponents: Tuple[int, int, int, int, int, int, int]

    def __post_init__(self) -> None:
        if len(self.exponents) != 7:
            raise ValueError(f"dimension set needs 7 exponents, got {len(self.exponents)}")
        if not all(isinstance(e, int) for e in self.exponents):
            raise ValueError(f"dimension exponents must be integers: {self.exponents!r}")

    @classmethod
    def of(cls, *exponents: int) -> "DimensionVector":
        return cls(tuple(exponents))  # type: ignore[arg-type]

    @classmethod
    def dimensionless(cls) -> "DimensionVector":
        return cls((0, 0, 0, 0, 0, 0, 0))

    @property
    def is_dimensionless(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def __str__(self) -> str:
        return "[" + " ".join(str(e) for e in self.exponents) + "]"


class QuotedString(str):
    """A token that was written with surrounding double quotes."""

    __slots__ = ()


@dataclass(frozen=True)
class Dimensioned:
    """A dimensioned quantity, e.g. ``nu [0 2 -1 0 0 0 0] 1e-05``."""

    dimensions: DimensionVector
    value: Union[int, float, Tuple[float, ...]]
    name: Optional[str] = None


@dataclass(frozen=True)
class UniformField:
    """A ``uniform`` field literal; value is a scalar or a component tuple."""

    value: Union[int, float, Tuple[float, ...]]


@dataclass(frozen=True)
class NonuniformField:
    """A ``nonuniform`` literal kept as an opaque token span.

    Only the entry count is interpreted; the span is reproduced verbatim on
    serialization.
    """

    list_type: Optional[str]
    count: int
    span: str


@dataclass(frozen=True)
class Directive:
    """An unsupported ``#...`` directive preserved opaquely."""

    name: str
    argument: str


@dataclass(frozen=True)
class KeywordEntry:
    """A named sub-dictionary appearing inside a list (polyMesh boundary style)."""

    keyword: str
    value: "FoamValue"


@dataclass(frozen=True)
class FoamList:
    """A parenthesized list; an optional leading count is preserved."""

    items: Tuple["FoamValue", ...]
    count: Optional[int] = None


@dataclass(frozen=True)
class FoamSeq:
    """A bare multi-token value, e.g. ``Gauss linearUpwind grad(U)``."""

    items: Tuple["FoamValue", ...]


class FoamDict:
    """Ordered (keyword, value) entries with unique non-None keywords."""

    __slots__ = ("_entries", "_index")

    def __init__(self, entries: Sequence[Tuple[Optional[str], "FoamValue"]] = ()) -> None:
        self._entries: Tuple[Tuple[Optional[str], FoamValue], ...] = tuple(entries)
        index: dict[str, int] = {}
        for i, (key, _) in enumerate(self._entries):
            if key is None:
                continue
            if key in index:
                raise ValueError(f"duplicate keyword {key!r} in dictionary")
            index[key] = i
        self._index = index

    @property
    def entries(self) -> Tuple[Tuple[Optional[str], "FoamValue"], ...]:
        return self._entries

    def keys(self) -> Tuple[str, ...]:
        return tuple(k for k, _ in self._entries if k is not None)

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def __getitem__(self, key: str) -> "FoamValue":
        return self._entries[self._index[key]][1]

    def get(self, key: str, default: "FoamValue" = None) -> "FoamValue":
        i = self._index.get(key)
        return default if i is None else self._entries[i][1]

    def __iter__(self) -> Iterator[Tuple[Optional[str], "FoamValue"]]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FoamDict):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        return hash(self._entries)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k!r}: {v!r}" for k, v in self._entries)
        return f"FoamDict({{{inner}}})"

    def with_entry(self, key: str, value: "FoamValue") -> "FoamDict":
        """Return a copy with ``key`` replaced in place, or appended."""
        if key in self._index:
            i = self._index[key]
            entries = list(self._entries)
            entries[i] = (key, value)
            return FoamDict(entries)
        return FoamDict(self._entries + ((key, value),))

    def without_entry(self, key: str) -> "FoamDict":
        return FoamDict(tuple(e for e in self._entries if e[0] != key))


FoamValue = Union[
    None,
    int,
    float,
    str,
    DimensionVector,
    Dimensioned,
    UniformField,
    NonuniformField,
    Directive,
    KeywordEntry,
    FoamList,
    FoamSeq,
    FoamDict,
]


@dataclass(frozen=True)
class FoamHeader:
    """The FoamFile header block."""

    version: str = "2.0"
    format: str = "ascii"
    class_name: str = "dictionary"
    object_name: str = ""
    location: Optional[str] = None

    @property
    def is_known_class(self) -> bool:
        return self.class_name in KNOWN_CLASSES

    def to_dict(self) -> FoamDict:
        entries: list[Tuple[Optional[str], FoamValue]] = [
            ("version", self.version),
            ("format", self.format),
            ("class", self.class_name),
        ]
        if self.location is not None:
            entries.append(("location", QuotedString(self.location)))
        entries.append(("object", self.object_name))
        return FoamDict(entries)

    @classmethod
    def from_dict(cls, d: FoamDict) -> "FoamHeader":
        def text(key: str, default: str = "") -> str:
            v = d.get(key, default)
            if isinstance(v, (int, float)):
                return repr(v) if isinstance(v, float) else str(v)
            return str(v) if v is not None else default

        location = text("location") if "location" in d else None
        return cls(
            version=text("version", "2.0"),
            format=text("format", "ascii"),
            class_name=text("class", "dictionary"),
            object_name=text("object"),
            location=location,
        )


def header_of(tree: FoamDict) -> Optional[FoamHeader]:
    """Extract the FoamFile header block, if the tree carries one."""
    block = tree.get("FoamFile")
    if isinstance(block, FoamDict):
        return FoamHeader.from_dict(block)
    return None


def strip_header(tree: FoamDict) -> FoamDict:
    """Drop the FoamFile entry; banner comments are already gone at parse."""
    return tree.without_entry("FoamFile") if "FoamFile" in tree else tree


def with_header(tree: FoamDict, header: FoamHeader) -> FoamDict:
    """Prepend (or replace) the FoamFile entry."""
    rest = tuple(e for e in tree.entries if e[0] != "FoamFile")
    return FoamDict((("FoamFile", header.to_dict()),) + rest)
