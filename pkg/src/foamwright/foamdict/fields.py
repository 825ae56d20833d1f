"""Field-file view over a parsed tree: dimensions, internal and boundary data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .dimensions import MismatchReport, check_dimensions
from .parser import parse_dictionary
from .values import (
    DimensionVector,
    FoamDict,
    FoamHeader,
    FoamValue,
    header_of,
)


class FieldFileError(ValueError):
    """The tree does not satisfy the field-file shape."""


@dataclass(frozen=True)
class FieldFile:
    """A 0/<name> file: header, dimensions, internalField, per-patch boundaryField."""

    name: str
    header: Optional[FoamHeader]
    dimensions: DimensionVector
    internal_field: FoamValue
    boundary_field: FoamDict
    tree: FoamDict

    @property
    def patch_names(self) -> Tuple[str, ...]:
        return self.boundary_field.keys()

    def boundary_type(self, patch: str) -> Optional[str]:
        sub = self.boundary_field.get(patch)
        if isinstance(sub, FoamDict):
            bc = sub.get("type")
            if isinstance(bc, str):
                return str(bc)
        return None

    def check_dimensions(self, expected: DimensionVector) -> MismatchReport:
        return check_dimensions(self.name, self.dimensions, expected)


def field_file_from_tree(tree: FoamDict, name: str = "") -> FieldFile:
    header = header_of(tree)
    if not name and header is not None:
        name = header.object_name
    dims = tree.get("dimensions")
    if not isinstance(dims, DimensionVector):
        raise FieldFileError(f"field file {name or '<unnamed>'} lacks a dimensions entry")
    boundary = tree.get("boundaryField")
    if not isinstance(boundary, FoamDict):
        raise FieldFileError(f"field file {name or '<unnamed>'} lacks a boundaryField dictionary")
    seen = set()
    for patch, sub in boundary.entries:
        if patch is None:
            continue
        if patch in seen:
            raise FieldFileError(f"duplicate boundary patch {patch!r}")
        seen.add(patch)
        if not isinstance(sub, FoamDict) or "type" not in sub:
            raise FieldFileError(f"boundary patch {patch!r} lacks a type keyword")
    return FieldFile(
        name=name,
        header=header,
        dimensions=dims,
        internal_field=tree.get("internalField"),
        boundary_field=boundary,
        tree=tree,
    )


def parse_field_file(text: str, name: str = "") -> FieldFile:
    return field_file_from_tree(parse_dictionary(text), name=name)


def is_field_file(tree: FoamDict) -> bool:
    return isinstance(tree.get("dimensions"), DimensionVector) and isinstance(
        tree.get("boundaryField"), FoamDict
    )
