"""OpenFOAM dictionary parsing, manipulation, and serialization."""

from .codec import from_json, to_json
from .dimensions import (
    SUPPORTED_FIELDS,
    FlowRegime,
    MismatchReport,
    UnknownFieldError,
    check_dimensions,
    expected_dimensions,
)
from .fields import FieldFile, FieldFileError, field_file_from_tree, is_field_file, parse_field_file
from .parser import FoamSyntaxError, parse_dictionary, parse_value
from .values import (
    KNOWN_CLASSES,
    DimensionVector,
    Dimensioned,
    Directive,
    FoamDict,
    FoamHeader,
    FoamList,
    FoamSeq,
    FoamValue,
    KeywordEntry,
    NonuniformField,
    QuotedString,
    UniformField,
    header_of,
    strip_header,
    with_header,
)
from .writer import serialize_dictionary, serialize_value

__all__ = [
    "DimensionVector",
    "Dimensioned",
    "Directive",
    "FieldFile",
    "FieldFileError",
    "FlowRegime",
    "FoamDict",
    "FoamHeader",
    "FoamList",
    "FoamSeq",
    "FoamSyntaxError",
    "FoamValue",
    "KNOWN_CLASSES",
    "KeywordEntry",
    "MismatchReport",
    "NonuniformField",
    "QuotedString",
    "SUPPORTED_FIELDS",
    "UniformField",
    "UnknownFieldError",
    "check_dimensions",
    "expected_dimensions",
    "field_file_from_tree",
    "from_json",
    "header_of",
    "is_field_file",
    "parse_dictionary",
    "parse_field_file",
    "parse_value",
    "serialize_dictionary",
    "serialize_value",
    "strip_header",
    "to_json",
    "with_header",
]
