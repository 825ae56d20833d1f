"""Canonical field dimensions per flow regime, and mismatch checking.

Incompressible solvers carry kinematic pressure (length^2/time^2);
compressible solvers carry thermodynamic pressure (mass/length/time^2).
The remaining fields keep one signature across both regimes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .values import DimensionVector


class FlowRegime(enum.Enum):
    INCOMPRESSIBLE = "incompressible"
    COMPRESSIBLE = "compressible"
    UNKNOWN = "unknown"


class UnknownFieldError(KeyError):
    """Field name outside the supported dimension table."""


def _dv(*e: int) -> DimensionVector:
    return DimensionVector.of(*e)


# (incompressible, compressible) signature per field
_FIELD_DIMENSIONS: Dict[str, Tuple[DimensionVector, DimensionVector]] = {
    "p": (_dv(0, 2, -2, 0, 0, 0, 0), _dv(1, -1, -2, 0, 0, 0, 0)),
    "U": (_dv(0, 1, -1, 0, 0, 0, 0), _dv(0, 1, -1, 0, 0, 0, 0)),
    "T": (_dv(0, 0, 0, 1, 0, 0, 0), _dv(0, 0, 0, 1, 0, 0, 0)),
    "nut": (_dv(0, 2, -1, 0, 0, 0, 0), _dv(0, 2, -1, 0, 0, 0, 0)),
    "nuTilda": (_dv(0, 2, -1, 0, 0, 0, 0), _dv(0, 2, -1, 0, 0, 0, 0)),
    "k": (_dv(0, 2, -2, 0, 0, 0, 0), _dv(0, 2, -2, 0, 0, 0, 0)),
    "omega": (_dv(0, 0, -1, 0, 0, 0, 0), _dv(0, 0, -1, 0, 0, 0, 0)),
    "epsilon": (_dv(0, 2, -3, 0, 0, 0, 0), _dv(0, 2, -3, 0, 0, 0, 0)),
    # thermal diffusivity: kinematic (m^2/s) vs dynamic (kg/m/s)
    "alphat": (_dv(0, 2, -1, 0, 0, 0, 0), _dv(1, -1, -1, 0, 0, 0, 0)),
}

SUPPORTED_FIELDS = tuple(sorted(_FIELD_DIMENSIONS))


def expected_dimensions(field_name: str, regime: FlowRegime) -> DimensionVector:
    """Canonical dimension vector for a field under a flow regime."""
    if regime not in (FlowRegime.INCOMPRESSIBLE, FlowRegime.COMPRESSIBLE):
        raise ValueError(f"regime must be incompressible or compressible, got {regime}")
    try:
        pair = _FIELD_DIMENSIONS[field_name]
    except KeyError:
        raise UnknownFieldError(field_name) from None
    return pair[0] if regime is FlowRegime.INCOMPRESSIBLE else pair[1]


@dataclass(frozen=True)
class MismatchReport:
    """Result of a dimension check; empty means the signatures agree."""

    field_name: str
    actual: Optional[DimensionVector] = None
    expected: Optional[DimensionVector] = None

    @property
    def empty(self) -> bool:
        return self.actual is None and self.expected is None

    def __str__(self) -> str:
        if self.empty:
            return f"{self.field_name}: dimensions consistent"
        return f"{self.field_name}: has {self.actual}, expected {self.expected}"


def check_dimensions(field_name: str, actual: DimensionVector, expected: DimensionVector) -> MismatchReport:
    """Empty report iff the two vectors are equal component-wise."""
    if actual == expected:
        return MismatchReport(field_name)
    return MismatchReport(field_name, actual=actual, expected=expected)
