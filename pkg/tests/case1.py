"""Shared Case-1 style fixture: an airfoil case spec and scripted responses."""

import json
import pathlib

from foamwright.builder import BoundarySpec, CaseSpecification, TimeMode
from foamwright.foamdict import FlowRegime
from foamwright.llm import LlmRole, ScriptEntry, TokenUsage

FIXTURE_CASE = (
    pathlib.Path(__file__).parent
    / "fixtures/tutorials/incompressible/simpleFoam/airfoilSpalartAllmaras"
)

DOCUMENT_TEXT = (
    "Turbulent flow around a two-dimensional airfoil section at 10 degrees "
    "angle of attack is computed with the steady incompressible simpleFoam "
    "solver and the SpalartAllmaras turbulence model. The far-field boundaries "
    "named inlet and outlet use freestream conditions (freestreamPressure for "
    "pressure and freestreamVelocity for velocity, magnitude 26.1 m/s); the "
    "airfoil surface is a no-slip wall and the frontAndBack planes are empty. "
    "The kinematic viscosity is 1e-05 m2/s."
)

PATCHES = ("inlet", "outlet", "airfoil", "frontAndBack")


def case1_spec() -> CaseSpecification:
    freestream = {
        "p": "freestreamPressure",
        "U": "freestreamVelocity",
        "nut": "freestream",
        "nuTilda": "freestream",
    }
    return CaseSpecification(
        solver="simpleFoam",
        turbulence_model="SpalartAllmaras",
        thermo_model=None,
        flow_regime=FlowRegime.INCOMPRESSIBLE,
        time_mode=TimeMode.STEADY,
        boundaries={
            "inlet": BoundarySpec(bc_type="freestream", per_field_types=freestream),
            "outlet": BoundarySpec(bc_type="freestream", per_field_types=freestream),
            "airfoil": BoundarySpec(
                bc_type="noSlip",
                per_field_types={
                    "p": "zeroGradient",
                    "nut": "nutUSpaldingWallFunction",
                    "nuTilda": "fixedValue",
                },
            ),
            "frontAndBack": BoundarySpec(bc_type="empty"),
        },
        initial_fields={
            "p": "uniform 0",
            "U": "uniform (25.75 4.54 0)",
            "nut": "uniform 4.5e-05",
            "nuTilda": "uniform 4.5e-05",
        },
        free_text=DOCUMENT_TEXT,
        source_ref="case1-fixture",
    )


STEP1_JSON = {
    "solver": "simpleFoam",
    "turbulence_model": "SpalartAllmaras",
    "thermo_model": None,
    "flow_regime": "incompressible",
    "boundaries": [
        {
            "patch": "inlet",
            "type": "freestream",
            "declared_type": "freeStream",
            "field_types": {"p": "freestreamPressure", "U": "freestreamVelocity"},
        },
        {
            "patch": "outlet",
            "type": "freestream",
            "field_types": {"p": "freestreamPressure", "U": "freestreamVelocity"},
        },
        {
            "patch": "airfoil",
            "type": "noSlip",
            "field_types": {
                "p": "zeroGradient",
                "nut": "nutUSpaldingWallFunction",
                "nuTilda": "fixedValue",
            },
        },
        {"patch": "frontAndBack", "type": "empty"},
    ],
}

STEP2_JSON = {
    "initial_fields": {
        "p": "uniform 0",
        "U": "uniform (25.75 4.54 0)",
        "nut": "uniform 4.5e-05",
        "nuTilda": "uniform 4.5e-05",
    },
    "boundary_values": {
        "inlet": {"p": "uniform 0", "U": "uniform (25.75 4.54 0)"},
        "outlet": {"p": "uniform 0", "U": "uniform (25.75 4.54 0)"},
    },
}


def extraction_script(usage=TokenUsage(1200, 400)):
    return [
        ScriptEntry(LlmRole.REASONER, match="boundary", response=json.dumps(STEP1_JSON), usage=usage),
        ScriptEntry(LlmRole.REASONER, match="initial", response=json.dumps(STEP2_JSON), usage=usage),
    ]


def case1_file_list():
    return (
        "0/U",
        "0/nuTilda",
        "0/nut",
        "0/p",
        "constant/transportProperties",
        "constant/turbulenceProperties",
        "system/controlDict",
        "system/fvSchemes",
        "system/fvSolution",
    )


def case1_envelope() -> str:
    blocks = []
    for rel in case1_file_list():
        text = (FIXTURE_CASE / rel).read_text()
        blocks.append(f"== FILE: {rel} ==\n{text}")
    return "\n".join(blocks)


def generation_script(usage=TokenUsage(3000, 1800)):
    return [
        ScriptEntry(
            LlmRole.REASONER, match="Generate complete OpenFOAM", response=case1_envelope(), usage=usage
        )
    ]
