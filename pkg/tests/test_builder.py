import json

import pytest

from case1 import (
    DOCUMENT_TEXT,
    STEP1_JSON,
    STEP2_JSON,
    case1_envelope,
    case1_file_list,
    case1_spec,
    extraction_script,
    generation_script,
)
from foamwright.builder import (
    BoundarySpec,
    CaseSpecification,
    ExtractionError,
    FindingKind,
    GenerationError,
    TimeMode,
    derive_file_list,
    extract_case_spec,
    generate_files,
    infer_time_mode,
    parse_file_envelope,
    shipped_catalog,
    validate_boundaries,
)
from foamwright.foamdict import FlowRegime, expected_dimensions, field_file_from_tree
from foamwright.knowledge import KnowledgeBase, UnknownSolverError
from foamwright.llm import Gateway, LlmRole, MockProvider, ScriptEntry
from foamwright.retrieval import Segment

DOCUMENT = [Segment("description", DOCUMENT_TEXT)]


def session_for(script):
    return Gateway(MockProvider(script), sleep=lambda s: None, clock=lambda: 0.0).session()


class TestCatalog:
    def test_paper_named_types_present(self):
        catalog = shipped_catalog()
        for name in ("freestream", "freestreamVelocity", "freestreamPressure", "noSlip", "empty"):
            assert name in catalog

    def test_near_miss_suggests_canonical_spelling(self):
        catalog = shipped_catalog()
        assert catalog.suggest("freeStream") == "freestream"
        assert catalog.canonicalize("freeStream") == ("freestream", True)

    def test_unknown_type_has_no_suggestion(self):
        assert shipped_catalog().suggest("totallyMadeUp") is None

    def test_case_sensitive_membership(self):
        catalog = shipped_catalog()
        assert "freestream" in catalog
        assert "freeStream" not in catalog


class TestSpecification:
    def test_patch_names_must_have_no_whitespace(self):
        with pytest.raises(ValueError):
            CaseSpecification(solver="simpleFoam", boundaries={"in let": BoundarySpec("fixedValue")})
        with pytest.raises(ValueError):
            CaseSpecification(solver="simpleFoam", boundaries={"": BoundarySpec("fixedValue")})

    def test_time_mode_inference(self):
        assert infer_time_mode("simpleFoam") is TimeMode.STEADY
        assert infer_time_mode("rhoCentralFoam") is TimeMode.TRANSIENT
        assert infer_time_mode("pisoFoam") is TimeMode.TRANSIENT


class TestValidateBoundaries:
    MESH = {"inlet", "outlet", "airfoil", "frontAndBack"}

    def test_clean_case1_spec(self):
        report = validate_boundaries(case1_spec(), self.MESH)
        assert report.clean

    def test_catalog_valid_type_flagged_against_declared(self):
        spec = CaseSpecification(
            solver="simpleFoam",
            boundaries={"inlet": BoundarySpec(bc_type="inlet")},
            declared_boundary_types={"inlet": "freestream"},
        )
        report = validate_boundaries(spec, {"inlet"})
        flags = report.of_kind(FindingKind.DECLARED_TYPE_MISMATCH)
        assert len(flags) == 1
        assert flags[0].suggestion == "freestream"

    def test_declared_type_casing_canonicalized(self):
        spec = CaseSpecification(
            solver="simpleFoam",
            boundaries={"inlet": BoundarySpec(bc_type="freestream")},
            declared_boundary_types={"inlet": "freeStream"},
        )
        assert validate_boundaries(spec, {"inlet"}).clean

    def test_mesh_patch_missing_from_spec(self):
        spec = CaseSpecification(
            solver="simpleFoam", boundaries={"inlet": BoundarySpec("fixedValue")}
        )
        report = validate_boundaries(spec, {"inlet", "wall_lower"})
        missing = report.of_kind(FindingKind.MESH_PATCH_MISSING_FROM_SPEC)
        assert [f.patch for f in missing] == ["wall_lower"]

    def test_spec_patch_missing_from_mesh(self):
        spec = CaseSpecification(
            solver="simpleFoam",
            boundaries={"inlet": BoundarySpec("fixedValue"), "ghost": BoundarySpec("fixedValue")},
        )
        report = validate_boundaries(spec, {"inlet"})
        assert [f.patch for f in report.of_kind(FindingKind.SPEC_PATCH_MISSING_FROM_MESH)] == [
            "ghost"
        ]

    def test_unknown_and_near_miss_types(self):
        spec = CaseSpecification(
            solver="simpleFoam",
            boundaries={
                "a": BoundarySpec("freeStream"),
                "b": BoundarySpec("imaginaryCondition"),
            },
        )
        report = validate_boundaries(spec, {"a", "b"})
        near = report.of_kind(FindingKind.NEAR_MISS_BOUNDARY_TYPE)
        unknown = report.of_kind(FindingKind.UNKNOWN_BOUNDARY_TYPE)
        assert [f.patch for f in near] == ["a"] and near[0].suggestion == "freestream"
        assert [f.patch for f in unknown] == ["b"]


class TestDeriveFileList:
    def test_case1_nine_paths(self):
        assert set(derive_file_list(case1_spec(), KnowledgeBase.empty())) == set(case1_file_list())

    def test_case5_twelve_paths(self):
        spec = CaseSpecification(
            solver="rhoCentralFoam",
            turbulence_model="SpalartAllmaras",
            thermo_model="hePsiThermo",
            flow_regime=FlowRegime.COMPRESSIBLE,
        )
        paths = derive_file_list(spec, KnowledgeBase.empty())
        assert len(paths) == 12
        assert {"0/T", "0/alphat", "constant/thermodynamicProperties"} <= set(paths)

    def test_unknown_solver_propagates(self):
        spec = CaseSpecification(solver="wizardFoam")
        with pytest.raises(UnknownSolverError):
            derive_file_list(spec, KnowledgeBase.empty())


class TestExtractCaseSpec:
    def test_valid_two_step_extraction(self):
        session = session_for(extraction_script())
        spec = extract_case_spec(DOCUMENT, session, KnowledgeBase.empty(), source_ref="doc-1")
        assert spec.solver == "simpleFoam"
        assert spec.turbulence_model == "SpalartAllmaras"
        assert spec.flow_regime is FlowRegime.INCOMPRESSIBLE
        assert spec.time_mode is TimeMode.STEADY
        assert set(spec.boundaries) == {"inlet", "outlet", "airfoil", "frontAndBack"}
        assert spec.boundaries["inlet"].per_field_types["p"] == "freestreamPressure"
        assert spec.initial_fields["U"] == "uniform (25.75 4.54 0)"
        # declared "freeStream" canonicalizes cleanly against the chosen type
        assert validate_boundaries(spec, {"inlet", "outlet", "airfoil", "frontAndBack"}).clean
        assert [x.purpose_tag for x in session.qa_log] == [
            "boundary-identification",
            "field-values",
        ]

    def test_malformed_then_valid_retries_once(self):
        script = [
            ScriptEntry(LlmRole.REASONER, match="boundary", response="not json at all"),
            ScriptEntry(LlmRole.REASONER, match="valid JSON", response=json.dumps(STEP1_JSON)),
            ScriptEntry(LlmRole.REASONER, match="initial", response=json.dumps(STEP2_JSON)),
        ]
        session = session_for(script)
        spec = extract_case_spec(DOCUMENT, session, KnowledgeBase.empty())
        assert spec.solver == "simpleFoam"
        assert [x.purpose_tag for x in session.qa_log] == [
            "boundary-identification",
            "boundary-identification-retry",
            "field-values",
        ]

    def test_twice_malformed_fails(self):
        script = [
            ScriptEntry(LlmRole.REASONER, match="", response="garbage"),
            ScriptEntry(LlmRole.REASONER, match="", response='{"still": "wrong"}'),
        ]
        session = session_for(script)
        with pytest.raises(ExtractionError):
            extract_case_spec(DOCUMENT, session, KnowledgeBase.empty())

    def test_empty_document_rejected(self):
        session = session_for([])
        with pytest.raises(ExtractionError):
            extract_case_spec([], session, KnowledgeBase.empty())


class TestEnvelope:
    def test_parse_envelope_paths(self):
        files = parse_file_envelope(case1_envelope())
        assert set(files) == set(case1_file_list())

    def test_envelope_with_fences_and_thought_wrap(self):
        text = (
            "Here is my thought process: thinking.\n"
            "Here is my response:\n"
            "== FILE: system/controlDict ==\n"
            "```\napplication simpleFoam;\n```\n"
        )
        files = parse_file_envelope(text)
        assert files["system/controlDict"].strip() == "application simpleFoam;"

    def test_missing_envelope_rejected(self):
        with pytest.raises(ValueError):
            parse_file_envelope("just some text")


class TestGenerateFiles:
    MESH = {"inlet", "outlet", "airfoil", "frontAndBack"}

    def test_case1_generation(self):
        session = session_for(generation_script())
        generated = generate_files(
            case1_spec(), case1_file_list(), None, session, mesh_patches=self.MESH
        )
        assert set(generated.files) == set(case1_file_list())
        p = field_file_from_tree(generated.files["0/p"], "p")
        assert p.dimensions == expected_dimensions("p", FlowRegime.INCOMPRESSIBLE)
        for path in ("0/p", "0/U", "0/nut", "0/nuTilda"):
            ff = field_file_from_tree(generated.files[path], path.split("/")[1])
            assert set(ff.patch_names) == self.MESH
            for patch in ff.patch_names:
                wanted = case1_spec().boundaries[patch].effective_type(ff.name)
                assert ff.boundary_type(patch) == wanted

    def test_compressible_pressure_dimensions_applied(self):
        # the envelope carries incompressible-dimension p; generation must
        # overwrite with the thermodynamic signature for a compressible spec
        spec = CaseSpecification(
            solver="rhoCentralFoam",
            turbulence_model=None,
            flow_regime=FlowRegime.COMPRESSIBLE,
            time_mode=TimeMode.TRANSIENT,
            boundaries={"inlet": BoundarySpec("fixedValue"), "outlet": BoundarySpec("zeroGradient")},
            initial_fields={"p": "uniform 101325"},
        )
        envelope = (
            "== FILE: 0/p ==\n"
            "dimensions [0 2 -2 0 0 0 0];\n"
            "internalField uniform 101325;\n"
            "boundaryField {\n"
            "  inlet { type fixedValue; value uniform 101325; }\n"
            "  outlet { type zeroGradient; }\n"
            "}\n"
        )
        session = session_for(
            [ScriptEntry(LlmRole.REASONER, match="", response=envelope)]
        )
        generated = generate_files(spec, ["0/p"], None, session, mesh_patches={"inlet", "outlet"})
        ff = field_file_from_tree(generated.files["0/p"], "p")
        assert ff.dimensions == expected_dimensions("p", FlowRegime.COMPRESSIBLE)

    def test_bogus_patch_triggers_regeneration_then_error(self):
        bad = (
            "== FILE: 0/p ==\n"
            "dimensions [0 2 -2 0 0 0 0];\n"
            "internalField uniform 0;\n"
            "boundaryField { inlett { type zeroGradient; } }\n"
        )
        spec = CaseSpecification(
            solver="simpleFoam",
            flow_regime=FlowRegime.INCOMPRESSIBLE,
            boundaries={"inlet": BoundarySpec("zeroGradient")},
        )
        script = [
            ScriptEntry(LlmRole.REASONER, match="file-generation|Generate", response=bad),
            ScriptEntry(LlmRole.REASONER, match="", response=bad),
        ]
        session = session_for(script)
        with pytest.raises(GenerationError):
            generate_files(spec, ["0/p"], None, session, mesh_patches={"inlet"})
        assert [x.purpose_tag for x in session.qa_log] == ["file-generation", "file-regeneration"]

    def test_regeneration_recovers_missing_file(self):
        envelope = case1_envelope()
        first = "\n".join(envelope.split("== FILE: system/fvSolution ==")[0:1])  # drop last file
        fix = "== FILE: system/fvSolution ==\n" + (
            "solvers { p { solver GAMG; smoother GaussSeidel; tolerance 1e-06; relTol 0.1; } }\n"
        )
        script = [
            ScriptEntry(LlmRole.REASONER, match="", response=first),
            ScriptEntry(LlmRole.REASONER, match="fvSolution", response=fix),
        ]
        session = session_for(script)
        generated = generate_files(
            case1_spec(), case1_file_list(), None, session, mesh_patches=self.MESH
        )
        assert "system/fvSolution" in generated.files
