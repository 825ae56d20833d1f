import shutil

import pytest

from foamwright.foamdict import FlowRegime
from foamwright.knowledge import (
    DropReason,
    FilterVerdict,
    KnowledgeBase,
    SchemaError,
    UnknownSolverError,
    filter_case,
    ingest_tree,
    seed_required_files,
)

CLEAN_SNAPSHOT = {
    "0/p": "dimensions [0 2 -2 0 0 0 0];\ninternalField uniform 0;\nboundaryField { inlet { type zeroGradient; } }",
    "0/U": "dimensions [0 1 -1 0 0 0 0];\ninternalField uniform (1 0 0);\nboundaryField { inlet { type noSlip; } }",
    "constant/transportProperties": "nu [0 2 -1 0 0 0 0] 1e-05;",
    "system/controlDict": "application simpleFoam;",
    "system/fvSchemes": "ddtSchemes { default steadyState; }",
    "system/fvSolution": "solvers { }",
}


class TestFilterCase:
    def test_clean_case_kept(self):
        verdict = filter_case(CLEAN_SNAPSHOT)
        assert verdict == FilterVerdict(keep=True)

    def test_auxiliary_folder_drops(self):
        snapshot = dict(CLEAN_SNAPSHOT, **{"chemkin/chem.inp": "ELEMENTS H O N END"})
        verdict = filter_case(snapshot)
        assert not verdict.keep
        assert DropReason.AUXILIARY_FOLDER in verdict.reasons

    def test_external_include_drops(self):
        snapshot = dict(CLEAN_SNAPSHOT)
        snapshot["system/fvSchemes"] = '#include "../otherCase/fvSchemes"\n'
        verdict = filter_case(snapshot)
        assert not verdict.keep
        assert DropReason.EXTERNAL_DEPENDENCY in verdict.reasons

    def test_include_etc_drops(self):
        snapshot = dict(CLEAN_SNAPSHOT)
        snapshot["system/controlDict"] = (
            'application simpleFoam;\n#includeEtc "caseDicts/setConstraintTypes"\n'
        )
        assert DropReason.EXTERNAL_DEPENDENCY in filter_case(snapshot).reasons

    def test_extensive_nonuniform_drops(self):
        big = " ".join("0.1" for _ in range(100001))
        snapshot = dict(CLEAN_SNAPSHOT)
        snapshot["0/U"] = (
            "dimensions [0 1 -1 0 0 0 0];\n"
            f"internalField nonuniform List<scalar> 100001({big});\n"
            "boundaryField { inlet { type noSlip; } }"
        )
        verdict = filter_case(snapshot)
        assert not verdict.keep
        assert verdict.reasons == (DropReason.EXTENSIVE_NONUNIFORM_FIELD,)

    def test_small_nonuniform_kept(self):
        snapshot = dict(CLEAN_SNAPSHOT)
        snapshot["0/U"] = (
            "dimensions [0 1 -1 0 0 0 0];\n"
            "internalField nonuniform List<scalar> 3(1 2 3);\n"
            "boundaryField { inlet { type noSlip; } }"
        )
        assert filter_case(snapshot).keep

    def test_unparseable_drops(self):
        snapshot = dict(CLEAN_SNAPSHOT)
        snapshot["system/fvSolution"] = "solvers { p {"
        assert DropReason.UNPARSEABLE in filter_case(snapshot).reasons

    def test_drop_is_monotone_under_added_offender(self):
        base = filter_case(CLEAN_SNAPSHOT)
        assert base.keep
        for offender in (
            {"chemkin/x": ""},
            {"system/extra": '#includeEtc "caseDicts/x"'},
            {"system/broken": "a {"},
        ):
            assert not filter_case(dict(CLEAN_SNAPSHOT, **offender)).keep

    def test_verdict_invariant(self):
        with pytest.raises(ValueError):
            FilterVerdict(keep=True, reasons=(DropReason.AUXILIARY_FOLDER,))


class TestIngest:
    def test_empty_directory(self, tmp_path):
        kb = ingest_tree(tmp_path)
        assert kb.cases == []
        assert kb.solver_index == {}

    def test_fixture_tree_keeps_two_of_three(self, filter_tree_root):
        kb = ingest_tree(filter_tree_root)
        assert sorted(c.id for c in kb.cases) == ["bendKEpsilon", "plainChannel"]
        assert len(kb.drops) == 1
        assert kb.drops[0][0] == "reactorWithChemkin"
        assert "AuxiliaryFolder" in kb.drops[0][1]

    def test_metadata_tagging(self, tutorials_root):
        kb = ingest_tree(tutorials_root)
        nozzle = kb.case_by_id("compressible/rhoCentralFoam/nozzleSpalartAllmaras")
        assert nozzle.solver == "rhoCentralFoam"
        assert nozzle.turbulence_model == "SpalartAllmaras"
        assert nozzle.thermo_model == "hePsiThermo"
        assert nozzle.flow_regime is FlowRegime.COMPRESSIBLE
        airfoil = kb.case_by_id("incompressible/simpleFoam/airfoilSpalartAllmaras")
        assert airfoil.flow_regime is FlowRegime.INCOMPRESSIBLE

    def test_headers_are_stripped(self, tutorials_root):
        kb = ingest_tree(tutorials_root)
        for case in kb.cases:
            for path, tree in case.files.items():
                assert "FoamFile" not in tree, f"{case.id}:{path} kept its header"

    def test_zero_orig_normalized(self, tutorials_root):
        kb = ingest_tree(tutorials_root)
        duct = kb.case_by_id("incompressible/simpleFoam/ductRNGkEpsilon")
        assert "0/p" in duct.files
        assert not any(p.startswith("0.orig/") for p in duct.files)

    def test_double_ingest_is_byte_identical(self, tutorials_root):
        first = ingest_tree(tutorials_root).export_json()
        second = ingest_tree(tutorials_root).export_json()
        assert first == second

    def test_index_consistency(self, tutorials_root):
        kb = ingest_tree(tutorials_root)
        for solver, ids in kb.solver_index.items():
            for case_id in ids:
                assert kb.case_by_id(case_id).solver == solver
        for model, ids in kb.model_index.items():
            for case_id in ids:
                assert kb.case_by_id(case_id).turbulence_model == model

    def test_ingest_error_on_missing_root(self, tmp_path):
        from foamwright.knowledge import IngestError

        with pytest.raises(IngestError):
            ingest_tree(tmp_path / "nope")


class TestRequiredFiles:
    def test_simplefoam_seed_set(self):
        assert set(seed_required_files("simpleFoam")) == {
            "system/fvSolution",
            "system/controlDict",
            "system/fvSchemes",
            "0/p",
            "0/U",
            "constant/transportProperties",
            "constant/turbulenceProperties",
        }

    def test_komegasst_adds_three(self):
        paths = seed_required_files("simpleFoam", "kOmegaSST")
        assert set(paths) == set(seed_required_files("simpleFoam")) | {"0/k", "0/omega", "0/nut"}
        assert len(paths) == 10

    def test_spalart_allmaras_nine_paths(self):
        paths = seed_required_files("simpleFoam", "SpalartAllmaras")
        assert len(paths) == 9
        assert {"0/nut", "0/nuTilda"} <= set(paths)

    def test_compressible_case_twelve_paths(self):
        paths = seed_required_files("rhoCentralFoam", "SpalartAllmaras", "hePsiThermo")
        assert len(paths) == 12
        assert {"0/T", "0/alphat", "constant/thermodynamicProperties"} <= set(paths)

    def test_ordering_zero_constant_system(self):
        paths = seed_required_files("rhoCentralFoam", "SpalartAllmaras", "hePsiThermo")
        groups = [p.split("/", 1)[0] for p in paths]
        boundary_0 = groups.count("0")
        boundary_c = boundary_0 + groups.count("constant")
        assert all(g == "0" for g in groups[:boundary_0])
        assert all(g == "constant" for g in groups[boundary_0:boundary_c])
        assert all(g == "system" for g in groups[boundary_c:])
        assert list(paths[:boundary_0]) == sorted(paths[:boundary_0])

    def test_unknown_solver(self):
        with pytest.raises(UnknownSolverError):
            seed_required_files("mysteryFoam")

    def test_required_subset_of_case_files(self, tutorials_root):
        kb = ingest_tree(tutorials_root)
        for case in kb.cases:
            required = set(kb.required_files(case.solver, case.turbulence_model, case.thermo_model))
            assert required <= set(case.files), case.id

    def test_mined_sets_take_precedence(self, tutorials_root):
        kb = ingest_tree(tutorials_root)
        assert "simpleFoam" in kb.solver_files
        assert set(kb.required_files("simpleFoam", "SpalartAllmaras")) == set(
            seed_required_files("simpleFoam", "SpalartAllmaras")
        )


class TestPersistence:
    def test_export_load_identity(self, filter_tree_root):
        kb = ingest_tree(filter_tree_root)
        assert KnowledgeBase.load_json(kb.export_json()) == kb

    def test_empty_export_has_version(self):
        doc = KnowledgeBase.empty().to_document()
        assert doc["schema_version"] == 1
        assert doc["cases"] == []

    def test_unknown_schema_version(self):
        with pytest.raises(SchemaError):
            KnowledgeBase.from_document({"schema_version": 99, "cases": []})

    def test_malformed_document(self):
        with pytest.raises(SchemaError):
            KnowledgeBase.load_json("{not json")
        with pytest.raises(SchemaError):
            KnowledgeBase.from_document({"schema_version": 1, "cases": [{"id": "x"}]})

    def test_save_load_files(self, tmp_path, filter_tree_root):
        kb = ingest_tree(filter_tree_root)
        db = tmp_path / "kb.json"
        kb.save(db)
        assert KnowledgeBase.load(db) == kb


def test_readonly_fixture_unchanged_by_ingest(tutorials_root, tmp_path):
    copy = tmp_path / "tree"
    shutil.copytree(tutorials_root, copy)
    before = {p: p.read_bytes() for p in sorted(copy.rglob("*")) if p.is_file()}
    ingest_tree(copy)
    after = {p: p.read_bytes() for p in sorted(copy.rglob("*")) if p.is_file()}
    assert before == after
