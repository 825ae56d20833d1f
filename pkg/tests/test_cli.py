import json

from foamwright.cli import main


def test_kb_build_and_query(tmp_path, capsys, tutorials_root):
    db = tmp_path / "kb.json"
    assert main(["kb", "build", str(tutorials_root), "-o", str(db)]) == 0
    out = capsys.readouterr().out
    assert "ingested 6 cases" in out
    doc = json.loads(db.read_text())
    assert doc["schema_version"] == 1

    assert main(["kb", "query", "--solver", "simpleFoam", "--model", "SpalartAllmaras"]) == 0
    paths = capsys.readouterr().out.strip().splitlines()
    assert len(paths) == 9
    assert "0/nuTilda" in paths

    assert main(["kb", "query", "--solver", "simpleFoam", "--kb", str(db)]) == 0


def test_kb_query_unknown_solver(capsys):
    assert main(["kb", "query", "--solver", "mysteryFoam"]) == 2
    assert "unknown solver" in capsys.readouterr().err


def test_dry_run_end_to_end(tmp_path, capsys):
    code = main(["run", "--dry-run", "--workdir", str(tmp_path / "work")])
    out = capsys.readouterr().out
    assert code == 0
    assert "Case 1" in out
    assert "ten-step-success" in out


def test_filter_tree_build_reports_drop(tmp_path, capsys, filter_tree_root):
    db = tmp_path / "kb.json"
    assert main(["kb", "build", str(filter_tree_root), "-o", str(db)]) == 0
    out = capsys.readouterr().out
    assert "ingested 2 cases (1 dropped)" in out
    assert "reactorWithChemkin" in out
