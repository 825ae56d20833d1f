"""Packaged demo assets for offline dry runs: an airfoil case description,
a Fluent mesh, a pre-converted polyMesh, a scripted mock-LLM exchange, and
scripted solver runs (one dimension failure, then a clean ten-step run)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import List

_ROOT = Path(__file__).parent


def document_path() -> Path:
    return _ROOT / "document.txt"


def mesh_path() -> Path:
    return _ROOT / "mesh" / "airfoil3d.msh"


def polymesh_fixture_path() -> Path:
    return _ROOT / "polyMesh"


def mock_script_path() -> Path:
    return _ROOT / "mock_script.json"


def scripted_runs() -> List:
    from ..runner import ScriptedRun

    entries = json.loads((_ROOT / "solver_runs.json").read_text())
    runs = []
    for entry in entries:
        runs.append(
            ScriptedRun(
                log_text=(_ROOT / entry["log_file"]).read_text(),
                exit_code=entry.get("exit_code", 0),
                write_times=tuple(entry.get("write_times", ())),
                timeout=entry.get("timeout", False),
            )
        )
    return runs
