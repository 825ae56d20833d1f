"""Tutorial-tree ingestion into a filtered, metadata-tagged case database.

The database answers required-file queries per solver / turbulence model /
thermo model combination, from per-configuration seed tables plus file sets
mined from the ingested cases.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .foamdict import (
    FlowRegime,
    FoamDict,
    FoamSyntaxError,
    NonuniformField,
    from_json,
    parse_dictionary,
    strip_header,
    to_json,
)
from .foamdict.values import Dimensioned, FoamList, FoamSeq, FoamValue, UniformField

SCHEMA_VERSION = 1

#: single nonuniform literals above this entry count disqualify a case
DEFAULT_NONUNIFORM_LIMIT = 1000

_CASE_DIRS = ("0", "0.orig", "constant", "system")


class IngestError(Exception):
    """The tutorial root cannot be read."""


class SchemaError(Exception):
    """Database document is malformed or from an unknown schema version."""


class UnknownSolverError(KeyError):
    """Solver absent from both the database and the seed tables."""


class DropReason(enum.Enum):
    EXTERNAL_DEPENDENCY = "ExternalDependency"
    AUXILIARY_FOLDER = "AuxiliaryFolder"
    EXTENSIVE_NONUNIFORM_FIELD = "ExtensiveNonuniformField"
    UNPARSEABLE = "Unparseable"


@dataclass(frozen=True)
class FilterVerdict:
    keep: bool
    reasons: Tuple[DropReason, ...] = ()

    def __post_init__(self) -> None:
        if self.keep and self.reasons:
            raise ValueError("a kept case cannot carry drop reasons")


@dataclass(frozen=True)
class TutorialCase:
    id: str
    solver: str
    turbulence_model: Optional[str]
    thermo_model: Optional[str]
    flow_regime: FlowRegime
    files: Mapping[str, FoamDict]


def _seed_tables() -> dict:
    data = resources.files("foamwright.data").joinpath("required_files.json").read_text()
    return json.loads(data)


_SEED = _seed_tables()


def canonical_path_order(paths) -> Tuple[str, ...]:
    """0/ then constant/ then system/, lexicographic within each group."""
    rank = {"0": 0, "constant": 1, "system": 2}
    return tuple(sorted(set(paths), key=lambda p: (rank.get(p.split("/", 1)[0], 3), p)))


def _is_case_file(rel: str) -> bool:
    top = rel.split("/", 1)[0]
    return top in _CASE_DIRS and not rel.startswith(("constant/polyMesh/", "constant/polyMesh\\"))


def _normalize_zero(rel: str) -> str:
    return "0/" + rel.split("/", 1)[1] if rel.startswith("0.orig/") else rel


_EXTERNAL_MARKERS = ("#includeEtc", "#includeFunc")


def _references_outside_case(text: str) -> bool:
    for marker in _EXTERNAL_MARKERS:
        if marker in text:
            return True
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped.startswith("#include"):
            continue
        target = stripped.split(None, 1)[1] if len(stripped.split(None, 1)) > 1 else ""
        target = target.strip().strip('"')
        if target.startswith(("/", "~", "$WM_", "$FOAM_ETC")) or ".." in target:
            return True
    return False


def _max_nonuniform_count(value: FoamValue) -> int:
    if isinstance(value, NonuniformField):
        return value.count
    if isinstance(value, FoamDict):
        return max((_max_nonuniform_count(v) for _, v in value.entries), default=0)
    if isinstance(value, (FoamList, FoamSeq)):
        return max((_max_nonuniform_count(v) for v in value.items), default=0)
    if isinstance(value, (Dimensioned, UniformField)):
        return 0
    return 0


def filter_case(
    snapshot: Mapping[str, str], nonuniform_limit: int = DEFAULT_NONUNIFORM_LIMIT
) -> FilterVerdict:
    """Decide whether a case directory snapshot enters the database.

    The snapshot maps case-relative paths to file text, covering every file
    in the case directory (not just the standard three folders).
    """
    reasons: List[DropReason] = []

    tops = {rel.split("/", 1)[0] for rel in snapshot if "/" in rel}
    if any(top not in _CASE_DIRS for top in tops):
        reasons.append(DropReason.AUXILIARY_FOLDER)

    if any(_references_outside_case(text) for rel, text in snapshot.items() if _is_case_file(rel)):
        reasons.append(DropReason.EXTERNAL_DEPENDENCY)

    unparseable = False
    oversized = False
    for rel, text in snapshot.items():
        if not _is_case_file(rel):
            continue
        try:
            tree = parse_dictionary(text)
        except FoamSyntaxError:
            unparseable = True
            continue
        if _max_nonuniform_count(tree) > nonuniform_limit:
            oversized = True
    if oversized:
        reasons.append(DropReason.EXTENSIVE_NONUNIFORM_FIELD)
    if unparseable:
        reasons.append(DropReason.UNPARSEABLE)

    return FilterVerdict(keep=not reasons, reasons=tuple(reasons))


def _entry_token(tree: Optional[FoamDict], *keys: str) -> Optional[str]:
    node: FoamValue = tree
    for key in keys:
        if not isinstance(node, FoamDict) or key not in node:
            return None
        node = node[key]
    return str(node) if isinstance(node, str) else None


def _tag_case(case_id: str, files: Mapping[str, FoamDict], fallback_solver: str) -> TutorialCase:
    solver = _entry_token(files.get("system/controlDict"), "application") or fallback_solver

    turb = None
    turb_props = files.get("constant/turbulenceProperties")
    if turb_props is not None:
        sim_type = _entry_token(turb_props, "simulationType") or "RAS"
        turb = _entry_token(turb_props, sim_type, f"{sim_type}Model") or _entry_token(
            turb_props, "RAS", "RASModel"
        )

    thermo = None
    for path in ("constant/thermophysicalProperties", "constant/thermodynamicProperties"):
        thermo = thermo or _entry_token(files.get(path), "thermoType", "type")

    has_thermo_file = any(
        p in files for p in ("constant/thermophysicalProperties", "constant/thermodynamicProperties")
    )
    if has_thermo_file or solver in _SEED["compressible_solvers"]:
        regime = FlowRegime.COMPRESSIBLE
    elif "constant/transportProperties" in files:
        regime = FlowRegime.INCOMPRESSIBLE
    else:
        regime = FlowRegime.UNKNOWN

    return TutorialCase(
        id=case_id,
        solver=solver,
        turbulence_model=turb,
        thermo_model=thermo,
        flow_regime=regime,
        files=dict(files),
    )


@dataclass
class KnowledgeBase:
    cases: List[TutorialCase] = field(default_factory=list)
    solver_files: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    model_files: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    thermo_files: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    drops: List[Tuple[str, Tuple[str, ...]]] = field(default_factory=list)

    @classmethod
    def empty(cls) -> "KnowledgeBase":
        return cls()

    @property
    def solver_index(self) -> Dict[str, Tuple[str, ...]]:
        index: Dict[str, List[str]] = {}
        for case in self.cases:
            index.setdefault(case.solver, []).append(case.id)
        return {k: tuple(v) for k, v in index.items()}

    @property
    def model_index(self) -> Dict[str, Tuple[str, ...]]:
        index: Dict[str, List[str]] = {}
        for case in self.cases:
            if case.turbulence_model:
                index.setdefault(case.turbulence_model, []).append(case.id)
        return {k: tuple(v) for k, v in index.items()}

    def case_by_id(self, case_id: str) -> TutorialCase:
        for case in self.cases:
            if case.id == case_id:
                return case
        raise KeyError(case_id)

    def required_files(
        self,
        solver: str,
        turbulence_model: Optional[str] = None,
        thermo_model: Optional[str] = None,
    ) -> Tuple[str, ...]:
        solver_set = self.solver_files.get(solver) or _SEED["solvers"].get(solver)
        if solver_set is None:
            raise UnknownSolverError(solver)
        paths = set(solver_set)
        if turbulence_model:
            model_set = self.model_files.get(turbulence_model) or _SEED["models"].get(
                turbulence_model
            )
            if model_set:
                paths.update(model_set)
        if thermo_model:
            thermo_set = self.thermo_files.get(thermo_model) or _SEED["thermo"].get(thermo_model)
            paths.update(thermo_set or _SEED["compressible_default_thermo"])
        elif solver in _SEED["compressible_solvers"]:
            paths.update(_SEED["compressible_default_thermo"])
        return canonical_path_order(paths)

    # --- persistence --------------------------------------------------------

    def to_document(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "cases": [
                {
                    "id": c.id,
                    "solver": c.solver,
                    "turbulence_model": c.turbulence_model,
                    "thermo_model": c.thermo_model,
                    "flow_regime": c.flow_regime.value,
                    "files": {path: to_json(tree) for path, tree in sorted(c.files.items())},
                }
                for c in self.cases
            ],
            "solver_files": {k: list(v) for k, v in sorted(self.solver_files.items())},
            "model_files": {k: list(v) for k, v in sorted(self.model_files.items())},
            "thermo_files": {k: list(v) for k, v in sorted(self.thermo_files.items())},
            "drops": [[case_id, list(reasons)] for case_id, reasons in self.drops],
        }

    def export_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_document(cls, doc: dict) -> "KnowledgeBase":
        if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(
                f"unsupported database schema version {doc.get('schema_version')!r}"
                if isinstance(doc, dict)
                else "database document must be a JSON object"
            )
        try:
            cases = [
                TutorialCase(
                    id=c["id"],
                    solver=c["solver"],
                    turbulence_model=c.get("turbulence_model"),
                    thermo_model=c.get("thermo_model"),
                    flow_regime=FlowRegime(c.get("flow_regime", "unknown")),
                    files={path: from_json(node) for path, node in c["files"].items()},
                )
                for c in doc["cases"]
            ]
            kb = cls(
                cases=cases,
                solver_files={k: tuple(v) for k, v in doc.get("solver_files", {}).items()},
                model_files={k: tuple(v) for k, v in doc.get("model_files", {}).items()},
                thermo_files={k: tuple(v) for k, v in doc.get("thermo_files", {}).items()},
                drops=[(d[0], tuple(d[1])) for d in doc.get("drops", [])],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed database document: {exc}") from exc
        return kb

    @classmethod
    def load_json(cls, text: str) -> "KnowledgeBase":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"database is not valid JSON: {exc}") from exc
        return cls.from_document(doc)

    def save(self, path) -> None:
        Path(path).write_text(self.export_json())

    @classmethod
    def load(cls, path) -> "KnowledgeBase":
        return cls.load_json(Path(path).read_text())


def _snapshot_dir(case_dir: Path) -> Dict[str, str]:
    snapshot: Dict[str, str] = {}
    for path in sorted(case_dir.rglob("*")):
        if not path.is_file():
            continue
        rel = path.relative_to(case_dir).as_posix()
        try:
            snapshot[rel] = path.read_text(errors="replace")
        except OSError:
            snapshot[rel] = ""
    return snapshot


def find_case_dirs(root: Path) -> List[Path]:
    return sorted(p.parent.parent for p in root.rglob("system/controlDict") if p.is_file())


def _mine_file_sets(cases: Sequence[TutorialCase]) -> Tuple[dict, dict, dict]:
    def intersect(group: Dict[str, List[TutorialCase]]) -> Dict[str, Tuple[str, ...]]:
        out = {}
        for key, members in sorted(group.items()):
            common = set(members[0].files)
            for case in members[1:]:
                common &= set(case.files)
            out[key] = canonical_path_order(common)
        return out

    by_solver: Dict[str, List[TutorialCase]] = {}
    by_model: Dict[str, List[TutorialCase]] = {}
    by_thermo: Dict[str, List[TutorialCase]] = {}
    for case in cases:
        by_solver.setdefault(case.solver, []).append(case)
        if case.turbulence_model:
            by_model.setdefault(case.turbulence_model, []).append(case)
        if case.thermo_model:
            by_thermo.setdefault(case.thermo_model, []).append(case)
    return intersect(by_solver), intersect(by_model), intersect(by_thermo)


def ingest_tree(
    root, nonuniform_limit: int = DEFAULT_NONUNIFORM_LIMIT, mine_file_sets: bool = True
) -> KnowledgeBase:
    """Build a KnowledgeBase from a tutorials-style directory tree.

    Deterministic: re-ingesting an identical tree yields an identical export.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"tutorial root {root} is not a readable directory")

    kb = KnowledgeBase()
    kept: List[TutorialCase] = []
    for case_dir in find_case_dirs(root):
        case_id = case_dir.relative_to(root).as_posix()
        snapshot = _snapshot_dir(case_dir)
        verdict = filter_case(snapshot, nonuniform_limit=nonuniform_limit)
        if not verdict.keep:
            kb.drops.append((case_id, tuple(r.value for r in verdict.reasons)))
            continue
        files: Dict[str, FoamDict] = {}
        for rel, text in snapshot.items():
            if not _is_case_file(rel):
                continue
            files[_normalize_zero(rel)] = strip_header(parse_dictionary(text))
        kept.append(_tag_case(case_id, files, fallback_solver=case_dir.parent.name))

    kb.cases = sorted(kept, key=lambda c: c.id)
    if mine_file_sets:
        kb.solver_files, kb.model_files, kb.thermo_files = _mine_file_sets(kb.cases)
    return kb


def seed_required_files(
    solver: str, turbulence_model: Optional[str] = None, thermo_model: Optional[str] = None
) -> Tuple[str, ...]:
    """Required-file query against the shipped seed tables only."""
    return KnowledgeBase.empty().required_files(solver, turbulence_model, thermo_model)


def steady_solvers() -> Tuple[str, ...]:
    return tuple(_SEED["steady_solvers"])


def compressible_solvers() -> Tuple[str, ...]:
    return tuple(_SEED["compressible_solvers"])


def max_courant_solvers() -> Tuple[str, ...]:
    return tuple(_SEED["max_courant_solvers"])
