"""Execute-classify-correct loop: deploy the case, convert the mesh, set the
ten-step temporal controls, run the solver, and repair failures until the run
completes or the reflection budget is spent.

Failures fall into four categories. Dimension and missing-file errors are
highly patterned: a rule prescan reads the log first and the Editor confirms
the target, which keeps the offline mock path deterministic. General errors
go to the Reasoner with the current case snapshot. A diagnosis that keeps
repeating escalates to a persistent rewrite.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import re
import shutil
import subprocess
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Set, Tuple

from .builder import CaseSpecification, GeneratedCase, TimeMode
from .foamdict import (
    FieldFileError,
    FlowRegime,
    FoamDict,
    FoamList,
    FoamSyntaxError,
    KeywordEntry,
    expected_dimensions,
    field_file_from_tree,
    is_field_file,
    parse_dictionary,
    serialize_dictionary,
)
from .foamdict.dimensions import UnknownFieldError
from .knowledge import KnowledgeBase, max_courant_solvers
from .llm import GatewaySession, LlmRole, extract_answer, wrap_thought
from .retrieval import (
    CaseContext,
    NoCandidatesError,
    ReferenceBundle,
    build_context,
    retrieve_references,
)

RUN_LOG_NAME = "case_run.log"
MANIFEST_NAME = "run_manifest.jsonl"

EXECUTOR_ENV_VAR = "FOAMWRIGHT_EXECUTOR"


class DeployError(Exception):
    """Case deployment refused or failed."""


class DirNotEmptyError(DeployError):
    """Deployment target already contains files."""


class ConversionError(Exception):
    """Mesh conversion tool failed."""


class MissingControlDictError(Exception):
    """system/controlDict absent from the deployed case."""


class SolverTimeout(Exception):
    def __init__(self, partial_log: str) -> None:
        super().__init__("solver run exceeded its timeout")
        self.partial_log = partial_log


class ClassificationError(Exception):
    """The model could not name a file that exists in the case context."""


class CorrectionError(Exception):
    """A patched file failed parsing twice or broke spec preservation."""


@dataclass(frozen=True)
class RunConfig:
    max_reflections: int = 30
    persistent_threshold: int = 3
    steady_steps: int = 10
    write_steps: Tuple[int, ...] = (0, 5, 10)
    max_courant: float = 0.6
    delta_t_incompressible: float = 1e-5
    delta_t_compressible: float = 1e-8
    solver_timeout: float = 600.0
    reference_count: int = 3

    def __post_init__(self) -> None:
        if self.max_reflections < 1:
            raise ValueError("max_reflections must be >= 1")
        if self.persistent_threshold < 2:
            raise ValueError("persistent_threshold must be >= 2")


class ErrorCategory(enum.Enum):
    DIMENSION = "dimension"
    MISSING_FILE = "missing-file"
    PERSISTENT = "persistent"
    GENERAL = "general"


@dataclass(frozen=True)
class ErrorDiagnosis:
    category: ErrorCategory
    evidence: str
    target_file: Optional[str] = None
    missing_name: Optional[str] = None

    def __post_init__(self) -> None:
        if self.category is ErrorCategory.MISSING_FILE and not self.missing_name:
            raise ValueError("missing-file diagnosis needs the missing path")
        if self.category is ErrorCategory.PERSISTENT and not self.target_file:
            raise ValueError("persistent diagnosis needs a target file")

    def signature(self) -> Tuple[str, Optional[str], str]:
        return (self.category.value, self.target_file, evidence_hash(self.evidence))


@dataclass(frozen=True)
class HistoryEntry:
    iteration: int
    category: ErrorCategory
    target_file: Optional[str]
    evidence_hash: str


class ErrorHistory:
    """Append-only record of diagnoses across correction cycles."""

    def __init__(self) -> None:
        self._entries: List[HistoryEntry] = []

    @property
    def entries(self) -> Tuple[HistoryEntry, ...]:
        return tuple(self._entries)

    def append(self, iteration: int, diagnosis: ErrorDiagnosis) -> None:
        self._entries.append(
            HistoryEntry(
                iteration=iteration,
                category=diagnosis.category,
                target_file=diagnosis.target_file,
                evidence_hash=evidence_hash(diagnosis.evidence),
            )
        )

    def trailing_run(self, category: ErrorCategory, target: Optional[str], ev_hash: str) -> int:
        """Length of the trailing run of entries with this exact signature."""
        run = 0
        for entry in reversed(self._entries):
            if (
                entry.category is category
                and entry.target_file == target
                and entry.evidence_hash == ev_hash
            ):
                run += 1
            else:
                break
        return run


class RunStatus(enum.Enum):
    TEN_STEP_SUCCESS = "ten-step-success"
    EXHAUSTED = "exhausted"
    HARD_FAILURE = "hard-failure"


@dataclass
class RunOutcome:
    status: RunStatus
    reflections: int
    usage_by_role: Dict[str, Tuple[int, int]]
    cost_usd: Decimal
    final_diagnosis: Optional[ErrorDiagnosis] = None
    case_dir: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "reflections": self.reflections,
            "usage_by_role": {k: list(v) for k, v in self.usage_by_role.items()},
            "cost_usd": str(self.cost_usd),
            "final_diagnosis": None
            if self.final_diagnosis is None
            else {
                "category": self.final_diagnosis.category.value,
                "target_file": self.final_diagnosis.target_file,
                "missing_name": self.final_diagnosis.missing_name,
            },
            "case_dir": self.case_dir,
        }


@dataclass
class ReflectionState:
    """Mutable bookkeeping for one run."""

    iteration: int = 0
    history: ErrorHistory = field(default_factory=ErrorHistory)
    patched_files: List[str] = field(default_factory=list)


# --- executors ---------------------------------------------------------------


@dataclass(frozen=True)
class ExecutionResult:
    exit_code: Optional[int]
    log_text: str
    timed_out: bool = False

    @property
    def succeeded(self) -> bool:
        return self.exit_code == 0 and not self.timed_out


class Executor(Protocol):
    def convert_mesh(self, msh_path: Path, case_dir: Path) -> str: ...

    def run_solver(self, solver: str, case_dir: Path, timeout: float) -> ExecutionResult: ...


class RealExecutor:
    """Runs fluentMeshToFoam and the solver as supervised child processes."""

    def _run(self, argv: Sequence[str], cwd: Path, timeout: float) -> Tuple[Optional[int], str, bool]:
        process = subprocess.Popen(
            argv,
            cwd=cwd,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            text=True,
        )
        try:
            output, _ = process.communicate(timeout=timeout)
            return process.returncode, output or "", False
        except subprocess.TimeoutExpired as exc:
            process.kill()
            remainder, _ = process.communicate()
            partial = (exc.output or "") + (remainder or "")
            return None, partial, True

    def convert_mesh(self, msh_path: Path, case_dir: Path) -> str:
        code, output, timed_out = self._run(
            ["fluentMeshToFoam", str(msh_path)], cwd=case_dir, timeout=3600.0
        )
        if timed_out or code != 0:
            tail = "\n".join(output.splitlines()[-20:])
            raise ConversionError(f"fluentMeshToFoam exited with {code}: {tail}")
        return output

    def run_solver(self, solver: str, case_dir: Path, timeout: float) -> ExecutionResult:
        code, output, timed_out = self._run([solver], cwd=case_dir, timeout=timeout)
        return ExecutionResult(exit_code=code, log_text=output, timed_out=timed_out)


@dataclass
class ScriptedRun:
    log_text: str
    exit_code: int = 0
    write_times: Tuple[str, ...] = ()
    timeout: bool = False


class SimulatedExecutor:
    """Installs a pre-converted polyMesh fixture and replays scripted solver runs."""

    def __init__(self, polymesh_fixture: Optional[Path], runs: Sequence[ScriptedRun]) -> None:
        self.polymesh_fixture = Path(polymesh_fixture) if polymesh_fixture else None
        self._runs = list(runs)
        self.invocations = 0

    def convert_mesh(self, msh_path: Path, case_dir: Path) -> str:
        if not Path(msh_path).is_file():
            raise ConversionError(f"mesh file {msh_path} does not exist")
        if self.polymesh_fixture is None:
            raise ConversionError("simulated executor has no polyMesh fixture configured")
        target = case_dir / "constant" / "polyMesh"
        target.mkdir(parents=True, exist_ok=True)
        for entry in sorted(self.polymesh_fixture.iterdir()):
            if entry.is_file():
                shutil.copy(entry, target / entry.name)
        return "simulated mesh conversion: installed polyMesh fixture\n"

    def run_solver(self, solver: str, case_dir: Path, timeout: float) -> ExecutionResult:
        if self.invocations >= len(self._runs):
            raise AssertionError("simulated executor script exhausted")
        run = self._runs[self.invocations]
        self.invocations += 1
        if run.timeout:
            return ExecutionResult(exit_code=None, log_text=run.log_text, timed_out=True)
        for time_name in run.write_times:
            (case_dir / time_name).mkdir(exist_ok=True)
        return ExecutionResult(exit_code=run.exit_code, log_text=run.log_text)


def executor_from_env(
    polymesh_fixture: Optional[Path] = None,
    runs: Sequence[ScriptedRun] = (),
    env: Optional[dict] = None,
) -> Executor:
    mode = (env or os.environ).get(EXECUTOR_ENV_VAR, "real").lower()
    if mode == "simulated":
        return SimulatedExecutor(polymesh_fixture, runs)
    return RealExecutor()


# --- deployment and temporal configuration -----------------------------------


def deploy_case(generated: GeneratedCase, work_dir) -> Path:
    """Serialize every generated file under work_dir; round-trip verified."""
    case_dir = Path(work_dir)
    if not generated.files:
        raise DeployError("refusing to deploy an empty case")
    if case_dir.exists() and any(case_dir.iterdir()):
        raise DirNotEmptyError(f"deployment target {case_dir} is not empty")
    case_dir.mkdir(parents=True, exist_ok=True)
    try:
        for rel, tree in generated.files.items():
            path = case_dir / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            text = serialize_dictionary(tree)
            path.write_text(text)
            if parse_dictionary(path.read_text()) != tree:
                raise DeployError(f"deployed file {rel} does not round-trip")
    except OSError as exc:
        raise DeployError(f"deployment failed: {exc}") from exc
    return case_dir


@dataclass(frozen=True)
class MeshReport:
    patch_names: Tuple[str, ...]
    cell_count: Optional[int] = None


def read_polymesh_patches(case_dir: Path) -> Tuple[str, ...]:
    boundary_path = Path(case_dir) / "constant" / "polyMesh" / "boundary"
    if not boundary_path.is_file():
        raise ConversionError(f"{boundary_path} missing after conversion")
    tree = parse_dictionary(boundary_path.read_text())
    for key, value in tree.entries:
        if key is None and isinstance(value, FoamList):
            names = [item.keyword for item in value.items if isinstance(item, KeywordEntry)]
            if names:
                return tuple(names)
    raise ConversionError(f"{boundary_path} carries no patch list")


_MSH_ZONE = re.compile(r"\(\s*(?:39|45)\s*\(\s*[0-9a-fA-F]+\s+([\w-]+)\s+([\w.:-]+)\s*\)")
_MSH_INTERNAL_ZONES = {"interior", "fluid", "solid"}


def scan_msh_patches(msh_path) -> Tuple[str, ...]:
    """Boundary zone names from a Fluent-format mesh header scan."""
    path = Path(msh_path)
    if not path.is_file():
        raise ConversionError(f"mesh file {path} does not exist")
    names: List[str] = []
    for match in _MSH_ZONE.finditer(path.read_text(errors="replace")):
        zone_type, name = match.groups()
        if zone_type.lower() in _MSH_INTERNAL_ZONES:
            continue
        names.append(name)
    return tuple(names)


_CELL_COUNT = re.compile(r"cells:\s*(\d+)", re.IGNORECASE)


def convert_mesh(msh_path, case_dir, executor: Executor) -> MeshReport:
    msh_path = Path(msh_path)
    case_dir = Path(case_dir)
    if not msh_path.is_file():
        raise ConversionError(f"mesh file {msh_path} does not exist")
    output = executor.convert_mesh(msh_path, case_dir)
    patches = read_polymesh_patches(case_dir)
    cell_match = _CELL_COUNT.search(output or "")
    return MeshReport(patch_names=patches, cell_count=int(cell_match.group(1)) if cell_match else None)


def _format_time(value: float) -> float:
    return float(f"{value:.9g}")


def configure_temporal(case_dir, spec: CaseSpecification, cfg: RunConfig) -> FoamDict:
    """Set the ten-step run window and write controls in system/controlDict."""
    control_path = Path(case_dir) / "system" / "controlDict"
    if not control_path.is_file():
        raise MissingControlDictError(f"{control_path} is missing")
    tree = parse_dictionary(control_path.read_text())
    steps = cfg.steady_steps
    write_every = cfg.write_steps[1] if len(cfg.write_steps) > 1 else steps

    tree = tree.with_entry("startTime", 0)
    tree = tree.with_entry("startFrom", "startTime")
    tree = tree.with_entry("stopAt", "endTime")
    if spec.time_mode is TimeMode.STEADY:
        tree = tree.with_entry("deltaT", 1)
        tree = tree.with_entry("endTime", steps)
        tree = tree.with_entry("writeControl", "timeStep")
        tree = tree.with_entry("writeInterval", write_every)
    else:
        delta = (
            cfg.delta_t_compressible
            if spec.flow_regime is FlowRegime.COMPRESSIBLE
            else cfg.delta_t_incompressible
        )
        tree = tree.with_entry("deltaT", delta)
        tree = tree.with_entry("endTime", _format_time(steps * delta))
        tree = tree.with_entry("writeControl", "runTime")
        tree = tree.with_entry("writeInterval", _format_time(write_every * delta))
        if spec.solver in max_courant_solvers():
            tree = tree.with_entry("maxCo", cfg.max_courant)
    control_path.write_text(serialize_dictionary(tree))
    return tree


def execute_solver(case_dir, spec: CaseSpecification, executor: Executor, cfg: RunConfig) -> ExecutionResult:
    """Run the solver, appending its output verbatim to case_run.log."""
    case_dir = Path(case_dir)
    result = executor.run_solver(spec.solver, case_dir, timeout=cfg.solver_timeout)
    with open(case_dir / RUN_LOG_NAME, "a") as log:
        log.write(result.log_text)
    return result


# --- log analysis -------------------------------------------------------------


_FATAL_START = re.compile(r"-->\s*FOAM FATAL(?: IO)? ERROR.*", re.IGNORECASE)
_NUMBER = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_PATHISH = re.compile(r"\S*/\S*")


def first_fatal_block(log_text: str) -> str:
    lines = log_text.splitlines()
    for i, line in enumerate(lines):
        if _FATAL_START.search(line):
            block = []
            for out_line in lines[i:]:
                block.append(out_line)
                if "FOAM exiting" in out_line or "FOAM aborting" in out_line:
                    break
            return "\n".join(block)
    return "\n".join(lines[-30:])


def evidence_hash(evidence: str) -> str:
    """Stable hash of a fatal block with paths and numbers masked out."""
    masked = _PATHISH.sub("<path>", evidence)
    masked = _NUMBER.sub("#", masked)
    masked = " ".join(masked.split())
    return hashlib.sha256(masked.encode()).hexdigest()[:16]


_MISSING_FILE_PATTERNS = (
    re.compile(r'cannot find file "([^"]+)"', re.IGNORECASE),
    re.compile(r'cannot open file "?([^\s"]+)"?', re.IGNORECASE),
    re.compile(r"Entry '[^']+' not found in dictionary \"?([^\s\"]+)\"?"),
)

_DIMENSION_PATTERNS = (
    re.compile(r"incompatible dimensions for operation", re.IGNORECASE),
    re.compile(r"different dimensions for", re.IGNORECASE),
    re.compile(r"dimensions? .*do(?:es)? not match", re.IGNORECASE),
    re.compile(r"wrong dimensions", re.IGNORECASE),
)

# [fieldName[0 2 -2 0 0 0 0] ] operand mentions inside dimension errors
_DIM_OPERAND = re.compile(r"\[(\w+)\s*\[[-\d ]+\]\s*\]")


def _relative_case_path(raw: str, case_dir: Optional[Path]) -> str:
    path = raw.replace("\\", "/").strip().strip('"')
    if case_dir is not None:
        try:
            return str(Path(path).resolve().relative_to(Path(case_dir).resolve()))
        except ValueError:
            pass
    parts = path.split("/")
    for i, part in enumerate(parts):
        if part in ("0", "0.orig", "constant", "system") and i + 1 < len(parts):
            return "/".join(parts[i:])
    return path.split("/")[-1] if "/" in path else path


def _dot_entry_to_path(raw: str) -> str:
    # "0/p.boundaryField.inlet" -> "0/p"
    head = raw.split(".", 1)[0]
    return head


def rule_prescan(
    log_text: str, case_dir: Optional[Path] = None
) -> Optional[ErrorDiagnosis]:
    """Deterministic first pass for the two highly patterned categories."""
    evidence = first_fatal_block(log_text)

    for pattern in _MISSING_FILE_PATTERNS:
        match = pattern.search(evidence)
        if match:
            rel = _dot_entry_to_path(_relative_case_path(match.group(1), case_dir))
            return ErrorDiagnosis(
                category=ErrorCategory.MISSING_FILE,
                evidence=evidence,
                target_file=rel,
                missing_name=rel,
            )

    if any(p.search(evidence) for p in _DIMENSION_PATTERNS):
        target = None
        for name in _DIM_OPERAND.findall(evidence):
            try:
                expected_dimensions(name, FlowRegime.INCOMPRESSIBLE)
            except UnknownFieldError:
                continue
            target = f"0/{name}"
            break
        return ErrorDiagnosis(
            category=ErrorCategory.DIMENSION, evidence=evidence, target_file=target
        )

    return None


def _confirm_with_editor(
    session: GatewaySession,
    question: str,
    evidence: str,
    fallback: Optional[str],
    purpose: str,
) -> Optional[str]:
    prompt = wrap_thought(
        f"{question}\nAnswer with the case-relative file path only.\n\nSolver log:\n{evidence}"
    )
    text, _ = session.complete(LlmRole.EDITOR, [{"role": "user", "content": prompt}], purpose)
    answer = extract_answer(text).strip().strip('"')
    if re.fullmatch(r"(0|constant|system)/[\w.:+-]+", answer):
        return answer
    return fallback


def classify_error(
    log_text: str,
    history: ErrorHistory,
    session: GatewaySession,
    context: CaseContext,
    cfg: RunConfig,
    case_dir: Optional[Path] = None,
) -> ErrorDiagnosis:
    """Assign one of the four categories to a failed run.

    Precedence: persistent escalation wraps whatever the incoming diagnosis
    would be; dimension and missing-file come from rules plus an Editor
    confirmation; everything else is localized by the Reasoner against the
    case context.
    """
    evidence = first_fatal_block(log_text)
    candidate = rule_prescan(log_text, case_dir=case_dir)

    if candidate is not None and candidate.category is ErrorCategory.MISSING_FILE:
        confirmed = _confirm_with_editor(
            session,
            "A case file is missing. Which file does the log point to?",
            evidence,
            fallback=candidate.missing_name,
            purpose="missing-file-confirmation",
        )
        candidate = ErrorDiagnosis(
            category=ErrorCategory.MISSING_FILE,
            evidence=evidence,
            target_file=confirmed,
            missing_name=confirmed,
        )
    elif candidate is not None and candidate.category is ErrorCategory.DIMENSION:
        confirmed = _confirm_with_editor(
            session,
            "This is a physical-dimension mismatch. Which case file carries the wrong dimensions?",
            evidence,
            fallback=candidate.target_file,
            purpose="dimension-localization",
        )
        candidate = ErrorDiagnosis(
            category=ErrorCategory.DIMENSION, evidence=evidence, target_file=confirmed
        )
    else:
        candidate = _classify_general(evidence, session, context)

    ev_hash = evidence_hash(candidate.evidence)
    run = history.trailing_run(candidate.category, candidate.target_file, ev_hash)
    if run + 1 >= cfg.persistent_threshold and candidate.target_file:
        return ErrorDiagnosis(
            category=ErrorCategory.PERSISTENT,
            evidence=candidate.evidence,
            target_file=candidate.target_file,
            missing_name=None,
        )
    return candidate


def _classify_general(
    evidence: str, session: GatewaySession, context: CaseContext
) -> ErrorDiagnosis:
    paths = context.paths()
    prompt = (
        "A solver run failed for a reason other than dimensions or a missing "
        "file. Identify the configuration file that causes it.\n"
        f"Files in the case: {', '.join(paths)}\n"
        "Answer with exactly one path from that list.\n\n"
        f"Solver log:\n{evidence}"
    )
    text, _ = session.complete(
        LlmRole.REASONER, [{"role": "user", "content": prompt}], "error-localization"
    )
    answer = extract_answer(text).strip().strip('"')
    if answer not in paths:
        retry = (
            f"{answer!r} is not one of the case files. "
            f"Answer with exactly one of: {', '.join(paths)}"
        )
        text, _ = session.complete(
            LlmRole.REASONER,
            [
                {"role": "user", "content": prompt},
                {"role": "assistant", "content": text},
                {"role": "user", "content": retry},
            ],
            "error-localization-retry",
        )
        answer = extract_answer(text).strip().strip('"')
        if answer not in paths:
            raise ClassificationError(
                f"model named {answer!r}, which is not a file in the case context"
            )
    return ErrorDiagnosis(
        category=ErrorCategory.GENERAL, evidence=evidence, target_file=answer
    )


# --- corrections ---------------------------------------------------------------


def _check_spec_preservation(path: str, tree: FoamDict, spec: CaseSpecification) -> List[str]:
    if not path.startswith("0/") or not is_field_file(tree):
        return []
    try:
        ff = field_file_from_tree(tree, name=path.split("/", 1)[1])
    except FieldFileError as exc:
        return [str(exc)]
    problems = []
    for patch in ff.patch_names:
        bspec = spec.boundaries.get(patch)
        if bspec is None:
            continue
        wanted = bspec.effective_type(ff.name)
        actual = ff.boundary_type(patch)
        if actual != wanted:
            problems.append(f"{path}: patch {patch!r} type {actual!r} != spec {wanted!r}")
    return problems


def _parse_patched(
    session: GatewaySession,
    role: LlmRole,
    messages: List[dict],
    purpose: str,
) -> Tuple[FoamDict, str]:
    """One exchange plus a single re-ask when the patched text does not parse."""
    text, _ = session.complete(role, messages, purpose)
    body = extract_answer(text)
    try:
        return parse_dictionary(body), body
    except FoamSyntaxError as first_error:
        retry_messages = messages + [
            {"role": "assistant", "content": text},
            {
                "role": "user",
                "content": (
                    f"That file does not parse: {first_error}. "
                    "Reply with the complete corrected file text only."
                ),
            },
        ]
        text, _ = session.complete(role, retry_messages, purpose + "-retry")
        body = extract_answer(text)
        try:
            return parse_dictionary(body), body
        except FoamSyntaxError as second_error:
            raise CorrectionError(
                f"{purpose}: patched file failed parsing twice ({second_error})"
            ) from second_error


def _references_for(
    kb: KnowledgeBase, spec: CaseSpecification, path: str, k: int
) -> Optional[ReferenceBundle]:
    try:
        return retrieve_references(kb, spec, path, k=k)
    except NoCandidatesError:
        return None


def _references_text(references: Optional[ReferenceBundle]) -> str:
    if not references:
        return ""
    blocks = [
        f"--- reference {item.case_id}:{item.path} ---\n{serialize_dictionary(item.tree)}"
        for item in references
    ]
    return "\nReference files:\n" + "\n".join(blocks)


def _boundary_contract(spec: CaseSpecification, field_name: str, patches: Sequence[str]) -> str:
    lines = []
    for patch in patches:
        bspec = spec.boundaries.get(patch)
        if bspec is not None:
            lines.append(f"  {patch}: {bspec.effective_type(field_name)}")
    return "Per-patch boundary types to preserve exactly:\n" + "\n".join(lines)


@dataclass(frozen=True)
class CorrectionResult:
    patched_files: Tuple[str, ...]
    category: ErrorCategory


def correct(
    diagnosis: ErrorDiagnosis,
    case_dir,
    spec: CaseSpecification,
    kb: KnowledgeBase,
    session: GatewaySession,
    cfg: RunConfig,
) -> CorrectionResult:
    """Dispatch one correction for the diagnosed category and write the patch."""
    case_dir = Path(case_dir)
    mesh_patches: Set[str] = set()
    try:
        mesh_patches = set(read_polymesh_patches(case_dir))
    except ConversionError:
        mesh_patches = set(spec.boundaries)

    if diagnosis.category is ErrorCategory.DIMENSION:
        return _correct_dimension(diagnosis, case_dir, spec, kb, session, cfg)
    if diagnosis.category is ErrorCategory.MISSING_FILE:
        return _correct_missing_file(diagnosis, case_dir, spec, kb, session, cfg, mesh_patches)
    if diagnosis.category is ErrorCategory.PERSISTENT:
        return _correct_persistent(diagnosis, case_dir, spec, kb, session, cfg)
    return _correct_general(diagnosis, case_dir, spec, kb, session, cfg)


def _finalize_patch(
    path: str, tree: FoamDict, case_dir: Path, spec: CaseSpecification, category: ErrorCategory
) -> CorrectionResult:
    problems = _check_spec_preservation(path, tree, spec)
    if problems:
        raise CorrectionError("; ".join(problems))
    target = case_dir / path
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(serialize_dictionary(tree))
    return CorrectionResult(patched_files=(path,), category=category)


def _expected_dims_note(path: str, spec: CaseSpecification) -> str:
    if not path.startswith("0/") or spec.flow_regime is FlowRegime.UNKNOWN:
        return ""
    name = path.split("/", 1)[1]
    try:
        dims = expected_dimensions(name, spec.flow_regime)
    except UnknownFieldError:
        return ""
    return f"For a {spec.flow_regime.value} run, {name} must carry dimensions {dims}."


def _correct_dimension(
    diagnosis: ErrorDiagnosis,
    case_dir: Path,
    spec: CaseSpecification,
    kb: KnowledgeBase,
    session: GatewaySession,
    cfg: RunConfig,
) -> CorrectionResult:
    path = diagnosis.target_file or "0/p"
    current = (case_dir / path).read_text() if (case_dir / path).is_file() else ""
    references = _references_for(kb, spec, path, cfg.reference_count)
    prompt = wrap_thought(
        f"The file {path} carries wrong physical dimensions.\n"
        f"{_expected_dims_note(path, spec)}\n"
        "Rewrite the file with corrected dimensions, changing nothing else.\n"
        "Reply with the complete corrected file text only.\n\n"
        f"Current file:\n{current}\n"
        f"Solver log:\n{diagnosis.evidence}\n"
        f"{_references_text(references)}"
    )
    tree, _ = _parse_patched(
        session, LlmRole.EDITOR, [{"role": "user", "content": prompt}], "dimension-fix"
    )
    return _finalize_patch(path, tree, case_dir, spec, ErrorCategory.DIMENSION)


def _correct_missing_file(
    diagnosis: ErrorDiagnosis,
    case_dir: Path,
    spec: CaseSpecification,
    kb: KnowledgeBase,
    session: GatewaySession,
    cfg: RunConfig,
    mesh_patches: Set[str],
) -> CorrectionResult:
    path = diagnosis.missing_name or ""
    references = _references_for(kb, spec, path, cfg.reference_count)
    context = build_context(case_dir)
    field_name = path.split("/", 1)[1] if path.startswith("0/") else ""
    contract = (
        _boundary_contract(spec, field_name, sorted(mesh_patches)) if field_name else ""
    )
    prompt = (
        f"The case is missing the file {path}. Generate it, consistent with the "
        "existing configuration: same boundary patches, correct dimensions, and "
        "solver settings that match the rest of the case.\n"
        f"Boundary patches: {sorted(mesh_patches)}\n"
        f"{contract}\n"
        f"{_expected_dims_note(path, spec)}\n"
        "Reply with the complete file text only.\n\n"
        f"Current case files:\n{context.to_json()}\n"
        f"{_references_text(references)}"
    )
    tree, _ = _parse_patched(
        session, LlmRole.REASONER, [{"role": "user", "content": prompt}], "missing-file-generation"
    )
    if path.startswith("0/") and mesh_patches:
        try:
            ff = field_file_from_tree(tree, name=field_name)
            if set(ff.patch_names) != mesh_patches:
                raise CorrectionError(
                    f"{path}: generated patches {sorted(ff.patch_names)} != mesh {sorted(mesh_patches)}"
                )
        except FieldFileError as exc:
            raise CorrectionError(f"{path}: {exc}") from exc
    return _finalize_patch(path, tree, case_dir, spec, ErrorCategory.MISSING_FILE)


def _correct_persistent(
    diagnosis: ErrorDiagnosis,
    case_dir: Path,
    spec: CaseSpecification,
    kb: KnowledgeBase,
    session: GatewaySession,
    cfg: RunConfig,
) -> CorrectionResult:
    path = diagnosis.target_file or ""
    current = (case_dir / path).read_text() if (case_dir / path).is_file() else ""
    references = _references_for(kb, spec, path, cfg.reference_count)
    prompt = wrap_thought(
        f"The file {path} keeps failing after repeated corrections. Rewrite it "
        "from scratch, guided by the reference files, while keeping the case's "
        "boundary patches, types, and values.\n"
        "Reply with the complete rewritten file text only.\n\n"
        f"Original file:\n{current}\n"
        f"Solver log:\n{diagnosis.evidence}\n"
        f"{_references_text(references)}"
    )
    tree, _ = _parse_patched(
        session, LlmRole.EDITOR, [{"role": "user", "content": prompt}], "persistent-rewrite"
    )
    return _finalize_patch(path, tree, case_dir, spec, ErrorCategory.PERSISTENT)


def _correct_general(
    diagnosis: ErrorDiagnosis,
    case_dir: Path,
    spec: CaseSpecification,
    kb: KnowledgeBase,
    session: GatewaySession,
    cfg: RunConfig,
) -> CorrectionResult:
    path = diagnosis.target_file or ""
    current = (case_dir / path).read_text() if (case_dir / path).is_file() else ""
    references = _references_for(kb, spec, path, cfg.reference_count)

    advice_prompt = (
        f"The file {path} causes the failure below. Give numbered step-by-step "
        "instructions to fix it. Keep all initial and boundary conditions "
        "exactly as they are; touch only what the fix requires.\n\n"
        f"Erroneous file:\n{current}\n"
        f"Solver log:\n{diagnosis.evidence}\n"
        f"{_references_text(references)}"
    )
    advice, _ = session.complete(
        LlmRole.REASONER, [{"role": "user", "content": advice_prompt}], "correction-proposal"
    )

    apply_prompt = wrap_thought(
        f"Apply these correction steps to {path}, changing nothing else and "
        "keeping dimensions consistent.\n"
        f"Steps:\n{extract_answer(advice)}\n\n"
        f"Current file:\n{current}\n"
        "Reply with the complete corrected file text only."
    )
    tree, _ = _parse_patched(
        session, LlmRole.EDITOR, [{"role": "user", "content": apply_prompt}], "correction-application"
    )
    return _finalize_patch(path, tree, case_dir, spec, ErrorCategory.GENERAL)


# --- success verification and the loop ----------------------------------------


_TIME_LINE = re.compile(r"^Time = ([0-9eE+.-]+)\s*$", re.MULTILINE)


def _final_time(log_text: str) -> Optional[float]:
    times = _TIME_LINE.findall(log_text)
    if not times:
        return None
    try:
        return float(times[-1])
    except ValueError:
        return None


def verify_ten_steps(case_dir: Path, spec: CaseSpecification, cfg: RunConfig, log_text: str) -> bool:
    final = _final_time(log_text)
    if spec.time_mode is TimeMode.STEADY:
        if final is None or final < cfg.steady_steps:
            return False
        wanted = [str(step) for step in cfg.write_steps]
    else:
        delta = (
            cfg.delta_t_compressible
            if spec.flow_regime is FlowRegime.COMPRESSIBLE
            else cfg.delta_t_incompressible
        )
        if final is None or final < cfg.steady_steps * delta * (1 - 1e-9):
            return False
        wanted = []
        for step in cfg.write_steps:
            target = step * delta
            hit = any(
                _times_close(d.name, target) for d in Path(case_dir).iterdir() if d.is_dir()
            )
            if step == 0:
                hit = hit or (Path(case_dir) / "0").is_dir()
            if not hit:
                return False
        return True
    return all((Path(case_dir) / name).is_dir() for name in wanted)


def _times_close(name: str, target: float) -> bool:
    try:
        return abs(float(name) - target) <= 1e-12 + 1e-6 * abs(target)
    except ValueError:
        return False


def _append_manifest(case_dir: Path, record: dict) -> None:
    with open(case_dir / MANIFEST_NAME, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def reflect_loop(
    generated: GeneratedCase,
    msh_path,
    work_dir,
    kb: KnowledgeBase,
    session: GatewaySession,
    executor: Executor,
    cfg: Optional[RunConfig] = None,
    on_event=None,
) -> RunOutcome:
    """Deploy, convert, configure, then execute-classify-correct to ten steps."""
    cfg = cfg or RunConfig()
    spec = generated.spec
    emit = on_event or (lambda kind, payload: None)

    def outcome(status: RunStatus, state: ReflectionState, diagnosis=None, case_dir=None):
        usage = {
            role.value: (u.input_tokens, u.output_tokens)
            for role, u in session.usage_by_role().items()
        }
        return RunOutcome(
            status=status,
            reflections=state.iteration,
            usage_by_role=usage,
            cost_usd=session.cost(),
            final_diagnosis=diagnosis,
            case_dir=str(case_dir) if case_dir else None,
        )

    state = ReflectionState()
    try:
        case_dir = deploy_case(generated, work_dir)
        convert_mesh(msh_path, case_dir, executor)
        configure_temporal(case_dir, spec, cfg)
    except (DeployError, ConversionError, MissingControlDictError, OSError) as exc:
        emit("hard-failure", {"error": str(exc)})
        return outcome(RunStatus.HARD_FAILURE, state)

    while True:
        result = execute_solver(case_dir, spec, executor, cfg)
        if result.succeeded and verify_ten_steps(case_dir, spec, cfg, result.log_text):
            emit("run-succeeded", {"reflections": state.iteration})
            return outcome(RunStatus.TEN_STEP_SUCCESS, state, case_dir=case_dir)

        log_text = result.log_text
        if result.timed_out:
            log_text += "\nsolver run killed: timeout exceeded\n"
        context = build_context(case_dir)
        try:
            diagnosis = classify_error(
                log_text, state.history, session, context, cfg, case_dir=case_dir
            )
        except ClassificationError as exc:
            emit("hard-failure", {"error": str(exc)})
            return outcome(RunStatus.HARD_FAILURE, state)

        if state.iteration >= cfg.max_reflections:
            emit("exhausted", {"reflections": state.iteration})
            return outcome(RunStatus.EXHAUSTED, state, diagnosis=diagnosis, case_dir=case_dir)

        state.history.append(state.iteration, diagnosis)
        try:
            correction = correct(diagnosis, case_dir, spec, kb, session, cfg)
        except CorrectionError as exc:
            emit("hard-failure", {"error": str(exc)})
            return outcome(RunStatus.HARD_FAILURE, state, diagnosis=diagnosis, case_dir=case_dir)

        state.iteration += 1
        state.patched_files.extend(correction.patched_files)
        usage = {
            role.value: [u.input_tokens, u.output_tokens]
            for role, u in session.usage_by_role().items()
        }
        record = {
            "iteration": state.iteration,
            "category": diagnosis.category.value,
            "target_file": diagnosis.target_file,
            "missing_name": diagnosis.missing_name,
            "patched_files": list(correction.patched_files),
            "usage_by_role": usage,
        }
        _append_manifest(case_dir, record)
        emit("iteration-completed", record)
