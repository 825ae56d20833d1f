"""Case construction: file-list derivation, hierarchical extraction from a
document, boundary validation against the shipped type catalog, and full
case generation through the Reasoner with per-file validation."""

from __future__ import annotations

import difflib
import enum
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

from .foamdict import (
    FieldFileError,
    FlowRegime,
    FoamDict,
    FoamHeader,
    FoamSyntaxError,
    expected_dimensions,
    field_file_from_tree,
    header_of,
    is_field_file,
    parse_dictionary,
    with_header,
)
from .foamdict.dimensions import UnknownFieldError
from .knowledge import KnowledgeBase, steady_solvers
from .llm import GatewaySession, LlmRole, extract_answer, strip_code_fences
from .retrieval import ReferenceBundle, Segment, filter_segments


class ExtractionError(Exception):
    """A hierarchical-extraction step failed schema validation twice."""


class GenerationError(Exception):
    """Generated files failed validation even after one regeneration."""


class TimeMode(enum.Enum):
    STEADY = "steady"
    TRANSIENT = "transient"


# --- boundary-type catalog ---------------------------------------------------


class BoundaryCatalog:
    """Boundary-condition type names with the field classes they apply to."""

    def __init__(self, types: Mapping[str, Sequence[str]]) -> None:
        self._types = {name: tuple(classes) for name, classes in types.items()}
        self._lower = {name.lower(): name for name in self._types}

    @classmethod
    def shipped(cls) -> "BoundaryCatalog":
        raw = resources.files("foamwright.data").joinpath("boundary_types.json").read_text()
        return cls(json.loads(raw)["types"])

    def __contains__(self, name: str) -> bool:
        return name in self._types

    def names(self) -> Tuple[str, ...]:
        return tuple(sorted(self._types))

    def suggest(self, name: str) -> Optional[str]:
        """Closest catalog spelling for a near-miss, None when nothing is close."""
        if name in self._types:
            return None
        if name.lower() in self._lower:
            return self._lower[name.lower()]
        close = difflib.get_close_matches(name, self._types.keys(), n=1, cutoff=0.8)
        return close[0] if close else None

    def canonicalize(self, name: str) -> Tuple[str, bool]:
        """(canonical spelling, was_corrected); unknown names pass through."""
        if name in self._types:
            return name, False
        suggestion = self.suggest(name)
        return (suggestion, True) if suggestion else (name, False)


_CATALOG = BoundaryCatalog.shipped()


def shipped_catalog() -> BoundaryCatalog:
    return _CATALOG


# --- specification -----------------------------------------------------------


@dataclass(frozen=True)
class BoundarySpec:
    bc_type: str
    per_field_types: Mapping[str, str] = field(default_factory=dict)
    per_field_values: Mapping[str, str] = field(default_factory=dict)

    def effective_type(self, field_name: str) -> str:
        return self.per_field_types.get(field_name, self.bc_type)


@dataclass(frozen=True)
class CaseSpecification:
    solver: str
    turbulence_model: Optional[str] = None
    thermo_model: Optional[str] = None
    flow_regime: FlowRegime = FlowRegime.UNKNOWN
    time_mode: TimeMode = TimeMode.STEADY
    boundaries: Mapping[str, BoundarySpec] = field(default_factory=dict)
    initial_fields: Mapping[str, str] = field(default_factory=dict)
    free_text: str = ""
    source_ref: str = ""
    declared_boundary_types: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for patch in self.boundaries:
            if not patch or any(ch.isspace() for ch in patch):
                raise ValueError(f"invalid patch name {patch!r}")


def infer_time_mode(solver: str) -> TimeMode:
    return TimeMode.STEADY if solver in steady_solvers() else TimeMode.TRANSIENT


# --- boundary validation -----------------------------------------------------


class FindingKind(enum.Enum):
    SPEC_PATCH_MISSING_FROM_MESH = "spec-patch-missing-from-mesh"
    MESH_PATCH_MISSING_FROM_SPEC = "mesh-patch-missing-from-spec"
    UNKNOWN_BOUNDARY_TYPE = "unknown-boundary-type"
    NEAR_MISS_BOUNDARY_TYPE = "near-miss-boundary-type"
    DECLARED_TYPE_MISMATCH = "declared-type-mismatch"


@dataclass(frozen=True)
class Finding:
    kind: FindingKind
    patch: str
    detail: str
    suggestion: Optional[str] = None


@dataclass(frozen=True)
class ValidationReport:
    findings: Tuple[Finding, ...] = ()

    @property
    def clean(self) -> bool:
        return not self.findings

    def of_kind(self, kind: FindingKind) -> Tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.kind is kind)


def validate_boundaries(
    spec: CaseSpecification,
    mesh_patches: Set[str],
    catalog: Optional[BoundaryCatalog] = None,
) -> ValidationReport:
    """Cross-check spec patches and types against the mesh and the catalog."""
    catalog = catalog or _CATALOG
    findings: List[Finding] = []

    for patch in sorted(spec.boundaries):
        if patch not in mesh_patches:
            findings.append(
                Finding(
                    FindingKind.SPEC_PATCH_MISSING_FROM_MESH,
                    patch,
                    f"patch {patch!r} is specified but absent from the mesh",
                )
            )
    for patch in sorted(mesh_patches):
        if patch not in spec.boundaries:
            findings.append(
                Finding(
                    FindingKind.MESH_PATCH_MISSING_FROM_SPEC,
                    patch,
                    f"mesh patch {patch!r} has no boundary specification",
                )
            )

    for patch, bspec in sorted(spec.boundaries.items()):
        types = {bspec.bc_type, *bspec.per_field_types.values()}
        for bc_type in sorted(types):
            if bc_type in catalog:
                continue
            suggestion = catalog.suggest(bc_type)
            if suggestion:
                findings.append(
                    Finding(
                        FindingKind.NEAR_MISS_BOUNDARY_TYPE,
                        patch,
                        f"type {bc_type!r} is not catalog spelling",
                        suggestion=suggestion,
                    )
                )
            else:
                findings.append(
                    Finding(
                        FindingKind.UNKNOWN_BOUNDARY_TYPE,
                        patch,
                        f"type {bc_type!r} is not in the boundary-type catalog",
                    )
                )

    # fidelity rule: the document-declared type wins over common practice
    for patch, declared in sorted(spec.declared_boundary_types.items()):
        bspec = spec.boundaries.get(patch)
        if bspec is None:
            continue
        canonical, _ = catalog.canonicalize(declared)
        if bspec.bc_type != canonical and canonical not in bspec.per_field_types.values():
            findings.append(
                Finding(
                    FindingKind.DECLARED_TYPE_MISMATCH,
                    patch,
                    f"document declares {canonical!r} but spec uses {bspec.bc_type!r}",
                    suggestion=canonical,
                )
            )

    return ValidationReport(tuple(findings))


# --- file-list derivation ----------------------------------------------------


def derive_file_list(spec: CaseSpecification, kb: KnowledgeBase) -> Tuple[str, ...]:
    return kb.required_files(spec.solver, spec.turbulence_model, spec.thermo_model)


# --- hierarchical extraction -------------------------------------------------


def _json_payload(text: str) -> dict:
    payload = extract_answer(text)
    start = payload.find("{")
    end = payload.rfind("}")
    if start < 0 or end < start:
        raise ValueError("response carries no JSON object")
    return json.loads(payload[start : end + 1])


def _ask_json(
    session: GatewaySession,
    prompt: str,
    purpose: str,
    validate,
    role: LlmRole = LlmRole.REASONER,
):
    """One exchange plus a single re-ask when the reply fails validation."""
    messages = [{"role": "user", "content": prompt}]
    text, _ = session.complete(role, messages, purpose=purpose)
    try:
        return validate(_json_payload(text))
    except (ValueError, KeyError, TypeError) as first_error:
        retry_messages = messages + [
            {"role": "assistant", "content": text},
            {
                "role": "user",
                "content": (
                    f"That reply could not be used: {first_error}. "
                    "Answer again with exactly one valid JSON object and nothing else."
                ),
            },
        ]
        text, _ = session.complete(role, retry_messages, purpose=purpose + "-retry")
        try:
            return validate(_json_payload(text))
        except (ValueError, KeyError, TypeError) as second_error:
            raise ExtractionError(
                f"{purpose}: reply failed validation twice ({second_error})"
            ) from second_error


def _boundary_step_prompt(segments: Sequence[Segment], catalog: BoundaryCatalog) -> str:
    doc = "\n\n".join(f"[{s.label}]\n{s.text}" for s in segments)
    return (
        "You are configuring an OpenFOAM v2406 case from the document below.\n"
        "Identify the solver, turbulence model, thermophysical model (if any),\n"
        "flow regime, and every boundary patch with its boundary-condition type.\n"
        "Keep the exact boundary types the document declares, even when they are\n"
        "unusual; do not substitute generic inlet/outlet types.\n"
        f"Valid boundary types: {', '.join(catalog.names())}.\n\n"
        "Reply with one JSON object:\n"
        '{"solver": str, "turbulence_model": str|null, "thermo_model": str|null,\n'
        ' "flow_regime": "incompressible"|"compressible",\n'
        ' "boundaries": [{"patch": str, "type": str, "declared_type": str|null,\n'
        '                 "field_types": {field: type, ...}}]}\n\n'
        f"Document:\n{doc}"
    )


def _values_step_prompt(field_files: Sequence[str], patches: Sequence[str], doc: str) -> str:
    return (
        "Extract the initial and boundary values for every field file listed,\n"
        "using only the document. Value literals use OpenFOAM syntax, e.g.\n"
        '"uniform 0" or "uniform (25.75 4.54 0)".\n\n'
        f"Field files: {', '.join(field_files)}\n"
        f"Patches: {', '.join(patches)}\n\n"
        "Reply with one JSON object:\n"
        '{"initial_fields": {field: literal, ...},\n'
        ' "boundary_values": {patch: {field: literal, ...}, ...}}\n\n'
        f"Document:\n{doc}"
    )


def extract_case_spec(
    document: Sequence[Segment],
    session: GatewaySession,
    kb: KnowledgeBase,
    source_ref: str = "",
    threshold: float = 0.15,
    catalog: Optional[BoundaryCatalog] = None,
) -> CaseSpecification:
    """Three-step extraction: boundaries, field values, spec assembly."""
    if not document:
        raise ExtractionError("document is empty")
    catalog = catalog or _CATALOG

    def check_boundaries(payload: dict) -> dict:
        if not isinstance(payload.get("solver"), str) or not payload["solver"]:
            raise ValueError("missing solver")
        regime = payload.get("flow_regime")
        if regime not in ("incompressible", "compressible"):
            raise ValueError(f"flow_regime must be incompressible|compressible, got {regime!r}")
        boundaries = payload.get("boundaries")
        if not isinstance(boundaries, list) or not boundaries:
            raise ValueError("boundaries must be a nonempty list")
        for b in boundaries:
            if not isinstance(b.get("patch"), str) or not b["patch"].strip():
                raise ValueError("every boundary needs a patch name")
            if not isinstance(b.get("type"), str) or not b["type"]:
                raise ValueError(f"boundary {b.get('patch')!r} needs a type")
        return payload

    step1 = _ask_json(
        session,
        _boundary_step_prompt(document, catalog),
        purpose="boundary-identification",
        validate=check_boundaries,
    )

    solver = step1["solver"]
    turbulence = step1.get("turbulence_model") or None
    thermo = step1.get("thermo_model") or None
    regime = FlowRegime(step1["flow_regime"])

    boundaries: Dict[str, dict] = {}
    declared: Dict[str, str] = {}
    for b in step1["boundaries"]:
        patch = b["patch"].strip()
        bc_type, _ = catalog.canonicalize(b["type"])
        field_types = {
            f: catalog.canonicalize(t)[0] for f, t in (b.get("field_types") or {}).items()
        }
        boundaries[patch] = {"type": bc_type, "field_types": field_types}
        if b.get("declared_type"):
            declared[patch] = b["declared_type"]

    file_list = kb.required_files(solver, turbulence, thermo)
    field_files = [p.split("/", 1)[1] for p in file_list if p.startswith("0/")]

    # the partial spec from step 1 narrows the document for the value step;
    # interactive dialogue segments bypass the relevance filter
    partial = CaseSpecification(
        solver=solver,
        turbulence_model=turbulence,
        thermo_model=thermo,
        flow_regime=regime,
        boundaries={p: BoundarySpec(bc_type=info["type"]) for p, info in boundaries.items()},
    )
    narrowed = filter_segments(document, partial, threshold=threshold)
    kept = {s.label for s in narrowed}
    for seg in document:
        if seg.label.startswith("dialogue") and seg.label not in kept:
            narrowed.append(seg)
            kept.add(seg.label)
    step2_doc = narrowed if narrowed else list(document)
    doc_text = "\n\n".join(f"[{s.label}]\n{s.text}" for s in step2_doc)

    def check_values(payload: dict) -> dict:
        init = payload.get("initial_fields")
        if not isinstance(init, dict):
            raise ValueError("initial_fields must be an object")
        missing = [f for f in field_files if f not in init]
        if missing:
            raise ValueError(f"initial_fields misses {missing}")
        if not isinstance(payload.get("boundary_values", {}), dict):
            raise ValueError("boundary_values must be an object")
        return payload

    step2 = _ask_json(
        session,
        _values_step_prompt(field_files, sorted(boundaries), doc_text),
        purpose="field-values",
        validate=check_values,
    )

    boundary_values = step2.get("boundary_values", {})
    spec_boundaries = {
        patch: BoundarySpec(
            bc_type=info["type"],
            per_field_types=info["field_types"],
            per_field_values=dict(boundary_values.get(patch, {})),
        )
        for patch, info in boundaries.items()
    }

    return CaseSpecification(
        solver=solver,
        turbulence_model=turbulence,
        thermo_model=thermo,
        flow_regime=regime,
        time_mode=infer_time_mode(solver),
        boundaries=spec_boundaries,
        initial_fields=dict(step2["initial_fields"]),
        free_text=doc_text,
        source_ref=source_ref,
        declared_boundary_types=declared,
    )


def relevant_segments(
    document: Sequence[Segment], spec: CaseSpecification, threshold: float = 0.15
) -> List[Segment]:
    return filter_segments(document, spec, threshold=threshold)


# --- generation --------------------------------------------------------------


_FILE_MARK = re.compile(r"^== FILE: (\S+) ==\s*$", re.MULTILINE)


def parse_file_envelope(text: str) -> Dict[str, str]:
    """Split an `== FILE: path ==` envelope into per-path bodies."""
    payload = extract_answer(text)
    marks = list(_FILE_MARK.finditer(payload))
    if not marks:
        raise ValueError("response carries no '== FILE: <path> ==' sections")
    files: Dict[str, str] = {}
    for i, mark in enumerate(marks):
        start = mark.end()
        end = marks[i + 1].start() if i + 1 < len(marks) else len(payload)
        files[mark.group(1)] = strip_code_fences(payload[start:end].strip()) + "\n"
    return files


@dataclass(frozen=True)
class GeneratedCase:
    files: Mapping[str, FoamDict]
    spec: CaseSpecification


_FIELD_CLASSES = {"scalar": "volScalarField", "vector": "volVectorField"}


def _ensure_header(path: str, tree: FoamDict) -> FoamDict:
    if header_of(tree) is not None:
        return tree
    name = path.rsplit("/", 1)[-1]
    if path.startswith("0/"):
        cls = "volVectorField" if name == "U" else "volScalarField"
    else:
        cls = "dictionary"
    location = path.rsplit("/", 1)[0]
    return with_header(tree, FoamHeader(class_name=cls, object_name=name, location=location))


def _apply_expected_dimensions(path: str, tree: FoamDict, regime: FlowRegime) -> FoamDict:
    if not path.startswith("0/") or regime is FlowRegime.UNKNOWN:
        return tree
    name = path.split("/", 1)[1]
    try:
        dims = expected_dimensions(name, regime)
    except UnknownFieldError:
        return tree
    return tree.with_entry("dimensions", dims)


def _validate_generated_file(
    path: str,
    tree: FoamDict,
    spec: CaseSpecification,
    mesh_patches: Set[str],
) -> List[str]:
    problems: List[str] = []
    if not path.startswith("0/"):
        return problems
    if not is_field_file(tree):
        problems.append(f"{path}: not a valid field file (dimensions/boundaryField)")
        return problems
    try:
        ff = field_file_from_tree(tree, name=path.split("/", 1)[1])
    except FieldFileError as exc:
        return [f"{path}: {exc}"]
    patches = set(ff.patch_names)
    if mesh_patches and patches != mesh_patches:
        problems.append(
            f"{path}: boundary patches {sorted(patches)} != mesh patches {sorted(mesh_patches)}"
        )
    for patch in ff.patch_names:
        bspec = spec.boundaries.get(patch)
        if bspec is None:
            continue
        actual = ff.boundary_type(patch)
        wanted = bspec.effective_type(ff.name)
        if actual != wanted:
            problems.append(f"{path}: patch {patch!r} has type {actual!r}, spec says {wanted!r}")
    return problems


def _generation_prompt(
    spec: CaseSpecification,
    file_list: Sequence[str],
    references: Optional[ReferenceBundle],
    mesh_patches: Set[str],
    only: Optional[Sequence[str]] = None,
) -> str:
    from .foamdict import serialize_dictionary

    wanted = list(only) if only else list(file_list)
    boundary_lines = []
    for patch, bspec in sorted(spec.boundaries.items()):
        extras = ", ".join(f"{f}:{t}" for f, t in sorted(bspec.per_field_types.items()))
        boundary_lines.append(
            f"  {patch}: {bspec.bc_type}" + (f" (per-field: {extras})" if extras else "")
        )
    ref_text = ""
    if references:
        blocks = [
            f"--- reference {item.case_id}:{item.path} ---\n{serialize_dictionary(item.tree)}"
            for item in references
        ]
        ref_text = "\nReference files:\n" + "\n".join(blocks)
    return (
        "Generate complete OpenFOAM v2406 case files.\n"
        f"Solver: {spec.solver}; turbulence model: {spec.turbulence_model or 'none'}; "
        f"thermo model: {spec.thermo_model or 'none'}; regime: {spec.flow_regime.value}.\n"
        f"Mesh patches (use exactly these in every boundaryField): {sorted(mesh_patches)}\n"
        "Boundary types (use exactly these spellings):\n" + "\n".join(boundary_lines) + "\n"
        f"Initial fields: {json.dumps(dict(spec.initial_fields), sort_keys=True)}\n"
        "Where the document does not pin numerics (fvSchemes, fvSolution), choose\n"
        "appropriate conservative settings for the flow physics.\n"
        f"Produce exactly these files: {', '.join(wanted)}\n"
        "Format: for each file emit a line '== FILE: <path> ==' followed by the\n"
        "complete dictionary text. No markdown, no commentary."
        + ref_text
    )


def generate_files(
    spec: CaseSpecification,
    file_list: Sequence[str],
    references: Optional[ReferenceBundle],
    session: GatewaySession,
    mesh_patches: Optional[Set[str]] = None,
) -> GeneratedCase:
    """One Reasoner exchange for all files, plus one regeneration round for
    whatever fails validation."""
    mesh_patches = set(mesh_patches or spec.boundaries)
    wanted = set(file_list)

    def attempt(paths: Sequence[str], purpose: str) -> Tuple[Dict[str, FoamDict], List[str]]:
        prompt = _generation_prompt(spec, file_list, references, mesh_patches, only=paths)
        text, _ = session.complete(LlmRole.REASONER, [{"role": "user", "content": prompt}], purpose)
        problems: List[str] = []
        parsed: Dict[str, FoamDict] = {}
        try:
            bodies = parse_file_envelope(text)
        except ValueError as exc:
            return {}, [str(exc)]
        for path, body in bodies.items():
            if path not in wanted:
                problems.append(f"unrequested file {path}")
                continue
            try:
                tree = parse_dictionary(body)
            except FoamSyntaxError as exc:
                problems.append(f"{path}: {exc}")
                continue
            tree = _ensure_header(path, tree)
            tree = _apply_expected_dimensions(path, tree, spec.flow_regime)
            file_problems = _validate_generated_file(path, tree, spec, mesh_patches)
            if file_problems:
                problems.extend(file_problems)
            else:
                parsed[path] = tree
        return parsed, problems

    files, problems = attempt(list(file_list), "file-generation")
    failed = sorted(wanted - set(files))
    if failed:
        regenerated, retry_problems = attempt(failed, "file-regeneration")
        files.update(regenerated)
        still_failed = sorted(wanted - set(files))
        if still_failed:
            raise GenerationError(
                f"files failed generation after one retry: {still_failed}; "
                f"problems: {problems + retry_problems}"
            )
    return GeneratedCase(files={p: files[p] for p in file_list}, spec=spec)
