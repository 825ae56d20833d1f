"""Session workflow: document submission, case extraction and selection, mesh
attachment, and launch of the build-and-run pipeline.

Every mutation appends a numbered event to the session's log; the final state
is a pure fold over that log, which is what the UI consumes.
"""

from __future__ import annotations

import enum
import json
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .builder import (
    CaseSpecification,
    ExtractionError,
    GenerationError,
    derive_file_list,
    extract_case_spec,
    generate_files,
    validate_boundaries,
)
from .knowledge import KnowledgeBase
from .llm import Gateway, GatewaySession, LlmRole
from .retrieval import NoCandidatesError, Segment, retrieve_references
from .runner import (
    Executor,
    RunConfig,
    RunOutcome,
    RunStatus,
    reflect_loop,
    scan_msh_patches,
)


class SessionState(enum.Enum):
    AWAITING_INPUT = "awaiting-input"
    CASES_EXTRACTED = "cases-extracted"
    CASE_SELECTED = "case-selected"
    MESH_ATTACHED = "mesh-attached"
    BUILDING = "building"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


_TRANSITIONS = {
    SessionState.AWAITING_INPUT: {SessionState.CASES_EXTRACTED},
    SessionState.CASES_EXTRACTED: {SessionState.CASE_SELECTED},
    SessionState.CASE_SELECTED: {SessionState.MESH_ATTACHED},
    SessionState.MESH_ATTACHED: {SessionState.BUILDING},
    SessionState.BUILDING: {SessionState.RUNNING, SessionState.FAILED},
    SessionState.RUNNING: {SessionState.COMPLETED, SessionState.FAILED},
    SessionState.COMPLETED: set(),
    SessionState.FAILED: set(),
}


class StateConflictError(Exception):
    """The call is illegal in the session's current state; nothing changed."""


class UnknownSessionError(KeyError):
    pass


class UnknownLabelError(KeyError):
    pass


class UnsupportedFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CaseCandidate:
    label: str
    summary: str
    provenance: Tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"label": self.label, "summary": self.summary, "provenance": list(self.provenance)}


@dataclass(frozen=True)
class SessionEvent:
    number: int
    kind: str
    payload: dict
    timestamp: float

    def to_json(self) -> dict:
        return {
            "number": self.number,
            "kind": self.kind,
            "payload": self.payload,
            "timestamp": self.timestamp,
        }


def spec_to_json(spec: CaseSpecification) -> dict:
    return {
        "solver": spec.solver,
        "turbulence_model": spec.turbulence_model,
        "thermo_model": spec.thermo_model,
        "flow_regime": spec.flow_regime.value,
        "time_mode": spec.time_mode.value,
        "boundaries": {
            patch: {
                "type": b.bc_type,
                "field_types": dict(b.per_field_types),
                "values": dict(b.per_field_values),
            }
            for patch, b in sorted(spec.boundaries.items())
        },
        "initial_fields": dict(spec.initial_fields),
        "source_ref": spec.source_ref,
    }


class Session:
    def __init__(self, session_id: str, workspace: Path) -> None:
        self.id = session_id
        self.workspace = workspace
        self.state = SessionState.AWAITING_INPUT
        self.document: Optional[str] = None
        self.segments: List[Segment] = []
        self.candidates: List[CaseCandidate] = []
        self.pending_spec: Optional[CaseSpecification] = None
        self.chosen: Optional[CaseSpecification] = None
        self.mesh_path: Optional[Path] = None
        self.mesh_patches: Tuple[str, ...] = ()
        self.outcome: Optional[RunOutcome] = None
        self.events: List[SessionEvent] = []
        self.lock = threading.RLock()
        self.new_event = threading.Condition(self.lock)
        self.gateway_session: Optional[GatewaySession] = None
        self.worker: Optional[threading.Thread] = None

    # --- events -------------------------------------------------------------

    def emit(self, kind: str, payload: dict) -> SessionEvent:
        with self.lock:
            event = SessionEvent(
                number=len(self.events) + 1, kind=kind, payload=payload, timestamp=time.time()
            )
            self.events.append(event)
            with open(self.workspace / "events.jsonl", "a") as fh:
                fh.write(json.dumps(event.to_json(), sort_keys=True) + "\n")
            self.new_event.notify_all()
            return event

    def events_after(self, cursor: int) -> List[SessionEvent]:
        with self.lock:
            return [e for e in self.events if e.number > cursor]

    def _transition(self, new_state: SessionState) -> None:
        if new_state not in _TRANSITIONS[self.state]:
            raise StateConflictError(
                f"cannot move from {self.state.value} to {new_state.value}"
            )
        self.state = new_state
        self.emit("state-changed", {"state": new_state.value})

    def require_state(self, *states: SessionState) -> None:
        if self.state not in states:
            allowed = ", ".join(s.value for s in states)
            raise StateConflictError(
                f"operation requires state {allowed}, session is {self.state.value}"
            )


def segment_document(text: str) -> List[Segment]:
    """Paragraph-level segmentation with stable labels."""
    parts = [p.strip() for p in re.split(r"\n\s*\n", text) if p.strip()]
    return [Segment(f"section-{i + 1}", part) for i, part in enumerate(parts)]


def replay_view(events: Sequence[SessionEvent]) -> dict:
    """Reconstruct the externally visible session state from its event log."""
    view: dict = {
        "state": SessionState.AWAITING_INPUT.value,
        "candidates": [],
        "spec": None,
        "mesh": None,
        "iterations": [],
        "outcome": None,
        "cost_usd": "0",
        "generated_files": [],
        "last_event": 0,
    }
    for event in events:
        view["last_event"] = event.number
        kind, payload = event.kind, event.payload
        if kind == "state-changed":
            view["state"] = payload["state"]
        elif kind == "cases-extracted":
            view["candidates"] = payload["candidates"]
        elif kind == "case-selected":
            view["spec"] = payload["spec"]
        elif kind == "mesh-attached":
            view["mesh"] = payload
        elif kind == "file-generated":
            view["generated_files"].append(payload["path"])
        elif kind == "iteration-completed":
            view["iterations"].append(payload)
            if "cost_usd" in payload:
                view["cost_usd"] = payload["cost_usd"]
        elif kind in ("completed", "failed"):
            view["outcome"] = payload
            if "cost_usd" in payload:
                view["cost_usd"] = payload["cost_usd"]
    return view


_CANDIDATE_PROMPT = (
    "Catalog every distinct CFD case described in the document below. For each "
    "case give a one-line summary naming the solver, turbulence model, and "
    "geometry, plus the labels of the document sections that describe it.\n"
    "Reply with one JSON object:\n"
    '{"cases": [{"summary": str, "segments": [str, ...]}]}\n\n'
    "Document:\n{document}"
)


class SessionService:
    """Owns sessions, their workspaces, and the launch workers."""

    def __init__(
        self,
        kb: KnowledgeBase,
        gateway: Gateway,
        executor_factory: Callable[[], Executor],
        workspace_root,
        run_config: Optional[RunConfig] = None,
    ) -> None:
        self.kb = kb
        self.gateway = gateway
        self.executor_factory = executor_factory
        self.workspace_root = Path(workspace_root)
        self.run_config = run_config or RunConfig()
        self._sessions: Dict[str, Session] = {}
        self._lock = threading.Lock()

    # --- lifecycle ------------------------------------------------------------

    def create_session(self) -> Session:
        session_id = uuid.uuid4().hex[:12]
        workspace = self.workspace_root / session_id
        workspace.mkdir(parents=True)
        session = Session(session_id, workspace)
        session.gateway_session = self.gateway.session()
        with self._lock:
            self._sessions[session_id] = session
        session.emit("session-created", {"id": session_id})
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSessionError(session_id) from None

    def session_ids(self) -> List[str]:
        with self._lock:
            return sorted(self._sessions)

    # --- stage 1 ----------------------------------------------------------------

    def submit_document(self, session_id: str, text: str) -> List[CaseCandidate]:
        session = self.get(session_id)
        with session.lock:
            session.require_state(SessionState.AWAITING_INPUT)
            if not text or not text.strip():
                raise ValueError("document text must be nonempty")
            segments = segment_document(text)
            prompt = _CANDIDATE_PROMPT.replace(
                "{document}", "\n\n".join(f"[{s.label}]\n{s.text}" for s in segments)
            )
            reply, _ = session.gateway_session.complete(
                LlmRole.REASONER, [{"role": "user", "content": prompt}], "case-extraction"
            )
            try:
                payload = _candidate_payload(reply)
            except ValueError as exc:
                raise ExtractionError(str(exc)) from exc

            candidates = [
                CaseCandidate(
                    label=f"Case {i + 1}",
                    summary=str(case.get("summary", "")).strip(),
                    provenance=tuple(case.get("segments", ())),
                )
                for i, case in enumerate(payload)
            ]
            session.document = text
            session.segments = segments
            session.candidates = candidates
            session.emit("document-submitted", {"chars": len(text)})
            session.emit(
                "cases-extracted", {"candidates": [c.to_json() for c in candidates]}
            )
            if candidates:
                session._transition(SessionState.CASES_EXTRACTED)
            return candidates

    def select_case(
        self, session_id: str, label: str, dialogue_turns: Sequence[str] = ()
    ) -> CaseSpecification:
        session = self.get(session_id)
        with session.lock:
            session.require_state(SessionState.CASES_EXTRACTED)
            candidate = next((c for c in session.candidates if c.label == label), None)
            if candidate is None:
                raise UnknownLabelError(label)
            scoped = [s for s in session.segments if s.label in candidate.provenance]
            if not scoped:
                scoped = list(session.segments)
            scoped = scoped + [
                Segment(f"dialogue-{i + 1}", turn) for i, turn in enumerate(dialogue_turns)
            ]
            spec = extract_case_spec(
                scoped,
                session.gateway_session,
                self.kb,
                source_ref=f"{session.id}:{label}",
            )
            session.pending_spec = spec
            session.emit(
                "spec-extracted", {"label": label, "spec": spec_to_json(spec)}
            )
            return spec

    def confirm_case(self, session_id: str) -> CaseSpecification:
        session = self.get(session_id)
        with session.lock:
            session.require_state(SessionState.CASES_EXTRACTED)
            if session.pending_spec is None:
                raise StateConflictError("no extracted specification awaiting confirmation")
            session.chosen = session.pending_spec
            session.emit("case-selected", {"spec": spec_to_json(session.chosen)})
            session._transition(SessionState.CASE_SELECTED)
            return session.chosen

    def attach_mesh(self, session_id: str, filename: str, data: bytes) -> dict:
        session = self.get(session_id)
        with session.lock:
            session.require_state(SessionState.CASE_SELECTED)
            if not filename.lower().endswith(".msh"):
                raise UnsupportedFormatError(
                    f"only Fluent-format .msh files are supported, got {filename!r}"
                )
            mesh_dir = session.workspace / "mesh"
            mesh_dir.mkdir(exist_ok=True)
            mesh_path = mesh_dir / Path(filename).name
            mesh_path.write_bytes(data)
            patches = scan_msh_patches(mesh_path)
            report = validate_boundaries(session.chosen, set(patches))
            findings = [
                {
                    "kind": f.kind.value,
                    "patch": f.patch,
                    "detail": f.detail,
                    "suggestion": f.suggestion,
                }
                for f in report.findings
            ]
            result = {"patches": list(patches), "findings": findings, "clean": report.clean}
            if not report.clean:
                session.emit("mesh-rejected", result)
                return result
            session.mesh_path = mesh_path
            session.mesh_patches = patches
            session.emit("mesh-attached", result)
            session._transition(SessionState.MESH_ATTACHED)
            return result

    # --- launch -------------------------------------------------------------------

    def launch(self, session_id: str, overrides: Optional[dict] = None) -> None:
        session = self.get(session_id)
        with session.lock:
            session.require_state(SessionState.MESH_ATTACHED)
            cfg = _config_with_overrides(self.run_config, overrides or {})
            session._transition(SessionState.BUILDING)
            worker = threading.Thread(
                target=self._run_pipeline, args=(session, cfg), daemon=True
            )
            session.worker = worker
            worker.start()

    def wait(self, session_id: str, timeout: Optional[float] = None) -> None:
        worker = self.get(session_id).worker
        if worker is not None:
            worker.join(timeout)

    def _run_pipeline(self, session: Session, cfg: RunConfig) -> None:
        gw = session.gateway_session
        spec = session.chosen
        try:
            session.emit("build-started", {"solver": spec.solver})
            file_list = derive_file_list(spec, self.kb)
            try:
                references = retrieve_references(
                    self.kb, spec, "system/fvSchemes", k=cfg.reference_count
                )
            except NoCandidatesError:
                references = None
            generated = generate_files(
                spec, file_list, references, gw, mesh_patches=set(session.mesh_patches)
            )
            for path in generated.files:
                session.emit("file-generated", {"path": path})
        except Exception as exc:
            if isinstance(exc, (ExtractionError, GenerationError)):
                detail = str(exc)
            else:
                detail = f"{type(exc).__name__}: {exc}"
            with session.lock:
                session.emit("failed", {"cause": detail, "cost_usd": str(gw.cost())})
                session._transition(SessionState.FAILED)
            self._save_session_artifacts(session)
            return

        with session.lock:
            session._transition(SessionState.RUNNING)
            session.emit("run-started", {})

        def on_event(kind: str, payload: dict) -> None:
            if kind == "iteration-completed":
                enriched = dict(payload)
                enriched["cost_usd"] = str(gw.cost())
                session.emit("iteration-completed", enriched)

        outcome = reflect_loop(
            generated,
            session.mesh_path,
            session.workspace / "case",
            self.kb,
            gw,
            self.executor_factory(),
            cfg,
            on_event=on_event,
        )
        with session.lock:
            session.outcome = outcome
            if outcome.status is RunStatus.TEN_STEP_SUCCESS:
                session.emit("completed", outcome.to_json() | {"cost_usd": str(outcome.cost_usd)})
                session._transition(SessionState.COMPLETED)
            else:
                session.emit("failed", outcome.to_json() | {"cost_usd": str(outcome.cost_usd)})
                session._transition(SessionState.FAILED)
        self._save_session_artifacts(session)

    def _save_session_artifacts(self, session: Session) -> None:
        gw = session.gateway_session
        if gw is not None:
            gw.save_qa_log(session.workspace / "qa_log.jsonl")
        if session.outcome is not None:
            (session.workspace / "outcome.json").write_text(
                json.dumps(session.outcome.to_json(), indent=1, sort_keys=True)
            )


def _candidate_payload(reply: str) -> List[dict]:
    from .llm import extract_answer

    text = extract_answer(reply)
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end < start:
        raise ValueError("case-extraction reply carries no JSON object")
    payload = json.loads(text[start : end + 1])
    cases = payload.get("cases")
    if not isinstance(cases, list):
        raise ValueError("case-extraction reply lacks a cases list")
    return cases


def _config_with_overrides(base: RunConfig, overrides: dict) -> RunConfig:
    allowed = {
        "max_reflections",
        "persistent_threshold",
        "steady_steps",
        "max_courant",
        "delta_t_incompressible",
        "delta_t_compressible",
        "solver_timeout",
        "reference_count",
    }
    bad = set(overrides) - allowed
    if bad:
        raise ValueError(f"unknown run-config overrides: {sorted(bad)}")
    from dataclasses import asdict

    merged = asdict(base)
    merged.update(overrides)
    merged["write_steps"] = tuple(merged["write_steps"])
    return RunConfig(**merged)
