"""HTTP front for the session workflow: REST verbs plus a server-sent event
stream with monotonically numbered, resumable events."""

from __future__ import annotations

import json
from typing import List, Optional

from fastapi import FastAPI, File, Header, HTTPException, Request, UploadFile
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .builder import ExtractionError
from .sessions import (
    SessionService,
    SessionState,
    StateConflictError,
    UnknownLabelError,
    UnknownSessionError,
    UnsupportedFormatError,
    replay_view,
    spec_to_json,
)

_TERMINAL = {SessionState.COMPLETED, SessionState.FAILED}
_STREAM_POLL_SECONDS = 0.2


class DocumentBody(BaseModel):
    text: str


class SelectionBody(BaseModel):
    label: str
    dialogue: List[str] = []


class LaunchBody(BaseModel):
    overrides: dict = {}


def create_app(service: SessionService) -> FastAPI:
    app = FastAPI(title="foamwright session service")
    app.state.service = service

    def get_session(session_id: str):
        try:
            return service.get(session_id)
        except UnknownSessionError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.exception_handler(StateConflictError)
    async def state_conflict(request: Request, exc: StateConflictError):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.post("/sessions", status_code=201)
    def create_session():
        session = service.create_session()
        return {"id": session.id, "state": session.state.value}

    @app.get("/sessions/{session_id}")
    def get_view(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return replay_view(session.events)

    @app.post("/sessions/{session_id}/document")
    def submit_document(session_id: str, body: DocumentBody):
        session = get_session(session_id)
        try:
            candidates = service.submit_document(session.id, body.text)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except ExtractionError as exc:
            raise HTTPException(status_code=502, detail=f"extraction failed (retryable): {exc}")
        return {"candidates": [c.to_json() for c in candidates], "state": session.state.value}

    @app.get("/sessions/{session_id}/candidates")
    def get_candidates(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return {"candidates": [c.to_json() for c in session.candidates]}

    @app.post("/sessions/{session_id}/selection")
    def select_case(session_id: str, body: SelectionBody):
        session = get_session(session_id)
        try:
            spec = service.select_case(session.id, body.label, body.dialogue)
        except UnknownLabelError as exc:
            raise HTTPException(status_code=404, detail=f"unknown case label {exc}")
        except ExtractionError as exc:
            raise HTTPException(status_code=502, detail=f"extraction failed (retryable): {exc}")
        return {"spec": spec_to_json(spec), "state": session.state.value}

    @app.post("/sessions/{session_id}/confirm")
    def confirm_case(session_id: str):
        session = get_session(session_id)
        spec = service.confirm_case(session.id)
        return {"spec": spec_to_json(spec), "state": session.state.value}

    @app.post("/sessions/{session_id}/mesh")
    async def attach_mesh(session_id: str, file: UploadFile = File(...)):
        session = get_session(session_id)
        data = await file.read()
        try:
            report = service.attach_mesh(session.id, file.filename or "upload.msh", data)
        except UnsupportedFormatError as exc:
            raise HTTPException(status_code=415, detail=str(exc))
        return report | {"state": session.state.value}

    @app.post("/sessions/{session_id}/launch", status_code=202)
    def launch(session_id: str, body: Optional[LaunchBody] = None):
        session = get_session(session_id)
        try:
            service.launch(session.id, (body.overrides if body else {}) or {})
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"state": session.state.value}

    @app.get("/sessions/{session_id}/outcome")
    def get_outcome(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.outcome is None:
                raise HTTPException(status_code=404, detail="no outcome yet")
            return session.outcome.to_json()

    @app.get("/sessions/{session_id}/events")
    def stream_events(
        session_id: str,
        after: int = 0,
        last_event_id: Optional[str] = Header(default=None, alias="Last-Event-ID"),
    ):
        session = get_session(session_id)
        cursor = after
        if last_event_id:
            try:
                cursor = max(cursor, int(last_event_id))
            except ValueError:
                pass

        def stream():
            position = cursor
            while True:
                with session.new_event:
                    batch = session.events_after(position)
                    if not batch:
                        if session.state in _TERMINAL:
                            break
                        session.new_event.wait(timeout=_STREAM_POLL_SECONDS)
                        batch = session.events_after(position)
                for event in batch:
                    position = event.number
                    data = json.dumps(event.to_json(), sort_keys=True)
                    yield f"id: {event.number}\nevent: {event.kind}\ndata: {data}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
