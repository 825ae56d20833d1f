"""Command-line entry points: knowledge-base build/query, headless runs, and
the HTTP service."""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from . import demo
from .knowledge import KnowledgeBase, UnknownSolverError, ingest_tree
from .llm import Gateway, HttpChatProvider, MockProvider, endpoints_from_env
from .runner import RunStatus, SimulatedExecutor, executor_from_env
from .sessions import SessionService, SessionState


def _kb_from_args(args) -> KnowledgeBase:
    if getattr(args, "kb", None):
        return KnowledgeBase.load(args.kb)
    return KnowledgeBase.empty()


def cmd_kb_build(args) -> int:
    kb = ingest_tree(args.tree, nonuniform_limit=args.nonuniform_limit)
    kb.save(args.output)
    print(f"ingested {len(kb.cases)} cases ({len(kb.drops)} dropped) -> {args.output}")
    for case_id, reasons in kb.drops:
        print(f"  dropped {case_id}: {', '.join(reasons)}")
    return 0


def cmd_kb_query(args) -> int:
    kb = _kb_from_args(args)
    try:
        paths = kb.required_files(args.solver, args.model, args.thermo)
    except UnknownSolverError:
        print(f"unknown solver: {args.solver}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


def _build_gateway(args) -> Gateway:
    if args.dry_run or args.mock_script:
        script_path = args.mock_script or demo.mock_script_path()
        return Gateway(MockProvider.from_file(script_path))
    endpoints = endpoints_from_env()
    if not endpoints:
        print(
            "no LLM endpoints configured; set FOAMWRIGHT_REASONER_URL / "
            "FOAMWRIGHT_EDITOR_URL (and *_MODEL, *_API_KEY) or pass --dry-run",
            file=sys.stderr,
        )
        raise SystemExit(2)
    return Gateway(HttpChatProvider(endpoints))


def _build_executor_factory(args):
    if args.dry_run:
        return lambda: SimulatedExecutor(demo.polymesh_fixture_path(), demo.scripted_runs())
    return lambda: executor_from_env()


def cmd_run(args) -> int:
    doc_path = Path(args.doc) if args.doc else demo.document_path()
    mesh_path = Path(args.mesh) if args.mesh else demo.mesh_path()
    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="foamwright-"))

    overrides = {}
    if args.max_reflections is not None:
        overrides["max_reflections"] = args.max_reflections
    if args.solver_timeout is not None:
        overrides["solver_timeout"] = args.solver_timeout

    service = SessionService(
        kb=_kb_from_args(args),
        gateway=_build_gateway(args),
        executor_factory=_build_executor_factory(args),
        workspace_root=workdir,
    )
    session = service.create_session()
    print(f"session {session.id} in {session.workspace}")

    candidates = service.submit_document(session.id, doc_path.read_text())
    if not candidates:
        print("document yielded no case candidates")
        return 1
    for candidate in candidates:
        print(f"  {candidate.label}: {candidate.summary}")

    label = args.select or candidates[0].label
    spec = service.select_case(session.id, label)
    print(f"selected {label}: solver={spec.solver} model={spec.turbulence_model}")
    service.confirm_case(session.id)

    report = service.attach_mesh(session.id, mesh_path.name, mesh_path.read_bytes())
    if not report["clean"]:
        print("mesh validation findings:")
        for finding in report["findings"]:
            print(f"  [{finding['kind']}] {finding['detail']}")
        return 1
    print(f"mesh attached; patches: {', '.join(report['patches'])}")

    service.launch(session.id, overrides)
    cursor = 0
    while True:
        service.wait(session.id, timeout=0.1)
        for event in service.get(session.id).events_after(cursor):
            cursor = event.number
            if event.kind == "iteration-completed":
                p = event.payload
                print(
                    f"iteration {p['iteration']}: {p['category']} -> "
                    f"{p.get('target_file')} (cost ${p.get('cost_usd')})"
                )
            elif event.kind in ("completed", "failed", "file-generated", "run-started", "build-started"):
                print(f"event: {event.kind} {json.dumps(event.payload)[:120]}")
        state = service.get(session.id).state
        if state in (SessionState.COMPLETED, SessionState.FAILED):
            break

    outcome = service.get(session.id).outcome
    if outcome is not None:
        print(
            f"outcome: {outcome.status.value} after {outcome.reflections} reflections, "
            f"cost ${outcome.cost_usd}"
        )
        return 0 if outcome.status is RunStatus.TEN_STEP_SUCCESS else 1
    return 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    service = SessionService(
        kb=_kb_from_args(args),
        gateway=_build_gateway(args),
        executor_factory=_build_executor_factory(args),
        workspace_root=args.workspace or tempfile.mkdtemp(prefix="foamwright-srv-"),
    )
    uvicorn.run(create_app(service), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foamwright",
        description="OpenFOAM case configuration from documents, with a reflective run loop",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    kb = sub.add_parser("kb", help="knowledge-base operations")
    kb_sub = kb.add_subparsers(dest="kb_command", required=True)

    build = kb_sub.add_parser("build", help="ingest a tutorial tree into a database")
    build.add_argument("tree", help="root of the tutorial directory tree")
    build.add_argument("-o", "--output", required=True, help="database JSON path")
    build.add_argument("--nonuniform-limit", type=int, default=1000)
    build.set_defaults(func=cmd_kb_build)

    query = kb_sub.add_parser("query", help="print required files for a configuration")
    query.add_argument("--solver", required=True)
    query.add_argument("--model")
    query.add_argument("--thermo")
    query.add_argument("--kb", help="database JSON (defaults to seed tables)")
    query.set_defaults(func=cmd_kb_query)

    run = sub.add_parser("run", help="drive one case end to end")
    run.add_argument("--doc", help="case description text file (demo document when omitted)")
    run.add_argument("--mesh", help="Fluent .msh mesh file (demo mesh when omitted)")
    run.add_argument("--select", help='candidate label, e.g. "Case 1" (default: first)')
    run.add_argument("--kb", help="knowledge-base JSON")
    run.add_argument("--workdir", help="session workspace (temp dir when omitted)")
    run.add_argument("--dry-run", action="store_true", help="mock LLM + simulated executor")
    run.add_argument("--mock-script", help="mock LLM script JSON (implies mock provider)")
    run.add_argument("--max-reflections", type=int)
    run.add_argument("--solver-timeout", type=float)
    run.set_defaults(func=cmd_run)

    serve = sub.add_parser("serve", help="start the HTTP session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--kb")
    serve.add_argument("--workspace")
    serve.add_argument("--dry-run", action="store_true")
    serve.add_argument("--mock-script")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
