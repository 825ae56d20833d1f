import type {
  Candidate,
  IterationEntry,
  MeshReport,
  OutcomeSummary,
  Phase,
  SessionEvent,
  SessionView,
  SpecSummary,
  UiState,
} from "./types.js";

export function emptyView(): SessionView {
  return {
    state: "awaiting-input",
    candidates: [],
    pendingSpec: null,
    spec: null,
    mesh: null,
    meshRejection: null,
    generatedFiles: [],
    iterations: [],
    outcome: null,
    costUsd: "0",
    lastEvent: 0,
  };
}

/** Fold one event into the view. Pure: returns a new view. */
export function applyEvent(view: SessionView, event: SessionEvent): SessionView {
  const next: SessionView = {
    ...view,
    candidates: [...view.candidates],
    generatedFiles: [...view.generatedFiles],
    iterations: [...view.iterations],
    lastEvent: event.number,
  };
  const payload = event.payload as Record<string, any>;
  switch (event.kind) {
    case "state-changed":
      next.state = String(payload.state);
      break;
    case "cases-extracted":
      next.candidates = (payload.candidates ?? []) as Candidate[];
      break;
    case "spec-extracted":
      next.pendingSpec = payload.spec as SpecSummary;
      break;
    case "case-selected":
      next.spec = payload.spec as SpecSummary;
      next.pendingSpec = null;
      break;
    case "mesh-attached":
      next.mesh = payload as unknown as MeshReport;
      next.meshRejection = null;
      break;
    case "mesh-rejected":
      next.meshRejection = payload as unknown as MeshReport;
      break;
    case "file-generated":
      next.generatedFiles.push(String(payload.path));
      break;
    case "iteration-completed":
      next.iterations.push(payload as unknown as IterationEntry);
      if (payload.cost_usd !== undefined) next.costUsd = String(payload.cost_usd);
      break;
    case "completed":
    case "failed":
      next.outcome = payload as OutcomeSummary;
      if (payload.cost_usd !== undefined) next.costUsd = String(payload.cost_usd);
      break;
    default:
      break;
  }
  return next;
}

/** Rebuild the whole view from an event history (page reload, reconnect). */
export function reduceEvents(events: SessionEvent[]): SessionView {
  return events.reduce(applyEvent, emptyView());
}

export function phaseOf(view: SessionView): Phase {
  switch (view.state) {
    case "awaiting-input":
      return "input-submission";
    case "cases-extracted":
      // a confirmed spec whose state-changed event is still in flight also
      // counts as selection, so the phase never flickers backwards
      return view.pendingSpec || view.spec ? "case-selection" : "case-extraction";
    case "case-selected":
      return "mesh-integration";
    case "mesh-attached":
      return "launch";
    case "building":
    case "running":
      return "monitoring";
    default:
      return "finished";
  }
}

/** Phase-appropriate controls only; everything derives from the view. */
export function renderFlow(view: SessionView, connected = true): UiState {
  const phase = phaseOf(view);
  return {
    phase,
    showDocumentInput: phase === "input-submission",
    showCandidates: phase === "case-extraction" || phase === "case-selection",
    showSpecConfirmation: phase === "case-selection" && view.pendingSpec !== null,
    showMeshUpload: phase === "mesh-integration",
    showLaunch: phase === "launch",
    showTimeline: phase === "monitoring" || phase === "finished",
    showAbort: phase === "monitoring",
    showRelaunch: phase === "finished",
    timeline: view.iterations,
    costUsd: view.costUsd,
    staleBanner: !connected,
  };
}
