import { SessionApi } from "./api.js";
import { EventStream } from "./stream.js";
import type { SessionEvent, SessionView } from "./types.js";
import { applyEvent, emptyView, reduceEvents, renderFlow } from "./view.js";

const SESSION_KEY = "foamwright.session";

interface AppState {
  sessionId: string | null;
  view: SessionView;
  events: SessionEvent[];
  connected: boolean;
  selectedLabel: string | null;
  busy: boolean;
  notice: string;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function startApp(baseUrl: string): void {
  const api = new SessionApi(baseUrl);
  let stream: EventStream | null = null;
  const state: AppState = {
    sessionId: null,
    view: emptyView(),
    events: [],
    connected: true,
    selectedLabel: null,
    busy: false,
    notice: "",
  };

  function render(): void {
    const ui = renderFlow(state.view, state.connected);
    el("phase").textContent = ui.phase;
    el("stale-banner").hidden = !ui.staleBanner;
    el("notice").textContent = state.notice;
    el("input-panel").hidden = !ui.showDocumentInput;
    el("candidates-panel").hidden = !ui.showCandidates;
    el("spec-panel").hidden = !ui.showSpecConfirmation;
    el("mesh-panel").hidden = !ui.showMeshUpload;
    el("launch-panel").hidden = !ui.showLaunch;
    el("timeline-panel").hidden = !ui.showTimeline;
    el<HTMLButtonElement>("abort-button").hidden = !ui.showAbort;
    el<HTMLButtonElement>("relaunch-button").hidden = !ui.showRelaunch;
    el("cost-meter").textContent = `cost $${ui.costUsd}`;

    const cards = el("candidate-cards");
    cards.replaceChildren();
    for (const candidate of state.view.candidates) {
      const card = document.createElement("button");
      card.className =
        "candidate-card" + (candidate.label === state.selectedLabel ? " selected" : "");
      card.textContent = `${candidate.label}: ${candidate.summary}`;
      card.onclick = () => void selectCandidate(candidate.label);
      cards.appendChild(card);
    }

    const spec = state.view.pendingSpec;
    if (spec) {
      const lines = [
        `solver: ${spec.solver}`,
        `turbulence model: ${spec.turbulence_model ?? "none"}`,
        `thermo model: ${spec.thermo_model ?? "none"}`,
        `regime: ${spec.flow_regime}, ${spec.time_mode}`,
        "boundaries:",
        ...Object.entries(spec.boundaries).map(([patch, b]) => `  ${patch}: ${b.type}`),
      ];
      el("spec-card").textContent = lines.join("\n");
    }

    const timeline = el("timeline");
    timeline.replaceChildren();
    for (const entry of ui.timeline) {
      const item = document.createElement("li");
      item.textContent =
        `#${entry.iteration} ${entry.category}` +
        (entry.target_file ? ` -> ${entry.target_file}` : "") +
        ` (patched: ${entry.patched_files.join(", ") || "none"})`;
      timeline.appendChild(item);
    }
    const outcome = state.view.outcome;
    el("outcome").textContent = outcome
      ? `outcome: ${outcome.status ?? "failed"}${outcome.cause ? ` (${outcome.cause})` : ""}`
      : "";

    const files = el("generated-files");
    files.replaceChildren();
    for (const path of state.view.generatedFiles) {
      const item = document.createElement("li");
      item.textContent = path;
      files.appendChild(item);
    }
  }

  function onEvent(event: SessionEvent): void {
    state.events.push(event);
    state.view = applyEvent(state.view, event);
    render();
  }

  function subscribe(sessionId: string, after: number): void {
    stream?.close();
    stream = new EventStream(baseUrl, sessionId, {
      onEvent,
      onConnectionChange: (connected) => {
        state.connected = connected;
        render();
      },
    });
    stream.open(after);
  }

  async function guard(action: () => Promise<void>): Promise<void> {
    if (state.busy) return;
    state.busy = true;
    state.notice = "";
    try {
      await action();
    } catch (error) {
      state.notice = error instanceof Error ? error.message : String(error);
    } finally {
      state.busy = false;
      render();
    }
  }

  async function ensureSession(): Promise<string> {
    if (state.sessionId) return state.sessionId;
    const created = await api.createSession();
    state.sessionId = created.id;
    sessionStorage.setItem(SESSION_KEY, created.id);
    subscribe(created.id, 0);
    return created.id;
  }

  async function selectCandidate(label: string): Promise<void> {
    await guard(async () => {
      state.selectedLabel = label;
      const id = state.sessionId!;
      const dialogue = el<HTMLTextAreaElement>("dialogue-input").value.trim();
      await api.selectCase(id, label, dialogue ? [dialogue] : []);
    });
  }

  el<HTMLButtonElement>("submit-document").onclick = () =>
    void guard(async () => {
      const text = el<HTMLTextAreaElement>("document-input").value;
      const id = await ensureSession();
      await api.submitDocument(id, text);
    });

  el<HTMLButtonElement>("confirm-spec").onclick = () =>
    void guard(async () => {
      await api.confirmCase(state.sessionId!);
    });

  el<HTMLButtonElement>("upload-mesh").onclick = () =>
    void guard(async () => {
      const input = el<HTMLInputElement>("mesh-file");
      const file = input.files?.[0];
      if (!file) throw new Error("choose a .msh file first");
      const report = await api.attachMesh(state.sessionId!, file);
      if (!report.clean) {
        state.notice = report.findings.map((f) => f.detail).join("; ");
      }
    });

  el<HTMLButtonElement>("launch-button").onclick = () =>
    void guard(async () => {
      await api.launch(state.sessionId!);
    });

  el<HTMLButtonElement>("abort-button").onclick = () => {
    stream?.close();
    state.notice = "monitoring stopped; the run continues server-side";
    render();
  };

  el<HTMLButtonElement>("relaunch-button").onclick = () =>
    void guard(async () => {
      // one case per launch: a new run means a fresh session
      stream?.close();
      state.sessionId = null;
      state.events = [];
      state.view = emptyView();
      state.selectedLabel = null;
      sessionStorage.removeItem(SESSION_KEY);
    });

  // page reload: rebuild the identical view purely from the replayed stream
  const existing = sessionStorage.getItem(SESSION_KEY);
  if (existing) {
    state.sessionId = existing;
    state.view = reduceEvents([]);
    subscribe(existing, 0);
  }
  render();
}
