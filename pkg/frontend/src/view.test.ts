import { describe, expect, it } from "vitest";

import type { SessionEvent } from "./types.js";
import { applyEvent, emptyView, reduceEvents, renderFlow } from "./view.js";

let counter = 0;
function ev(kind: string, payload: Record<string, unknown> = {}): SessionEvent {
  counter += 1;
  return { number: counter, kind, payload, timestamp: counter };
}

function freshCounter() {
  counter = 0;
}

const SPEC = {
  solver: "simpleFoam",
  turbulence_model: "SpalartAllmaras",
  thermo_model: null,
  flow_regime: "incompressible",
  time_mode: "steady",
  boundaries: { inlet: { type: "freestream", field_types: {}, values: {} } },
  initial_fields: { p: "uniform 0" },
  source_ref: "doc",
};

/** Event sequence a session service emits for a clean three-iteration run. */
function mockedServiceRun(iterations = 3): SessionEvent[] {
  freshCounter();
  const events = [
    ev("session-created", { id: "abc" }),
    ev("document-submitted", { chars: 420 }),
    ev("cases-extracted", {
      candidates: [
        { label: "Case 1", summary: "simpleFoam airfoil", provenance: ["section-1"] },
        { label: "Case 2", summary: "rhoCentralFoam nozzle", provenance: ["section-2"] },
      ],
    }),
    ev("state-changed", { state: "cases-extracted" }),
    ev("spec-extracted", { label: "Case 1", spec: SPEC }),
    ev("case-selected", { spec: SPEC }),
    ev("state-changed", { state: "case-selected" }),
    ev("mesh-attached", { patches: ["inlet", "outlet"], findings: [], clean: true }),
    ev("state-changed", { state: "mesh-attached" }),
    ev("state-changed", { state: "building" }),
    ev("build-started", { solver: "simpleFoam" }),
    ev("file-generated", { path: "0/p" }),
    ev("file-generated", { path: "0/U" }),
    ev("state-changed", { state: "running" }),
    ev("run-started", {}),
  ];
  for (let i = 1; i <= iterations; i++) {
    events.push(
      ev("iteration-completed", {
        iteration: i,
        category: "dimension",
        target_file: "0/p",
        missing_name: null,
        patched_files: ["0/p"],
        cost_usd: `0.00${i}`,
      }),
    );
  }
  events.push(ev("completed", { status: "ten-step-success", reflections: iterations, cost_usd: "0.011" }));
  events.push(ev("state-changed", { state: "completed" }));
  return events;
}

describe("renderFlow phases", () => {
  it("fresh session shows only the document input", () => {
    const ui = renderFlow(emptyView());
    expect(ui.phase).toBe("input-submission");
    expect(ui.showDocumentInput).toBe(true);
    expect(ui.showCandidates).toBe(false);
    expect(ui.showMeshUpload).toBe(false);
    expect(ui.showLaunch).toBe(false);
    expect(ui.showTimeline).toBe(false);
  });

  it("renders the four input phases in order", () => {
    const events = mockedServiceRun();
    const phases: string[] = [];
    let view = emptyView();
    for (const event of events) {
      view = applyEvent(view, event);
      const phase = renderFlow(view).phase;
      if (phases[phases.length - 1] !== phase) phases.push(phase);
    }
    expect(phases).toEqual([
      "input-submission",
      "case-extraction",
      "case-selection",
      "mesh-integration",
      "launch",
      "monitoring",
      "finished",
    ]);
  });

  it("two candidates render as two selectable cards", () => {
    const events = mockedServiceRun().slice(0, 4);
    const view = reduceEvents(events);
    expect(view.candidates.map((c) => c.label)).toEqual(["Case 1", "Case 2"]);
    const ui = renderFlow(view);
    expect(ui.showCandidates).toBe(true);
    expect(ui.showMeshUpload).toBe(false);
  });

  it("candidate selection (spec confirmation) precedes and enables mesh upload", () => {
    const events = mockedServiceRun();
    const afterSpec = reduceEvents(events.slice(0, 5));
    const uiConfirm = renderFlow(afterSpec);
    expect(uiConfirm.phase).toBe("case-selection");
    expect(uiConfirm.showSpecConfirmation).toBe(true);
    expect(uiConfirm.showMeshUpload).toBe(false);

    const afterConfirm = reduceEvents(events.slice(0, 7));
    const uiMesh = renderFlow(afterConfirm);
    expect(uiMesh.phase).toBe("mesh-integration");
    expect(uiMesh.showMeshUpload).toBe(true);
  });

  it("a three-iteration run renders a three-entry timeline with running cost", () => {
    const view = reduceEvents(mockedServiceRun(3));
    const ui = renderFlow(view);
    expect(ui.timeline).toHaveLength(3);
    expect(ui.timeline.map((t) => t.iteration)).toEqual([1, 2, 3]);
    expect(view.costUsd).toBe("0.011");
    expect(ui.showTimeline).toBe(true);
    expect(ui.showRelaunch).toBe(true);
  });

  it("monitoring phase shows the abort control, finished shows relaunch", () => {
    const events = mockedServiceRun(1);
    const running = reduceEvents(events.slice(0, 16));
    expect(renderFlow(running).showAbort).toBe(true);
    expect(renderFlow(running).showRelaunch).toBe(false);
    const finished = reduceEvents(events);
    expect(renderFlow(finished).showAbort).toBe(false);
    expect(renderFlow(finished).showRelaunch).toBe(true);
  });

  it("connection loss raises the stale banner without changing the phase", () => {
    const view = reduceEvents(mockedServiceRun());
    expect(renderFlow(view, false).staleBanner).toBe(true);
    expect(renderFlow(view, false).phase).toBe(renderFlow(view, true).phase);
  });
});

describe("event replay", () => {
  it("page reload reproduces the identical view from the replayed stream", () => {
    const events = mockedServiceRun();
    let incremental = emptyView();
    for (const event of events) incremental = applyEvent(incremental, event);
    const replayed = reduceEvents(events);
    expect(replayed).toEqual(incremental);
    expect(renderFlow(replayed)).toEqual(renderFlow(incremental));
  });

  it("replay is deterministic", () => {
    const events = mockedServiceRun();
    expect(reduceEvents(events)).toEqual(reduceEvents(events));
  });

  it("failed runs carry the cause into the outcome", () => {
    freshCounter();
    const events = [
      ev("state-changed", { state: "building" }),
      ev("failed", { cause: "generation failed", cost_usd: "0.002" }),
      ev("state-changed", { state: "failed" }),
    ];
    const view = reduceEvents(events);
    expect(view.outcome?.cause).toBe("generation failed");
    expect(renderFlow(view).phase).toBe("finished");
  });

  it("mesh rejection leaves the mesh phase active with findings", () => {
    freshCounter();
    const events = mockedServiceRun().slice(0, 7);
    events.push(
      ev("mesh-rejected", {
        patches: ["intake"],
        findings: [{ kind: "mesh-patch-missing-from-spec", patch: "intake", detail: "x", suggestion: null }],
        clean: false,
      }),
    );
    const view = reduceEvents(events);
    expect(view.meshRejection?.clean).toBe(false);
    expect(renderFlow(view).showMeshUpload).toBe(true);
  });
});
