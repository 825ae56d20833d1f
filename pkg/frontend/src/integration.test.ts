import { describe, expect, it } from "vitest";

import rawEvents from "./fixtures/dry_run_events.json";
import type { SessionEvent } from "./types.js";
import { reduceEvents, renderFlow } from "./view.js";

// event log captured verbatim from a dry run of the session service
const events = rawEvents as SessionEvent[];

describe("replaying a real service event log", () => {
  it("reaches the completed state with one timeline entry", () => {
    const view = reduceEvents(events);
    expect(view.state).toBe("completed");
    expect(view.candidates.map((c) => c.label)).toEqual(["Case 1"]);
    expect(view.spec?.solver).toBe("simpleFoam");
    expect(view.mesh?.patches).toEqual(["inlet", "outlet", "airfoil", "frontAndBack"]);
    expect(view.generatedFiles).toHaveLength(9);
    expect(view.iterations).toHaveLength(1);
    expect(view.iterations[0].category).toBe("dimension");
    expect(view.outcome?.status).toBe("ten-step-success");
    expect(Number(view.costUsd)).toBeGreaterThan(0);
  });

  it("event numbers are contiguous from one", () => {
    expect(events.map((e) => e.number)).toEqual(events.map((_, i) => i + 1));
  });

  it("final ui state offers a relaunch", () => {
    const ui = renderFlow(reduceEvents(events));
    expect(ui.phase).toBe("finished");
    expect(ui.showRelaunch).toBe(true);
    expect(ui.showTimeline).toBe(true);
  });
});
