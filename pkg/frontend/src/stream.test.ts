import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { EventStream, type EventSourceLike } from "./stream.js";
import type { SessionEvent } from "./types.js";

class FakeSource implements EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null = null;
  onerror: ((ev: unknown) => void) | null = null;
  onopen: ((ev: unknown) => void) | null = null;
  closed = false;

  constructor(public url: string) {}

  close(): void {
    this.closed = true;
  }

  emit(event: SessionEvent): void {
    this.onmessage?.({ data: JSON.stringify(event) });
  }

  fail(): void {
    this.onerror?.(new Error("gone"));
  }

  openNow(): void {
    this.onopen?.({});
  }
}

function sessionEvent(number: number, kind = "state-changed"): SessionEvent {
  return { number, kind, payload: { state: "running" }, timestamp: number };
}

describe("EventStream", () => {
  let sources: FakeSource[];
  let received: SessionEvent[];
  let connectionLog: boolean[];
  let stream: EventStream;

  beforeEach(() => {
    vi.useFakeTimers();
    sources = [];
    received = [];
    connectionLog = [];
    stream = new EventStream(
      "http://svc",
      "s1",
      {
        onEvent: (event) => received.push(event),
        onConnectionChange: (connected) => connectionLog.push(connected),
      },
      (url) => {
        const source = new FakeSource(url);
        sources.push(source);
        return source;
      },
      50,
    );
  });

  afterEach(() => {
    stream.close();
    vi.useRealTimers();
  });

  it("delivers events and advances the cursor", () => {
    stream.open();
    sources[0].openNow();
    sources[0].emit(sessionEvent(1));
    sources[0].emit(sessionEvent(2));
    expect(received.map((e) => e.number)).toEqual([1, 2]);
    expect(stream.cursor).toBe(2);
    expect(connectionLog).toEqual([true]);
  });

  it("skips duplicates already seen", () => {
    stream.open();
    sources[0].emit(sessionEvent(1));
    sources[0].emit(sessionEvent(1));
    expect(received).toHaveLength(1);
  });

  it("reconnects after an error, resuming from the last event number", () => {
    stream.open();
    sources[0].emit(sessionEvent(1));
    sources[0].emit(sessionEvent(2));
    sources[0].fail();
    expect(connectionLog).toEqual([false]);
    expect(sources[0].closed).toBe(true);

    vi.advanceTimersByTime(60);
    expect(sources).toHaveLength(2);
    expect(sources[1].url).toBe("http://svc/sessions/s1/events?after=2");
    sources[1].openNow();
    sources[1].emit(sessionEvent(3));
    expect(received.map((e) => e.number)).toEqual([1, 2, 3]);
    expect(connectionLog).toEqual([false, true]);
  });

  it("open(after) starts from a stored cursor", () => {
    stream.open(7);
    expect(sources[0].url).toBe("http://svc/sessions/s1/events?after=7");
    sources[0].emit(sessionEvent(7));
    expect(received).toHaveLength(0); // replayed duplicate below the cursor
    sources[0].emit(sessionEvent(8));
    expect(received.map((e) => e.number)).toEqual([8]);
  });

  it("close stops reconnection attempts", () => {
    stream.open();
    sources[0].fail();
    stream.close();
    vi.advanceTimersByTime(500);
    expect(sources).toHaveLength(1);
  });
});
