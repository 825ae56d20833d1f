import type { SessionEvent } from "./types.js";

export interface EventSourceLike {
  onmessage: ((ev: { data: string; lastEventId?: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  onopen: ((ev: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface StreamCallbacks {
  onEvent: (event: SessionEvent) => void;
  onConnectionChange?: (connected: boolean) => void;
}

const RECONNECT_DELAY_MS = 1000;

/**
 * Subscribes to a session's event stream and auto-resumes after connection
 * loss from the last event number it has seen (?after=N), so no event is
 * delivered twice and none is skipped.
 */
export class EventStream {
  private source: EventSourceLike | null = null;
  private lastNumber = 0;
  private closed = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private baseUrl: string,
    private sessionId: string,
    private callbacks: StreamCallbacks,
    private factory: EventSourceFactory = (url) =>
      new EventSource(url) as unknown as EventSourceLike,
    private reconnectDelayMs: number = RECONNECT_DELAY_MS,
  ) {}

  get cursor(): number {
    return this.lastNumber;
  }

  open(after = 0): void {
    this.lastNumber = Math.max(this.lastNumber, after);
    this.connect();
  }

  private connect(): void {
    if (this.closed) return;
    const url = `${this.baseUrl}/sessions/${this.sessionId}/events?after=${this.lastNumber}`;
    this.source = this.factory(url);
    this.source.onopen = () => this.callbacks.onConnectionChange?.(true);
    this.source.onmessage = (message) => {
      const event = JSON.parse(message.data) as SessionEvent;
      if (event.number <= this.lastNumber) return; // replayed duplicate
      this.lastNumber = event.number;
      this.callbacks.onEvent(event);
    };
    this.source.onerror = () => {
      this.callbacks.onConnectionChange?.(false);
      this.source?.close();
      this.source = null;
      if (!this.closed) {
        this.reconnectTimer = setTimeout(() => this.connect(), this.reconnectDelayMs);
      }
    };
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.source?.close();
    this.source = null;
  }
}
