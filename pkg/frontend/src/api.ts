import type { Candidate, MeshReport, OutcomeSummary, SpecSummary } from "./types.js";

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Thin REST client for the session service; fetch is injectable for tests. */
export class SessionApi {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      if (body instanceof FormData) {
        init.body = body;
      } else {
        init.headers = { "Content-Type": "application/json" };
        init.body = JSON.stringify(body);
      }
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const data = await response.json();
        detail = data.detail ?? detail;
      } catch {
        /* keep the status text */
      }
      throw new ApiError(response.status, String(detail));
    }
    return (await response.json()) as T;
  }

  createSession(): Promise<{ id: string; state: string }> {
    return this.request("POST", "/sessions");
  }

  submitDocument(id: string, text: string): Promise<{ candidates: Candidate[]; state: string }> {
    return this.request("POST", `/sessions/${id}/document`, { text });
  }

  selectCase(
    id: string,
    label: string,
    dialogue: string[] = [],
  ): Promise<{ spec: SpecSummary; state: string }> {
    return this.request("POST", `/sessions/${id}/selection`, { label, dialogue });
  }

  confirmCase(id: string): Promise<{ spec: SpecSummary; state: string }> {
    return this.request("POST", `/sessions/${id}/confirm`);
  }

  attachMesh(id: string, file: File): Promise<MeshReport & { state: string }> {
    const form = new FormData();
    form.append("file", file);
    return this.request("POST", `/sessions/${id}/mesh`, form);
  }

  launch(id: string, overrides: Record<string, unknown> = {}): Promise<{ state: string }> {
    return this.request("POST", `/sessions/${id}/launch`, { overrides });
  }

  outcome(id: string): Promise<OutcomeSummary> {
    return this.request("GET", `/sessions/${id}/outcome`);
  }
}
