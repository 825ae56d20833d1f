import { describe, expect, it } from "vitest";

import { ApiError, SessionApi } from "./api.js";

interface Recorded {
  url: string;
  method?: string;
  body?: BodyInit | null;
  headers?: HeadersInit;
}

function fakeFetch(status: number, payload: unknown) {
  const calls: Recorded[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, method: init?.method, body: init?.body, headers: init?.headers });
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("SessionApi", () => {
  it("creates sessions", async () => {
    const { impl, calls } = fakeFetch(201, { id: "abc", state: "awaiting-input" });
    const api = new SessionApi("http://svc", impl);
    const created = await api.createSession();
    expect(created.id).toBe("abc");
    expect(calls[0]).toMatchObject({ url: "http://svc/sessions", method: "POST" });
  });

  it("submits documents as JSON", async () => {
    const { impl, calls } = fakeFetch(200, { candidates: [], state: "awaiting-input" });
    const api = new SessionApi("http://svc", impl);
    await api.submitDocument("abc", "case text");
    expect(calls[0].url).toBe("http://svc/sessions/abc/document");
    expect(JSON.parse(String(calls[0].body))).toEqual({ text: "case text" });
  });

  it("selection carries dialogue turns", async () => {
    const { impl, calls } = fakeFetch(200, { spec: {}, state: "cases-extracted" });
    const api = new SessionApi("http://svc", impl);
    await api.selectCase("abc", "Case 1", ["set U to (30 0 0)"]);
    expect(JSON.parse(String(calls[0].body))).toEqual({
      label: "Case 1",
      dialogue: ["set U to (30 0 0)"],
    });
  });

  it("uploads the mesh as multipart form data", async () => {
    const { impl, calls } = fakeFetch(200, { patches: [], findings: [], clean: true, state: "mesh-attached" });
    const api = new SessionApi("http://svc", impl);
    const file = new File(["(2 3)"], "grid.msh");
    await api.attachMesh("abc", file);
    expect(calls[0].body).toBeInstanceOf(FormData);
    expect((calls[0].body as FormData).get("file")).toBeInstanceOf(File);
  });

  it("maps error details onto ApiError", async () => {
    const { impl } = fakeFetch(409, { detail: "operation requires state mesh-attached" });
    const api = new SessionApi("http://svc", impl);
    await expect(api.launch("abc")).rejects.toThrowError(ApiError);
    await expect(api.launch("abc")).rejects.toThrowError(/requires state mesh-attached/);
  });
});
