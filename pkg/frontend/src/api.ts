import type {
  CandidatesPayload,
  CreateSessionBody,
  HeatmapPayload,
  SessionState,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public kind: string,
    detail: string,
  ) {
    super(`${kind}: ${detail}`);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await res.json().catch(() => ({}));
  if (!res.ok) {
    throw new ApiError(res.status, body.error ?? "HttpError", body.detail ?? res.statusText);
  }
  return body as T;
}

export class SessionApi {
  constructor(public base: string = "") {}

  createSession(body: CreateSessionBody): Promise<SessionState> {
    return request(this.base, "/sessions", { method: "POST", body: JSON.stringify(body) });
  }

  state(id: string): Promise<SessionState> {
    return request(this.base, `/sessions/${id}`);
  }

  postLabels(id: string, labels: number[]): Promise<SessionState> {
    return request(this.base, `/sessions/${id}/preferences`, {
      method: "POST",
      body: JSON.stringify({ labels }),
    });
  }

  candidates(id: string): Promise<CandidatesPayload> {
    return request(this.base, `/sessions/${id}/candidates`);
  }

  choose(id: string, side: "first" | "second"): Promise<SessionState> {
    return request(this.base, `/sessions/${id}/choice`, {
      method: "POST",
      body: JSON.stringify({ side }),
    });
  }

  heatmap(id: string, d1: number, d2: number, res: number): Promise<HeatmapPayload> {
    return request(this.base, `/sessions/${id}/heatmap?d1=${d1}&d2=${d2}&res=${res}`);
  }

  abort(id: string): Promise<SessionState> {
    return request(this.base, `/sessions/${id}`, { method: "DELETE" });
  }
}
