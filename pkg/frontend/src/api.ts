import type {
  AnswerResponse,
  FoundResponse,
  Health,
  SessionCreated,
  SessionStateResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly reason: string,
    detail: string,
  ) {
    super(`${reason}: ${detail}`);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

/** Thin typed client for the session API. One instance per base URL. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let reason = "error";
      let detail = res.statusText;
      try {
        const parsed = (await res.json()) as { error?: string; detail?: string };
        reason = parsed.error ?? reason;
        detail = parsed.detail ?? detail;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(res.status, reason, detail);
    }
    return (await res.json()) as T;
  }

  health(): Promise<Health> {
    return this.request<Health>("GET", "/health");
  }

  createSession(clientTag = "webui"): Promise<SessionCreated> {
    return this.request<SessionCreated>("POST", "/sessions", {
      client_tag: clientTag,
    });
  }

  getSession(sessionId: string): Promise<SessionStateResponse> {
    return this.request<SessionStateResponse>("GET", `/sessions/${sessionId}`);
  }

  answer(sessionId: string, queryId: string, chosen: number): Promise<AnswerResponse> {
    return this.request<AnswerResponse>("POST", `/sessions/${sessionId}/answer`, {
      query_id: queryId,
      chosen,
    });
  }

  markFound(sessionId: string, target: number): Promise<FoundResponse> {
    return this.request<FoundResponse>("POST", `/sessions/${sessionId}/found`, {
      target,
    });
  }
}
