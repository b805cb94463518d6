import { ApiClient, ApiError } from "./api.js";
import type { Query, SessionSummary } from "./types.js";

export type SessionPhase = "idle" | "running" | "found" | "exhausted";

/**
 * Client-side mirror of one search session. The server is the source of
 * truth: every transition is a round-trip, and a conflicting answer
 * (double click, stale tab) resolves by re-fetching the outstanding
 * query instead of mutating anything locally.
 */
export class UiSession {
  phase: SessionPhase = "idle";
  sessionId: string | null = null;
  query: Query | null = null;
  step = 0;
  summary: SessionSummary | null = null;
  shownHistory: number[] = [];

  constructor(private readonly api: ApiClient) {}

  async start(): Promise<Query> {
    const created = await this.api.createSession();
    this.sessionId = created.session_id;
    this.phase = "running";
    this.summary = null;
    this.step = 0;
    this.setQuery(created.query);
    return created.query;
  }

  /** Re-sync with the server (page refresh, conflict recovery). */
  async resync(sessionId: string): Promise<void> {
    const state = await this.api.getSession(sessionId);
    this.sessionId = state.session_id;
    this.step = state.step;
    this.phase = state.status === "running" ? "running" : (state.status as SessionPhase);
    this.setQuery(state.query);
  }

  private setQuery(query: Query | null): void {
    this.query = query;
    if (query) {
      for (const c of query.candidates) {
        this.shownHistory.push(c.id);
      }
    }
  }

  candidateIds(): number[] {
    return this.query ? this.query.candidates.map((c) => c.id) : [];
  }

  /**
   * Submit a click on a candidate. Stale-query conflicts (e.g. a double
   * click racing the next render) are absorbed by re-fetching the
   * current query, making clicks idempotent.
   */
  async answer(chosen: number): Promise<void> {
    if (!this.sessionId || !this.query) {
      throw new Error("no active query");
    }
    if (!this.candidateIds().includes(chosen)) {
      throw new Error(`object ${chosen} is not among the shown candidates`);
    }
    try {
      const res = await this.api.answer(this.sessionId, this.query.query_id, chosen);
      this.step += 1;
      if (res.query === null) {
        this.phase = "exhausted";
        this.query = null;
      } else {
        this.setQuery(res.query);
      }
    } catch (err) {
      if (err instanceof ApiError && err.isConflict) {
        await this.resync(this.sessionId);
        return;
      }
      throw err;
    }
  }

  /** "It's this one!": close the session on the clicked candidate. */
  async found(target: number): Promise<SessionSummary> {
    if (!this.sessionId) {
      throw new Error("no active session");
    }
    const res = await this.api.markFound(this.sessionId, target);
    this.phase = "found";
    this.summary = res.summary;
    this.query = null;
    return res.summary;
  }
}
