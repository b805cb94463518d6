// Payload shapes of the search service JSON API.

export interface Candidate {
  id: number;
  label: string;
  image_ref: string | null;
}

export interface Query {
  query_id: string;
  step: number;
  candidates: Candidate[];
}

export interface SessionCreated {
  session_id: string;
  query: Query;
}

export interface AnswerResponse {
  query: Query | null;
  exhausted: boolean;
}

export interface SessionSummary {
  session_id: string;
  target: number;
  steps: number;
  triplets_added: number;
  embedding_version: number;
}

export interface FoundResponse {
  summary: SessionSummary;
}

export interface SessionStateResponse {
  session_id: string;
  status: string;
  step: number;
  query: Query | null;
}

export interface Health {
  status: string;
  objects: number;
  embedding_version: number;
  sessions_active: number;
  triplets: number;
}

export interface ApiErrorBody {
  error: string;
  detail: string;
}
