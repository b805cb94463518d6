"""Request/response schemas for the interactive search service."""
from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field


class Candidate(BaseModel):
    id: int
    label: str
    image_ref: Optional[str] = None


class Query(BaseModel):
    query_id: str
    step: int
    candidates: List[Candidate]


class CreateSessionRequest(BaseModel):
    client_tag: str = ""


class SessionCreated(BaseModel):
    session_id: str
    query: Query


class AnswerRequest(BaseModel):
    query_id: str
    chosen: int


class AnswerResponse(BaseModel):
    query: Optional[Query] = None
    exhausted: bool = False


class FoundRequest(BaseModel):
    target: int


class SessionSummary(BaseModel):
    session_id: str
    target: int
    steps: int = Field(description="number of answered queries")
    triplets_added: int
    embedding_version: int


class FoundResponse(BaseModel):
    summary: SessionSummary


class ObjectInfo(BaseModel):
    label: str
    image_ref: Optional[str] = None


class Health(BaseModel):
    status: str
    objects: int
    embedding_version: int
    sessions_active: int
    triplets: int


class RetrainResponse(BaseModel):
    version: int
    trained_on: int


class SessionInfo(BaseModel):
    session_id: str
    step: int
    status: str
    client_tag: str
    created_at: float
    updated_at: float


class SessionList(BaseModel):
    sessions: List[SessionInfo]


class SessionStateResponse(BaseModel):
    session_id: str
    status: str
    step: int
    query: Optional[Query] = None


class ErrorBody(BaseModel):
    error: str
    detail: str
