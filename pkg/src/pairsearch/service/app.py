"""HTTP layer of the interactive search service.

JSON over conventional status codes; every error body is
{"error": <reason>, "detail": <message>}. Sessions hold at most one
outstanding query; answering a stale query id is a conflict, answering
with a non-candidate is a bad request.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from ..exceptions import ProtocolError
from .models import (
    AnswerRequest,
    AnswerResponse,
    Candidate,
    CreateSessionRequest,
    FoundRequest,
    FoundResponse,
    Health,
    ObjectInfo,
    Query,
    RetrainResponse,
    SessionCreated,
    SessionInfo,
    SessionList,
    SessionStateResponse,
    SessionSummary,
)
from .state import (
    STATUS_RUNNING,
    InteractiveSession,
    InvalidCandidateError,
    ServiceConfig,
    ServiceState,
    StaleQueryError,
)

_REASONS = {400: "bad_request", 404: "not_found", 409: "conflict",
            500: "internal_error", 503: "service_unavailable"}


def _query_payload(state: ServiceState, session: InteractiveSession) -> Optional[Query]:
    if session.current_query_id is None:
        return None
    catalog = state.catalog
    return Query(
        query_id=session.current_query_id,
        step=session.steps + 1,
        candidates=[Candidate(id=c, label=catalog.label(c),
                              image_ref=catalog.image_ref(c))
                    for c in session.current_candidates],
    )


def create_app(config: ServiceConfig, state: Optional[ServiceState] = None) -> FastAPI:
    state = state if state is not None else ServiceState(config)
    app = FastAPI(title="pairsearch service", version="0.1.0")
    app.state.search = state

    @app.exception_handler(HTTPException)
    async def _http_error(_request: Request, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code,
                            content={"error": _REASONS.get(exc.status_code, "error"),
                                     "detail": str(exc.detail)})

    def require_loaded() -> ServiceState:
        if not state.loaded:
            raise HTTPException(503, "no object catalog is loaded")
        return state

    def fetch_session(session_id: str) -> InteractiveSession:
        try:
            return state.get_session(session_id)
        except KeyError:
            raise HTTPException(404, f"unknown session {session_id!r}")

    @app.get("/health", response_model=Health)
    def health():
        st = state
        active = sum(1 for s in st.sessions.values() if s.status == STATUS_RUNNING)
        return Health(status="ok" if st.loaded else "empty",
                      objects=st.catalog.n if st.loaded else 0,
                      embedding_version=st.version,
                      sessions_active=active,
                      triplets=len(st.store))

    @app.post("/sessions", response_model=SessionCreated, status_code=201)
    def create_session(body: CreateSessionRequest = CreateSessionRequest()):
        st = require_loaded()
        try:
            session = st.create_session(client_tag=body.client_tag)
        except ProtocolError as exc:
            raise HTTPException(503, str(exc))
        return SessionCreated(session_id=session.id,
                              query=_query_payload(st, session))

    @app.get("/sessions", response_model=SessionList)
    def list_sessions():
        state.expire_stale()
        return SessionList(sessions=[
            SessionInfo(session_id=s.id, step=s.steps, status=s.status,
                        client_tag=s.client_tag, created_at=s.created_at,
                        updated_at=s.updated_at)
            for s in state.sessions.values()])

    @app.get("/sessions/{session_id}", response_model=SessionStateResponse)
    def session_state(session_id: str):
        session = fetch_session(session_id)
        return SessionStateResponse(session_id=session.id, status=session.status,
                                    step=session.steps,
                                    query=_query_payload(state, session))

    @app.post("/sessions/{session_id}/answer", response_model=AnswerResponse)
    def submit_answer(session_id: str, body: AnswerRequest):
        st = require_loaded()
        session = fetch_session(session_id)
        with st.lock:
            try:
                session.answer(body.query_id, body.chosen)
            except StaleQueryError as exc:
                raise HTTPException(409, str(exc))
            except InvalidCandidateError as exc:
                raise HTTPException(400, str(exc))
            except ProtocolError as exc:
                raise HTTPException(409, str(exc))
            has_more = session.generate_query()
        return AnswerResponse(query=_query_payload(st, session),
                              exhausted=not has_more)

    @app.post("/sessions/{session_id}/found", response_model=FoundResponse)
    def mark_found(session_id: str, body: FoundRequest):
        st = require_loaded()
        session = fetch_session(session_id)
        try:
            triplets = st.finish_session(session, body.target)
        except InvalidCandidateError as exc:
            raise HTTPException(409, str(exc))
        except ProtocolError as exc:
            raise HTTPException(409, str(exc))
        return FoundResponse(summary=SessionSummary(
            session_id=session.id, target=body.target, steps=session.steps,
            triplets_added=len(triplets), embedding_version=session.version))

    @app.get("/objects/{object_id}", response_model=ObjectInfo)
    def object_info(object_id: int):
        st = require_loaded()
        if not 0 <= object_id < st.catalog.n:
            raise HTTPException(404, f"unknown object {object_id}")
        return ObjectInfo(label=st.catalog.label(object_id),
                          image_ref=st.catalog.image_ref(object_id))

    @app.post("/admin/retrain", response_model=RetrainResponse)
    def retrain():
        st = require_loaded()
        trained_on = len(st.store)
        try:
            version = st.retrain()
        except ProtocolError as exc:
            raise HTTPException(409, str(exc))
        except Exception as exc:  # training failure: keep serving old version
            raise HTTPException(500, f"retrain failed, serving version "
                                     f"{st.version}: {exc}")
        return RetrainResponse(version=version, trained_on=trained_on)

    frontend = Path(__file__).resolve().parents[4] / "frontend" / "dist"
    if frontend.is_dir():  # serve the built single-page app when present
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=str(frontend), html=True),
                  name="frontend")

    return app
