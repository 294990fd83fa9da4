"""HTTP session service for interactive mixed-initiative retrieval.

Exposes the session state machine over JSON: create a session in one of
the three modes, submit queries, answer clarifying questions and receive
ranked passages. Out-of-order requests return 409 without mutating the
session. Sessions live in memory; the shared engine is read-only.
"""

from __future__ import annotations

import threading
from typing import Any

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .errors import EmptyPoolError, EngineError, InvalidArgumentsError, StateError
from .pipeline import Engine, Mode, Session, TurnResult, submit_answer, submit_query

SNIPPET_LENGTH = 160


class CreateSessionRequest(BaseModel):
    mode: str = Field(description="no_mi, mi_all or mi_clf (case-insensitive)")


class TextRequest(BaseModel):
    text: str


def _snippet(text: str) -> str:
    if len(text) <= SNIPPET_LENGTH:
        return text
    return text[: SNIPPET_LENGTH - 1].rstrip() + "…"


def _passage_cards(engine: Engine, result: TurnResult) -> list[dict[str, Any]]:
    return [
        {"id": pid, "score": score, "snippet": _snippet(engine.corpus.get(pid, ""))}
        for pid, score in result.ranking.entries
    ]


def create_app(engine: Engine, max_passages: int = 20) -> FastAPI:
    app = FastAPI(title="clarisearch session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    sessions: dict[str, Session] = {}
    session_locks: dict[str, threading.Lock] = {}
    store_lock = threading.Lock()

    def get_session(session_id: str) -> tuple[Session, threading.Lock]:
        with store_lock:
            session = sessions.get(session_id)
            if session is None:
                raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
            return session, session_locks[session_id]

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {
            "status": "ok",
            "passages": engine.index.doc_count,
            "pool_size": len(engine.pool),
            "backends": engine.backend_ids(),
        }

    @app.post("/session")
    def create_session(request: CreateSessionRequest) -> dict[str, Any]:
        try:
            mode = Mode(request.mode.lower())
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown mode {request.mode!r}") from None
        session = Session.new(engine, mode)
        with store_lock:
            sessions[session.id] = session
            session_locks[session.id] = threading.Lock()
        return {"session_id": session.id, "mode": mode.value, "state": session.state.value}

    @app.get("/session/{session_id}")
    def session_info(session_id: str) -> dict[str, Any]:
        session, _ = get_session(session_id)
        return {
            "session_id": session.id,
            "mode": session.mode.value,
            "state": session.state.value,
            "turns": len(session.history),
        }

    @app.post("/session/{session_id}/query")
    def post_query(session_id: str, request: TextRequest) -> dict[str, Any]:
        session, lock = get_session(session_id)
        with lock:
            try:
                outcome = submit_query(session, request.text)
            except StateError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except (InvalidArgumentsError, EmptyPoolError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            except EngineError as exc:
                raise HTTPException(status_code=500, detail=str(exc)) from exc
        if isinstance(outcome, TurnResult):
            return {
                "state": session.state.value,
                "resolved_query": outcome.query_state.resolved,
                "expanded_query": outcome.query_state.expanded,
                "label": None,
                "passages": _passage_cards(engine, outcome)[:max_passages],
            }
        return {
            "state": session.state.value,
            "clarifying_question": {"id": outcome.id, "text": outcome.text},
        }

    @app.post("/session/{session_id}/answer")
    def post_answer(session_id: str, request: TextRequest) -> dict[str, Any]:
        session, lock = get_session(session_id)
        with lock:
            try:
                result = submit_answer(session, request.text)
            except StateError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except InvalidArgumentsError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            except EngineError as exc:
                raise HTTPException(status_code=500, detail=str(exc)) from exc
        return {
            "state": session.state.value,
            "resolved_query": result.query_state.resolved,
            "expanded_query": result.query_state.expanded,
            "label": None if result.label is None else int(result.label),
            "label_name": None if result.label is None else result.label.display_name,
            "question": None if result.question_asked is None else result.question_asked.text,
            "passages": _passage_cards(engine, result)[:max_passages],
        }

    return app
