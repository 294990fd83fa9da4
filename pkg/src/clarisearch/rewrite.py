"""Query rewriting: history resolution and clarification-context expansion.

Two pluggable operations behind one backend contract:

* ``resolve`` turns the current query into a self-contained form given the
  conversation history.
* ``expand`` folds the clarifying question and/or the user's answer into
  the resolved query.

The built-in fallback backend is deterministic so the whole engine can run
without any model service: resolve appends up to five salient (non-stopword,
not already present) tokens from the most recent prior user query; expand
appends the context's novel non-stopword tokens, question first, then
answer. A remote backend speaking the shared JSON wire protocol can replace
either operation per run configuration.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any

import requests

from .conversation import ConversationHistory
from .errors import BackendUnavailableError, InvalidArgumentsError
from .retrieval import tokenize
from .wordlists import STOPWORDS

RESOLVE_CARRY_TOKENS = 5


class RewriteBackend(ABC):
    """Contract for rewriting backends.

    A backend advertising a capability must answer such requests without
    error on well-formed input.
    """

    identity: str = "rewrite-backend"
    supports_resolve: bool = True
    supports_expand: bool = True

    @abstractmethod
    def resolve(self, query: str, history: ConversationHistory) -> str: ...

    @abstractmethod
    def expand(self, resolved: str, question: str | None, answer: str | None) -> str: ...


class FallbackRewriteBackend(RewriteBackend):
    """Deterministic lexical rewriter used when no model service is configured."""

    identity = "fallback-lexical"

    def resolve(self, query: str, history: ConversationHistory) -> str:
        prior = history.last_user_query()
        if prior is None:
            return query
        present = set(tokenize(query))
        carried: list[str] = []
        for token in tokenize(prior):
            if token in STOPWORDS or token in present:
                continue
            carried.append(token)
            present.add(token)
            if len(carried) >= RESOLVE_CARRY_TOKENS:
                break
        if not carried:
            return query
        return query + " " + " ".join(carried)

    def expand(self, resolved: str, question: str | None, answer: str | None) -> str:
        present = set(tokenize(resolved))
        appended: list[str] = []
        for context in (question, answer):
            if context is None:
                continue
            for token in tokenize(context):
                if token in STOPWORDS or token in present:
                    continue
                appended.append(token)
                present.add(token)
        if not appended:
            return resolved
        return resolved + " " + " ".join(appended)


class RemoteRewriteBackend(RewriteBackend):
    """Client for a rewrite service speaking the shared HTTP+JSON protocol."""

    def __init__(self, endpoint: str, timeout: float = 10.0, identity: str | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.identity = identity or f"remote-rewrite:{endpoint}"

    def _call(self, payload: dict[str, Any]) -> str:
        try:
            response = requests.post(self.endpoint, json=payload, timeout=self.timeout)
            response.raise_for_status()
            body = response.json()
        except (requests.RequestException, ValueError) as exc:
            raise BackendUnavailableError(f"rewrite backend {self.endpoint}: {exc}") from exc
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str):
            raise BackendUnavailableError(f"rewrite backend {self.endpoint}: malformed response")
        return text

    def resolve(self, query: str, history: ConversationHistory) -> str:
        if not history.turns:
            return query
        wire_history = [
            {
                "user_kind": t.user.kind.value,
                "user_text": t.user.text,
                "system_kind": t.system.kind.value,
                "system_text": t.system.text,
            }
            for t in history.turns
        ]
        return self._call({"op": "resolve", "query": query, "history": wire_history})

    def expand(self, resolved: str, question: str | None, answer: str | None) -> str:
        payload: dict[str, Any] = {"op": "expand", "query": resolved, "history": []}
        if question is not None:
            payload["question"] = question
        if answer is not None:
            payload["answer"] = answer
        return self._call(payload)


def resolve(backend: RewriteBackend, query: str, history: ConversationHistory) -> str:
    """Resolve the query against the history; identity on empty history."""
    if not query.strip():
        raise InvalidArgumentsError("resolve: query must be non-empty")
    return backend.resolve(query, history)


def expand(
    backend: RewriteBackend,
    resolved: str,
    question: str | None = None,
    answer: str | None = None,
) -> str:
    """Expand the resolved query with the question and/or answer context."""
    if not resolved.strip():
        raise InvalidArgumentsError("expand: resolved query must be non-empty")
    if question is None and answer is None:
        raise InvalidArgumentsError("expand: at least one of question/answer is required")
    return backend.expand(resolved, question, answer)
