"""Clarifying-question pool management and similarity-based selection.

A raw pool is filtered down to reliable candidates (minimum length, must
look like a question, not a generic template, no duplicates) and the
question most similar to the resolved query is selected. The built-in
similarity scorer is tf-idf cosine with the pool itself as the idf corpus;
a remote embedding backend can replace it per run configuration.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import requests

from .errors import (
    BackendUnavailableError,
    ContractError,
    DuplicateIdError,
    EmptyPoolError,
    ParseError,
    ValidationError,
)
from .retrieval import tokenize
from .wordlists import GENERIC_QUESTION_BLOCKLIST, normalize_question_text

MIN_QUESTION_TOKENS = 3


@dataclass(frozen=True)
class ClarifyingQuestion:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("question id must be non-empty")
        if not self.text.strip():
            raise ValidationError(f"question {self.id!r} must carry non-empty text")


@dataclass(frozen=True)
class QuestionPool:
    """An ordered question pool; ``filtered`` marks that all filter rules passed."""

    questions: tuple[ClarifyingQuestion, ...]
    filtered: bool = False

    def __len__(self) -> int:
        return len(self.questions)


def load_pool(stream: TextIO | Iterable[str]) -> QuestionPool:
    """Read a ``question_id \\t question_text`` pool file, order preserved."""
    questions: list[ClarifyingQuestion] = []
    seen: set[str] = set()
    for line_no, raw_line in enumerate(stream, start=1):
        line = raw_line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        if "\t" not in line:
            raise ParseError("expected 'question_id<TAB>question_text'", line_no)
        qid, text = line.split("\t", 1)
        if qid in seen:
            raise DuplicateIdError(f"duplicate question id {qid!r} at line {line_no}")
        seen.add(qid)
        questions.append(ClarifyingQuestion(id=qid, text=text))
    return QuestionPool(questions=tuple(questions), filtered=False)


def filter_pool(
    pool: QuestionPool,
    min_tokens: int = MIN_QUESTION_TOKENS,
    blocklist: Sequence[str] = GENERIC_QUESTION_BLOCKLIST,
) -> QuestionPool:
    """Drop short, non-question, template and duplicate entries.

    Idempotent; never grows the pool. First occurrence wins on duplicate
    text.
    """
    blocked = {normalize_question_text(entry) for entry in blocklist}
    kept: list[ClarifyingQuestion] = []
    seen_text: set[str] = set()
    for question in pool.questions:
        text = question.text.strip()
        if len(tokenize(text)) < min_tokens:
            continue
        if not text.endswith("?"):
            continue
        if normalize_question_text(text) in blocked:
            continue
        if question.text in seen_text:
            continue
        seen_text.add(question.text)
        kept.append(question)
    return QuestionPool(questions=tuple(kept), filtered=True)


class SimilarityScorer(ABC):
    """Scores how well a candidate question matches the resolved query."""

    identity: str = "similarity-scorer"

    @abstractmethod
    def score(self, query: str, candidate: str) -> float: ...


class TfIdfScorer(SimilarityScorer):
    """Cosine over tf-idf vectors; idf is estimated from the question pool.

    ``score(a, a) == 1`` whenever ``a`` has at least one token.
    """

    identity = "builtin-tfidf-cosine"

    def __init__(self, corpus_texts: Iterable[str]):
        df: dict[str, int] = {}
        n = 0
        for text in corpus_texts:
            n += 1
            for term in set(tokenize(text)):
                df[term] = df.get(term, 0) + 1
        self._df = df
        self._n = n

    @classmethod
    def from_pool(cls, pool: QuestionPool) -> TfIdfScorer:
        return cls(q.text for q in pool.questions)

    def _idf(self, term: str) -> float:
        return math.log((1.0 + self._n) / (1.0 + self._df.get(term, 0))) + 1.0

    def _vector(self, text: str) -> dict[str, float]:
        vec: dict[str, float] = {}
        for token in tokenize(text):
            vec[token] = vec.get(token, 0.0) + 1.0
        return {t: tf * self._idf(t) for t, tf in vec.items()}

    def score(self, query: str, candidate: str) -> float:
        a = self._vector(query)
        b = self._vector(candidate)
        norm_a = math.sqrt(sum(v * v for v in a.values()))
        norm_b = math.sqrt(sum(v * v for v in b.values()))
        if norm_a == 0.0 or norm_b == 0.0:
            return 0.0
        dot = sum(w * b[t] for t, w in a.items() if t in b)
        return dot / (norm_a * norm_b)


class RemoteEmbedScorer(SimilarityScorer):
    """Dot product of unit-normalized embeddings from a remote service."""

    def __init__(self, endpoint: str, timeout: float = 10.0, identity: str | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.identity = identity or f"remote-embed:{endpoint}"
        self._cache: dict[str, list[float]] = {}

    def _embed(self, texts: list[str]) -> list[list[float]]:
        missing = [t for t in texts if t not in self._cache]
        if missing:
            try:
                response = requests.post(
                    self.endpoint, json={"op": "embed", "texts": missing}, timeout=self.timeout
                )
                response.raise_for_status()
                body = response.json()
                vectors = body["vectors"]
            except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
                raise BackendUnavailableError(f"embed backend {self.endpoint}: {exc}") from exc
            if not isinstance(vectors, list) or len(vectors) != len(missing):
                raise BackendUnavailableError(f"embed backend {self.endpoint}: malformed response")
            for text, vector in zip(missing, vectors):
                self._cache[text] = [float(x) for x in vector]
        return [self._cache[t] for t in texts]

    def score(self, query: str, candidate: str) -> float:
        vec_q, vec_c = self._embed([query, candidate])
        norm_q = math.sqrt(sum(x * x for x in vec_q))
        norm_c = math.sqrt(sum(x * x for x in vec_c))
        if norm_q == 0.0 or norm_c == 0.0:
            return 0.0
        return sum(x * y for x, y in zip(vec_q, vec_c)) / (norm_q * norm_c)


def select_question(
    resolved: str, pool: QuestionPool, scorer: SimilarityScorer
) -> ClarifyingQuestion:
    """Highest-scoring pool question for the resolved query; ties go to the
    lowest question id."""
    if not pool.filtered:
        raise ContractError("select_question requires a filtered pool")
    if not pool.questions:
        raise EmptyPoolError("cannot select from an empty question pool")
    return min(pool.questions, key=lambda q: (-scorer.score(resolved, q.text), q.id))
