"""Second- and third-stage reranking over pluggable scorer backends.

The cascade re-scores the head of a ranked list at fixed depths: a
pointwise pass over the top candidates, then a pairwise pass over a
shorter head aggregated as the sum of win probabilities. Entries beyond a
stage's depth keep their previous order and scores. The built-in fallbacks
(tf-idf cosine pointwise; logistic-of-score-difference pairwise) make the
cascade fully testable without any model service.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Mapping, Sequence

import requests

from .errors import BackendUnavailableError, NotFoundError, ValidationError
from .retrieval import InvertedIndex, RankedList, tokenize

POINTWISE_DEPTH = 1000
PAIRWISE_DEPTH = 50


@dataclass(frozen=True)
class RerankConfig:
    pointwise_depth: int = POINTWISE_DEPTH
    pairwise_depth: int = PAIRWISE_DEPTH

    def __post_init__(self) -> None:
        if self.pointwise_depth < 0 or self.pairwise_depth < 0:
            raise ValidationError("rerank depths must be non-negative")
        if self.pairwise_depth > self.pointwise_depth:
            raise ValidationError("pairwise_depth must not exceed pointwise_depth")


class PointwiseScorer(ABC):
    identity: str = "pointwise-scorer"

    @abstractmethod
    def score(self, query: str, passage_text: str) -> float: ...

    def score_many(self, query: str, passages: Sequence[tuple[str, str]]) -> list[float]:
        return [self.score(query, text) for _, text in passages]


class PairwiseScorer(ABC):
    identity: str = "pairwise-scorer"

    @abstractmethod
    def prefer(self, query: str, a_text: str, b_text: str) -> float: ...

    def prefer_many(
        self, query: str, pairs: Sequence[tuple[tuple[str, str], tuple[str, str]]]
    ) -> list[float]:
        return [self.prefer(query, a_text, b_text) for (_, a_text), (_, b_text) in pairs]


class TfIdfPointwiseScorer(PointwiseScorer):
    """Cosine between tf-idf vectors of query and passage; idf from the index."""

    identity = "builtin-tfidf-pointwise"

    def __init__(self, index: InvertedIndex):
        self._index = index

    def _vector(self, text: str) -> dict[str, float]:
        vec: dict[str, float] = {}
        for token in tokenize(text):
            vec[token] = vec.get(token, 0.0) + 1.0
        return {t: tf * self._index.idf(t) for t, tf in vec.items()}

    def score(self, query: str, passage_text: str) -> float:
        q = self._vector(query)
        d = self._vector(passage_text)
        norm_q = math.sqrt(sum(v * v for v in q.values()))
        norm_d = math.sqrt(sum(v * v for v in d.values()))
        if norm_q == 0.0 or norm_d == 0.0:
            return 0.0
        dot = sum(w * d[t] for t, w in q.items() if t in d)
        return dot / (norm_q * norm_d)


class LogisticPairwiseScorer(PairwiseScorer):
    """p(a beats b) = sigmoid(score(a) - score(b)) over a pointwise scorer.

    Computed so that ``prefer(a, b) + prefer(b, a) == 1`` exactly.
    """

    identity = "builtin-logistic-pairwise"

    def __init__(self, pointwise: PointwiseScorer):
        self._pointwise = pointwise

    @staticmethod
    def _sigmoid_pair(diff: float) -> float:
        if diff >= 0.0:
            return 1.0 / (1.0 + math.exp(-diff))
        return 1.0 - 1.0 / (1.0 + math.exp(diff))

    def prefer(self, query: str, a_text: str, b_text: str) -> float:
        diff = self._pointwise.score(query, a_text) - self._pointwise.score(query, b_text)
        return self._sigmoid_pair(diff)

    def prefer_many(
        self, query: str, pairs: Sequence[tuple[tuple[str, str], tuple[str, str]]]
    ) -> list[float]:
        cache: dict[str, float] = {}

        def scored(text: str) -> float:
            if text not in cache:
                cache[text] = self._pointwise.score(query, text)
            return cache[text]

        return [
            self._sigmoid_pair(scored(a_text) - scored(b_text))
            for (_, a_text), (_, b_text) in pairs
        ]


class RemotePointwiseScorer(PointwiseScorer):
    def __init__(self, endpoint: str, timeout: float = 10.0, identity: str | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.identity = identity or f"remote-pointwise:{endpoint}"

    def score(self, query: str, passage_text: str) -> float:
        return self.score_many(query, [("p", passage_text)])[0]

    def score_many(self, query: str, passages: Sequence[tuple[str, str]]) -> list[float]:
        payload = {
            "op": "score",
            "query": query,
            "passages": [{"id": pid, "text": text} for pid, text in passages],
        }
        try:
            response = requests.post(self.endpoint, json=payload, timeout=self.timeout)
            response.raise_for_status()
            scores = response.json()["scores"]
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise BackendUnavailableError(f"score backend {self.endpoint}: {exc}") from exc
        if not isinstance(scores, list) or len(scores) != len(passages):
            raise BackendUnavailableError(f"score backend {self.endpoint}: malformed response")
        return [float(s) for s in scores]


class RemotePairwiseScorer(PairwiseScorer):
    def __init__(self, endpoint: str, timeout: float = 10.0, identity: str | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.identity = identity or f"remote-pairwise:{endpoint}"

    def prefer(self, query: str, a_text: str, b_text: str) -> float:
        return self.prefer_many(query, [(("a", a_text), ("b", b_text))])[0]

    def prefer_many(
        self, query: str, pairs: Sequence[tuple[tuple[str, str], tuple[str, str]]]
    ) -> list[float]:
        payload = {
            "op": "prefer",
            "query": query,
            "pairs": [
                {"a_id": a_id, "a_text": a_text, "b_id": b_id, "b_text": b_text}
                for (a_id, a_text), (b_id, b_text) in pairs
            ],
        }
        try:
            response = requests.post(self.endpoint, json=payload, timeout=self.timeout)
            response.raise_for_status()
            probs = response.json()["probs"]
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise BackendUnavailableError(f"prefer backend {self.endpoint}: {exc}") from exc
        if not isinstance(probs, list) or len(probs) != len(pairs):
            raise BackendUnavailableError(f"prefer backend {self.endpoint}: malformed response")
        return [float(p) for p in probs]


def _lookup_texts(candidates: Sequence[tuple[str, float]], corpus: Mapping[str, str]) -> list[str]:
    texts = []
    for pid, _ in candidates:
        if pid not in corpus:
            raise NotFoundError(f"passage {pid!r} missing from corpus lookup")
        texts.append(corpus[pid])
    return texts


def rerank_pointwise(
    query: str,
    candidates: RankedList,
    corpus: Mapping[str, str],
    scorer: PointwiseScorer,
    depth: int = POINTWISE_DEPTH,
) -> RankedList:
    """Re-score and re-sort the top ``depth`` entries; the tail keeps its
    order and original scores."""
    if depth < 0:
        raise ValidationError("depth must be non-negative")
    head = list(candidates.entries[:depth])
    tail = list(candidates.entries[depth:])
    if not head:
        return candidates
    texts = _lookup_texts(head, corpus)
    scores = scorer.score_many(query, [(pid, text) for (pid, _), text in zip(head, texts)])
    rescored = [(pid, float(s)) for (pid, _), s in zip(head, scores)]
    rescored.sort(key=lambda kv: (-kv[1], kv[0]))
    return RankedList(tuple(rescored) + tuple(tail))


def rerank_pairwise(
    query: str,
    candidates: RankedList,
    corpus: Mapping[str, str],
    scorer: PairwiseScorer,
    depth: int = PAIRWISE_DEPTH,
) -> RankedList:
    """Re-sort the top ``depth`` entries by aggregate win probability
    ``s(i) = sum over j != i of p(query, i, j)``; the tail is unchanged."""
    if depth < 0:
        raise ValidationError("depth must be non-negative")
    head = list(candidates.entries[:depth])
    tail = list(candidates.entries[depth:])
    if len(head) <= 1:
        return candidates
    texts = _lookup_texts(head, corpus)
    items = [(pid, text) for (pid, _), text in zip(head, texts)]
    pairs = [
        (items[i], items[j])
        for i in range(len(items))
        for j in range(len(items))
        if i != j
    ]
    probs = scorer.prefer_many(query, pairs)
    aggregate = [0.0] * len(items)
    pair_index = 0
    for i in range(len(items)):
        for j in range(len(items)):
            if i == j:
                continue
            aggregate[i] += probs[pair_index]
            pair_index += 1
    rescored = [(pid, aggregate[idx]) for idx, (pid, _) in enumerate(head)]
    rescored.sort(key=lambda kv: (-kv[1], kv[0]))
    return RankedList(tuple(rescored) + tuple(tail))
