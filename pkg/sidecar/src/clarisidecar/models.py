"""Deterministic model implementations behind the wire protocol.

These are lightweight, fully reproducible stand-ins with the same
interfaces a neural deployment would have: a lexical rewriter, a hashed
bag-of-words embedder, an overlap-based relevance scorer with a logistic
pairwise head, and a nearest-centroid usefulness classifier trained from a
standard annotation file (``label \\t query \\t question \\t answer``).
Heavier models can replace any of them without touching the protocol
layer.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from pathlib import Path

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# minimal carrier-word list used for salience filtering in the rewriter
# and novelty detection in the classifier
FILLER_WORDS = frozenset({
    "a", "an", "and", "are", "about", "at", "be", "by", "do", "for", "from",
    "have", "i", "in", "is", "it", "me", "of", "on", "or", "tell", "that",
    "the", "this", "to", "want", "was", "with", "would", "you",
})

YES_WORDS = frozenset({"yes", "yeah", "yep", "sure", "correct", "right", "exactly"})
NO_WORDS = frozenset({"no", "nope", "not", "nah"})


def tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


# --- rewriting --------------------------------------------------------------


class LexicalRewriter:
    """Salient-term rewriter: resolve carries terms from earlier queries,
    expand folds in novel context terms."""

    identity = "sidecar-lexical-rewriter"
    carry_limit = 8

    def resolve(self, query: str, history: list[dict]) -> str:
        present = set(tokens(query))
        carried: list[str] = []
        for turn in reversed(history):
            if turn.get("user_kind") != "query":
                continue
            for token in tokens(turn.get("user_text", "")):
                if token in FILLER_WORDS or token in present:
                    continue
                carried.append(token)
                present.add(token)
                if len(carried) >= self.carry_limit:
                    break
            if carried:
                break
        if not carried:
            return query
        return query + " " + " ".join(carried)

    def expand(self, query: str, question: str | None, answer: str | None) -> str:
        present = set(tokens(query))
        added: list[str] = []
        for context in (question, answer):
            if not context:
                continue
            for token in tokens(context):
                if token in FILLER_WORDS or token in present:
                    continue
                added.append(token)
                present.add(token)
        if not added:
            return query
        return query + " " + " ".join(added)


# --- embeddings --------------------------------------------------------------


class HashedEmbedder:
    """Signed feature-hashing embedder; unit-normalized, fully deterministic."""

    identity = "sidecar-hash-embedder"

    def __init__(self, dimensions: int = 64):
        self.dimensions = dimensions

    def _slot(self, token: str) -> tuple[int, float]:
        digest = hashlib.sha1(token.encode("utf-8")).digest()
        index = int.from_bytes(digest[:4], "big") % self.dimensions
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        return index, sign

    def embed(self, text: str) -> list[float]:
        vector = [0.0] * self.dimensions
        for token in tokens(text):
            index, sign = self._slot(token)
            vector[index] += sign
        norm = math.sqrt(sum(v * v for v in vector))
        if norm == 0.0:
            return vector
        return [v / norm for v in vector]


# --- relevance scoring ---------------------------------------------------------


class OverlapScorer:
    """Binary-overlap cosine between query and passage token sets."""

    identity = "sidecar-overlap-scorer"

    def score(self, query: str, passage_text: str) -> float:
        q = set(tokens(query))
        d = set(tokens(passage_text))
        if not q or not d:
            return 0.0
        return len(q & d) / math.sqrt(len(q) * len(d))

    def prefer(self, query: str, a_text: str, b_text: str) -> float:
        diff = self.score(query, a_text) - self.score(query, b_text)
        if diff >= 0.0:
            return 1.0 / (1.0 + math.exp(-diff))
        return 1.0 - 1.0 / (1.0 + math.exp(diff))


# --- usefulness classification ----------------------------------------------------


@dataclass(frozen=True)
class TrainingRow:
    query: str
    question: str
    answer: str
    label: int


def read_annotation_file(path: str | Path) -> list[TrainingRow]:
    rows: list[TrainingRow] = []
    for line_no, raw in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 4:
            raise ValueError(f"{path}:{line_no}: expected 4 tab-separated fields")
        label_str, query, question, answer = parts
        if label_str not in {"0", "1", "2", "3"}:
            raise ValueError(f"{path}:{line_no}: bad label {label_str!r}")
        rows.append(TrainingRow(query=query, question=question, answer=answer, label=int(label_str)))
    return rows


class CentroidUsefulnessClassifier:
    """Nearest-centroid classifier over a small lexical feature vector.

    Distinct algorithm and feature code from any engine-side classifier;
    only the label semantics (0 none / 1 question / 2 answer / 3 both) are
    shared, via the protocol.
    """

    identity = "sidecar-centroid-usefulness"

    def __init__(self):
        self._centroids: dict[int, list[float]] | None = None

    @property
    def trained(self) -> bool:
        return self._centroids is not None

    @staticmethod
    def _features(query: str, question: str, answer: str) -> list[float]:
        answer_tokens = tokens(answer)
        known = set(tokens(query)) | set(tokens(question)) | FILLER_WORDS | YES_WORDS | NO_WORDS
        novel = [t for t in answer_tokens if t not in known]
        first_content = next((t for t in answer_tokens if t not in FILLER_WORDS), "")
        affirmative = 1.0 if first_content in YES_WORDS else 0.0
        negative = 1.0 if first_content in NO_WORDS else 0.0
        has_novel = 1.0 if novel else 0.0
        return [
            affirmative,
            negative,
            has_novel,
            affirmative * has_novel,
            negative * has_novel,
            min(len(answer_tokens), 12) / 12.0,
        ]

    def fit(self, rows: list[TrainingRow]) -> None:
        if not rows:
            raise ValueError("no training rows")
        sums: dict[int, list[float]] = {}
        counts: dict[int, int] = {}
        for row in rows:
            vector = self._features(row.query, row.question, row.answer)
            acc = sums.setdefault(row.label, [0.0] * len(vector))
            for i, v in enumerate(vector):
                acc[i] += v
            counts[row.label] = counts.get(row.label, 0) + 1
        self._centroids = {
            label: [v / counts[label] for v in acc] for label, acc in sums.items()
        }

    def classify(self, query: str, question: str, answer: str) -> int:
        if self._centroids is None:
            raise RuntimeError("classifier is not trained")
        vector = self._features(query, question, answer)
        best_label = None
        best_distance = None
        for label in sorted(self._centroids):
            centroid = self._centroids[label]
            distance = sum((a - b) ** 2 for a, b in zip(vector, centroid))
            if best_distance is None or distance < best_distance:
                best_label = label
                best_distance = distance
        return int(best_label)
