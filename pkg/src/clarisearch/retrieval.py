"""First-stage ranked retrieval: inverted index, BM25 scoring, RM3 expansion.

BM25 uses the smoothed, always-non-negative idf
``ln(1 + (N - df + 0.5) / (df + 0.5))`` with k1=0.95 and b=0.45 by default.
RM3 builds a relevance model from the top feedback passages, keeps the
highest-probability non-stopword terms and interpolates with the original
query distribution.

Scores are 64-bit floats; ranking ties break by ascending passage id so
that results are deterministic across platforms. Indexes are immutable
after build and safe to share between threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, TextIO

from .errors import DuplicateIdError, NotFoundError, ParseError, ValidationError
from .wordlists import STOPWORDS

BM25_K1 = 0.95
BM25_B = 0.45
RM3_FB_DOCS = 10
RM3_FB_TERMS = 10
RM3_LAMBDA = 0.5

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters.

    No stemming, no stopword removal; empty input yields an empty list.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Passage:
    """One collection passage; ids are collection-unique and whitespace-free."""

    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("passage id must be non-empty")
        if any(ch.isspace() for ch in self.id):
            raise ValidationError(f"passage id {self.id!r} must not contain whitespace")


@dataclass(frozen=True)
class WeightedQuery:
    """Bag-of-terms query with non-negative finite weights."""

    weights: Mapping[str, float]

    def __post_init__(self) -> None:
        for term, weight in self.weights.items():
            if not math.isfinite(weight) or weight < 0.0:
                raise ValidationError(f"query weight for {term!r} must be finite and non-negative")

    @classmethod
    def from_text(cls, text: str) -> WeightedQuery:
        """Term-frequency weights over the tokenized text."""
        weights: dict[str, float] = {}
        for token in tokenize(text):
            weights[token] = weights.get(token, 0.0) + 1.0
        return cls(weights)

    def normalized(self) -> dict[str, float]:
        total = sum(self.weights.values())
        if total <= 0.0:
            return {}
        return {t: w / total for t, w in self.weights.items() if w > 0.0}


@dataclass(frozen=True)
class RankedList:
    """Ordered (passage_id, score) entries with unique ids.

    Lists built by :func:`search` are canonically ordered: scores
    non-increasing, ties broken by ascending passage id. Rerank stages may
    concatenate differently-scaled heads and tails, so global score
    monotonicity is a builder guarantee, not a container invariant.
    """

    entries: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for pid, score in self.entries:
            if pid in seen:
                raise ValidationError(f"duplicate passage id {pid!r} in ranked list")
            if not math.isfinite(score):
                raise ValidationError(f"non-finite score for passage {pid!r}")
            seen.add(pid)

    @classmethod
    def from_scores(cls, scores: Mapping[str, float] | Iterable[tuple[str, float]]) -> RankedList:
        items = scores.items() if isinstance(scores, Mapping) else list(scores)
        ordered = sorted(items, key=lambda kv: (-kv[1], kv[0]))
        return cls(tuple(ordered))

    def ids(self) -> list[str]:
        return [pid for pid, _ in self.entries]

    def head(self, k: int) -> RankedList:
        return RankedList(self.entries[:k])

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class InvertedIndex:
    """Term postings plus document statistics for BM25.

    ``postings`` maps term -> ((passage_id, term_frequency), ...) with
    passage ids ascending; ``doc_length`` maps passage_id -> token count.
    """

    postings: Mapping[str, tuple[tuple[str, int], ...]]
    doc_length: Mapping[str, int]
    doc_count: int
    avg_doc_length: float

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def term_frequency(self, term: str, passage_id: str) -> int:
        for pid, tf in self.postings.get(term, ()):
            if pid == passage_id:
                return tf
        return 0


def build_index(corpus: Iterable[Passage]) -> InvertedIndex:
    """Index a corpus; raises on duplicate passage ids."""
    counts: dict[str, dict[str, int]] = {}
    doc_length: dict[str, int] = {}
    for passage in corpus:
        if passage.id in doc_length:
            raise DuplicateIdError(f"duplicate passage id {passage.id!r}")
        tokens = tokenize(passage.text)
        doc_length[passage.id] = len(tokens)
        for token in tokens:
            counts.setdefault(token, {})
            counts[token][passage.id] = counts[token].get(passage.id, 0) + 1

    postings = {
        term: tuple(sorted(per_doc.items()))
        for term, per_doc in sorted(counts.items())
    }
    doc_count = len(doc_length)
    avg = (sum(doc_length.values()) / doc_count) if doc_count else 0.0
    return InvertedIndex(
        postings=postings,
        doc_length=dict(sorted(doc_length.items())),
        doc_count=doc_count,
        avg_doc_length=avg,
    )


def bm25_score(
    index: InvertedIndex,
    query: WeightedQuery,
    passage_id: str,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> float:
    """BM25 score of one passage; query terms absent from it contribute 0."""
    if passage_id not in index.doc_length:
        raise NotFoundError(f"passage {passage_id!r} not in index")
    length = index.doc_length[passage_id]
    norm = k1 * (1.0 - b + b * (length / index.avg_doc_length if index.avg_doc_length else 0.0))
    score = 0.0
    for term, weight in query.weights.items():
        if weight <= 0.0:
            continue
        tf = index.term_frequency(term, passage_id)
        if tf == 0:
            continue
        score += weight * index.idf(term) * (tf * (k1 + 1.0)) / (tf + norm)
    return score


def search(
    index: InvertedIndex,
    query: WeightedQuery,
    k: int,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> RankedList:
    """Top-k passages by BM25 with positive score, canonically ordered."""
    if k <= 0:
        return RankedList()
    scores: dict[str, float] = {}
    for term, weight in query.weights.items():
        if weight <= 0.0:
            continue
        posting = index.postings.get(term)
        if not posting:
            continue
        idf = index.idf(term)
        for pid, tf in posting:
            length = index.doc_length[pid]
            norm = k1 * (1.0 - b + b * (length / index.avg_doc_length if index.avg_doc_length else 0.0))
            scores[pid] = scores.get(pid, 0.0) + weight * idf * (tf * (k1 + 1.0)) / (tf + norm)
    positive = [(pid, s) for pid, s in scores.items() if s > 0.0]
    positive.sort(key=lambda kv: (-kv[1], kv[0]))
    return RankedList(tuple(positive[:k]))


def rm3_expand(
    index: InvertedIndex,
    query: WeightedQuery,
    fb_docs: int = RM3_FB_DOCS,
    fb_terms: int = RM3_FB_TERMS,
    lambda_: float = RM3_LAMBDA,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> WeightedQuery:
    """Interpolate the query with a relevance model from feedback passages.

    Feedback passages are the top ``fb_docs`` results of :func:`search`,
    each weighted by its normalized BM25 score; term probability within a
    passage is tf/doc_length. The top ``fb_terms`` non-stopword terms by
    relevance-model probability are retained. Output weights are
    ``lambda_ * p(t|q) + (1 - lambda_) * p(t|RM)``, renormalized to sum
    to 1. With no positive-scoring feedback passages the normalized input
    is returned unchanged.
    """
    if fb_docs < 0 or fb_terms < 0:
        raise ValidationError("fb_docs and fb_terms must be non-negative")
    if not 0.0 <= lambda_ <= 1.0:
        raise ValidationError("lambda_ must lie in [0, 1]")

    p_q = query.normalized()
    feedback = search(index, query, fb_docs, k1=k1, b=b)
    if not feedback.entries:
        return WeightedQuery(p_q)

    total_score = sum(score for _, score in feedback.entries)
    doc_weight = {pid: score / total_score for pid, score in feedback.entries}

    p_rm: dict[str, float] = {}
    for term, posting in index.postings.items():
        if term in STOPWORDS:
            continue
        mass = 0.0
        for pid, tf in posting:
            if pid in doc_weight:
                mass += doc_weight[pid] * (tf / index.doc_length[pid])
        if mass > 0.0:
            p_rm[term] = mass

    retained = dict(sorted(p_rm.items(), key=lambda kv: (-kv[1], kv[0]))[:fb_terms])

    combined: dict[str, float] = {}
    for term in set(p_q) | set(retained):
        weight = lambda_ * p_q.get(term, 0.0) + (1.0 - lambda_) * retained.get(term, 0.0)
        if weight > 0.0:
            combined[term] = weight
    total = sum(combined.values())
    if total <= 0.0:
        return WeightedQuery(p_q)
    return WeightedQuery({t: w / total for t, w in sorted(combined.items())})


# --- corpus and index files --------------------------------------------------

_INDEX_HEADER = "clarisearch-index v1"


def load_corpus(stream: TextIO | Iterable[str]) -> list[Passage]:
    """Read a ``passage_id \\t text`` corpus file."""
    passages: list[Passage] = []
    seen: set[str] = set()
    for line_no, raw_line in enumerate(stream, start=1):
        line = raw_line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        if "\t" not in line:
            raise ParseError("expected 'passage_id<TAB>text'", line_no)
        pid, text = line.split("\t", 1)
        if pid in seen:
            raise DuplicateIdError(f"duplicate passage id {pid!r} at line {line_no}")
        seen.add(pid)
        passages.append(Passage(id=pid, text=text))
    return passages


def save_index(index: InvertedIndex) -> str:
    """Serialize deterministically: header, doc lengths, then postings in
    ascending term order."""
    lines = [_INDEX_HEADER, f"docs {index.doc_count}"]
    for pid in sorted(index.doc_length):
        lines.append(f"L\t{pid}\t{index.doc_length[pid]}")
    for term in sorted(index.postings):
        for pid, tf in index.postings[term]:
            lines.append(f"P\t{term}\t{pid}\t{tf}")
    return "".join(line + "\n" for line in lines)


def load_index(stream: TextIO | Iterable[str]) -> InvertedIndex:
    lines = iter(stream)
    try:
        header = next(lines).rstrip("\n")
    except StopIteration:
        raise ParseError("empty index file", 1) from None
    if header != _INDEX_HEADER:
        raise ParseError(f"unrecognized index header {header!r}", 1)
    try:
        doc_line = next(lines).rstrip("\n")
        doc_count = int(doc_line.split(" ", 1)[1])
    except (StopIteration, IndexError, ValueError):
        raise ParseError("missing or malformed doc-count line", 2) from None

    doc_length: dict[str, int] = {}
    postings: dict[str, list[tuple[str, int]]] = {}
    for line_no, raw_line in enumerate(lines, start=3):
        line = raw_line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if parts[0] == "L" and len(parts) == 3:
            doc_length[parts[1]] = int(parts[2])
        elif parts[0] == "P" and len(parts) == 4:
            postings.setdefault(parts[1], []).append((parts[2], int(parts[3])))
        else:
            raise ParseError(f"unrecognized index line {line!r}", line_no)
    if len(doc_length) != doc_count:
        raise ParseError(f"doc count {doc_count} does not match {len(doc_length)} length records")
    avg = (sum(doc_length.values()) / doc_count) if doc_count else 0.0
    return InvertedIndex(
        postings={t: tuple(p) for t, p in postings.items()},
        doc_length=doc_length,
        doc_count=doc_count,
        avg_doc_length=avg,
    )
