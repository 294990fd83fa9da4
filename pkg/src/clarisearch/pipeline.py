"""End-to-end turn orchestration and batch experiment runs.

Three run modes share one retrieval stack (RM3-expanded BM25 followed by
the pointwise/pairwise rerank cascade):

* ``NO_MI``   — retrieve directly on the history-resolved query;
* ``MI_ALL``  — always ask a clarifying question and fold both the
  question and the answer into the query;
* ``MI_CLF``  — ask, then let the usefulness classifier decide which parts
  (if any) of the exchange to fold in.

The clarifying exchange is appended to the history as regular turns, so
later resolution can draw on it. Completed rankings have their scores
clamped to be non-increasing across cascade stage boundaries so run files
stay valid TREC format.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, TextIO

from . import rewrite as rewrite_mod
from .clarification import ClarifyingQuestion, QuestionPool, SimilarityScorer, select_question
from .conversation import (
    ConversationHistory,
    QueryState,
    Role,
    Utterance,
    UtteranceKind,
    append_turn,
)
from .errors import (
    BackendUnavailableError,
    DuplicateIdError,
    InvalidArgumentsError,
    ParseError,
    StateError,
)
from .evaluation import RunRecord
from .rerank import (
    LogisticPairwiseScorer,
    PairwiseScorer,
    PointwiseScorer,
    RerankConfig,
    TfIdfPointwiseScorer,
    rerank_pairwise,
    rerank_pointwise,
)
from .retrieval import (
    BM25_B,
    BM25_K1,
    RM3_FB_DOCS,
    RM3_FB_TERMS,
    RM3_LAMBDA,
    InvertedIndex,
    Passage,
    RankedList,
    WeightedQuery,
    build_index,
    rm3_expand,
    search,
)
from .usefulness import (
    RemoteClassifyBackend,
    UsefulnessLabel,
    UsefulnessModel,
    classify,
    dispatch_expansion,
)


class Mode(str, Enum):
    NO_MI = "no_mi"
    MI_ALL = "mi_all"
    MI_CLF = "mi_clf"

    @property
    def mixed_initiative(self) -> bool:
        return self is not Mode.NO_MI


class SessionState(str, Enum):
    AWAITING_QUERY = "awaiting_query"
    AWAITING_ANSWER = "awaiting_answer"


@dataclass(frozen=True)
class TurnResult:
    """Outcome of one completed retrieval turn."""

    query_state: QueryState
    question_asked: ClarifyingQuestion | None
    label: UsefulnessLabel | None
    ranking: RankedList


@dataclass
class RetrievalParams:
    k1: float = BM25_K1
    b: float = BM25_B
    fb_docs: int = RM3_FB_DOCS
    fb_terms: int = RM3_FB_TERMS
    rm3_lambda: float = RM3_LAMBDA
    rerank: RerankConfig = field(default_factory=RerankConfig)


class Engine:
    """Shared, read-only retrieval stack used by all sessions of a run."""

    def __init__(
        self,
        index: InvertedIndex,
        corpus: dict[str, str],
        pool: QuestionPool,
        similarity: SimilarityScorer,
        usefulness_model: UsefulnessModel | None = None,
        rewriter: rewrite_mod.RewriteBackend | None = None,
        classify_backend: RemoteClassifyBackend | None = None,
        pointwise: PointwiseScorer | None = None,
        pairwise: PairwiseScorer | None = None,
        params: RetrievalParams | None = None,
        run_id: str | None = None,
    ):
        self.index = index
        self.corpus = corpus
        self.pool = pool
        self.similarity = similarity
        self.usefulness_model = usefulness_model
        self.fallback_rewriter = rewrite_mod.FallbackRewriteBackend()
        self.rewriter = rewriter or self.fallback_rewriter
        self.classify_backend = classify_backend
        self.pointwise = pointwise or TfIdfPointwiseScorer(index)
        self.pairwise = pairwise or LogisticPairwiseScorer(self.pointwise)
        self.params = params or RetrievalParams()
        self.run_id = run_id
        self.degraded_to_fallback = False

    @classmethod
    def from_passages(
        cls,
        passages: Iterable[Passage],
        pool: QuestionPool,
        similarity: SimilarityScorer,
        **kwargs,
    ) -> Engine:
        passages = list(passages)
        index = build_index(passages)
        corpus = {p.id: p.text for p in passages}
        return cls(index=index, corpus=corpus, pool=pool, similarity=similarity, **kwargs)

    def backend_ids(self) -> str:
        classifier = (
            self.classify_backend.identity
            if self.classify_backend is not None
            else "builtin-linear-usefulness"
        )
        return ",".join(
            (
                f"rewrite={self.rewriter.identity}",
                f"similarity={self.similarity.identity}",
                f"classify={classifier}",
                f"pointwise={self.pointwise.identity}",
                f"pairwise={self.pairwise.identity}",
            )
        )

    # --- backend access with documented degradation -----------------------

    def resolve(self, query: str, history: ConversationHistory) -> str:
        try:
            return rewrite_mod.resolve(self.rewriter, query, history)
        except BackendUnavailableError:
            self.degraded_to_fallback = True
            return rewrite_mod.resolve(self.fallback_rewriter, query, history)

    def expand(self, resolved: str, question: str | None, answer: str | None) -> str:
        try:
            return rewrite_mod.expand(self.rewriter, resolved, question, answer)
        except BackendUnavailableError:
            self.degraded_to_fallback = True
            return rewrite_mod.expand(self.fallback_rewriter, resolved, question, answer)

    def expander(self) -> rewrite_mod.RewriteBackend:
        return self.rewriter if not self.degraded_to_fallback else self.fallback_rewriter

    def classify_usefulness(self, resolved: str, question: str, answer: str) -> UsefulnessLabel:
        if self.classify_backend is not None:
            return self.classify_backend.classify(resolved, question, answer)
        if self.usefulness_model is None:
            raise InvalidArgumentsError("MI_CLF requires a usefulness model or classify backend")
        return classify(self.usefulness_model, resolved, question, answer)

    # --- retrieval stack ----------------------------------------------------

    def retrieve(self, expanded_query: str) -> RankedList:
        p = self.params
        weighted = WeightedQuery.from_text(expanded_query)
        weighted = rm3_expand(
            self.index, weighted, p.fb_docs, p.fb_terms, p.rm3_lambda, p.k1, p.b
        )
        first = search(self.index, weighted, p.rerank.pointwise_depth, p.k1, p.b)
        reranked = rerank_pointwise(
            expanded_query, first, self.corpus, self.pointwise, p.rerank.pointwise_depth
        )
        reranked = rerank_pairwise(
            expanded_query, reranked, self.corpus, self.pairwise, p.rerank.pairwise_depth
        )
        return _clamp_non_increasing(reranked)


def _clamp_non_increasing(ranking: RankedList) -> RankedList:
    """Clamp scores so they never increase with rank; identity when the
    cascade already produced a monotone list."""
    clamped: list[tuple[str, float]] = []
    floor = float("inf")
    for pid, score in ranking.entries:
        floor = min(floor, score)
        clamped.append((pid, floor))
    return RankedList(tuple(clamped))


_SESSION_COUNTER = itertools.count(1)


@dataclass
class Session:
    """One conversation bound to an engine; operations are serialized by
    the caller (the HTTP service holds a per-session lock)."""

    id: str
    engine: Engine
    mode: Mode
    history: ConversationHistory
    state: SessionState = SessionState.AWAITING_QUERY
    pending: tuple[QueryState, ClarifyingQuestion] | None = None

    @classmethod
    def new(cls, engine: Engine, mode: Mode, topic_id: str | None = None) -> Session:
        number = next(_SESSION_COUNTER)
        session_id = topic_id or f"s{number}"
        return cls(
            id=session_id,
            engine=engine,
            mode=mode,
            history=ConversationHistory(topic_id=session_id),
        )


def submit_query(session: Session, query: str) -> ClarifyingQuestion | TurnResult:
    """Advance the session with a user query.

    In mixed-initiative modes this selects and returns a clarifying
    question and waits for the answer; in NO_MI it retrieves immediately.
    """
    if session.state != SessionState.AWAITING_QUERY:
        raise StateError(f"session {session.id}: cannot submit a query while {session.state.value}")
    if not query.strip():
        raise InvalidArgumentsError("query must be non-empty")

    engine = session.engine
    resolved = engine.resolve(query, session.history)
    query_state = QueryState(raw=query, resolved=resolved, expanded=resolved)

    if session.mode is Mode.NO_MI:
        ranking = engine.retrieve(resolved)
        session.history = append_turn(
            session.history,
            Utterance(role=Role.USER, kind=UtteranceKind.QUERY, text=query),
            Utterance(role=Role.SYSTEM, kind=UtteranceKind.PASSAGE_LIST, passages=ranking),
        )
        return TurnResult(query_state=query_state, question_asked=None, label=None, ranking=ranking)

    question = select_question(resolved, engine.pool, engine.similarity)
    session.pending = (query_state, question)
    session.state = SessionState.AWAITING_ANSWER
    return question


def submit_answer(session: Session, answer: str) -> TurnResult:
    """Complete a mixed-initiative turn with the user's answer."""
    if session.state != SessionState.AWAITING_ANSWER or session.pending is None:
        raise StateError(f"session {session.id}: no clarifying question is pending")
    if not answer.strip():
        raise InvalidArgumentsError("answer must be non-empty")

    engine = session.engine
    query_state, question = session.pending

    if session.mode is Mode.MI_ALL:
        expanded = engine.expand(query_state.resolved, question.text, answer)
        reported_label: UsefulnessLabel | None = None
        # MI_ALL behaves like the forced both-useful case; no label is reported
        query_state = query_state.with_expansion(expanded, UsefulnessLabel.BOTH_USEFUL)
    else:  # MI_CLF
        label = engine.classify_usefulness(query_state.resolved, question.text, answer)
        expanded = dispatch_expansion(
            label, query_state.resolved, question.text, answer, engine.expander()
        )
        reported_label = label
        query_state = query_state.with_expansion(expanded, label)

    ranking = engine.retrieve(query_state.expanded)

    session.history = append_turn(
        session.history,
        Utterance(role=Role.USER, kind=UtteranceKind.QUERY, text=query_state.raw),
        Utterance(role=Role.SYSTEM, kind=UtteranceKind.CLARIFYING_QUESTION, text=question.text),
    )
    session.history = append_turn(
        session.history,
        Utterance(role=Role.USER, kind=UtteranceKind.ANSWER, text=answer),
        Utterance(role=Role.SYSTEM, kind=UtteranceKind.PASSAGE_LIST, passages=ranking),
    )
    session.state = SessionState.AWAITING_QUERY
    session.pending = None
    return TurnResult(
        query_state=query_state,
        question_asked=question,
        label=reported_label,
        ranking=ranking,
    )


# --- scripted batch runs -------------------------------------------------------
#
# Scripted topic file: one turn per line,
#   topic_id \t turn_index \t query \t answer
# with an empty answer column allowed for NO_MI runs.


@dataclass(frozen=True)
class ScriptedTurn:
    index: int
    query: str
    answer: str | None = None


@dataclass(frozen=True)
class ScriptedTopic:
    topic_id: str
    turns: tuple[ScriptedTurn, ...]


def parse_scripted_topics(stream: TextIO | Iterable[str]) -> list[ScriptedTopic]:
    topics: list[ScriptedTopic] = []
    seen: set[str] = set()
    current_id: str | None = None
    current_turns: list[ScriptedTurn] = []

    def flush() -> None:
        nonlocal current_id, current_turns
        if current_id is not None:
            topics.append(ScriptedTopic(topic_id=current_id, turns=tuple(current_turns)))
        current_id = None
        current_turns = []

    for line_no, raw_line in enumerate(stream, start=1):
        line = raw_line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(fields)}", line_no)
        topic_id, index_str, query, answer = fields
        if not topic_id:
            raise ParseError("empty topic_id", line_no)
        try:
            index = int(index_str)
        except ValueError:
            raise ParseError(f"turn index {index_str!r} is not an integer", line_no) from None
        if topic_id != current_id:
            if topic_id in seen:
                raise DuplicateIdError(f"topic id {topic_id!r} appears in two separate blocks")
            flush()
            current_id = topic_id
            seen.add(topic_id)
        expected = len(current_turns) + 1
        if index != expected:
            raise ParseError(f"topic {topic_id}: expected turn index {expected}, got {index}", line_no)
        if not query.strip():
            raise ParseError(f"topic {topic_id} turn {index}: empty query", line_no)
        current_turns.append(
            ScriptedTurn(index=index, query=query, answer=answer if answer else None)
        )
    flush()
    return topics


def serialize_scripted_topics(topics: Iterable[ScriptedTopic]) -> str:
    lines = []
    for topic in topics:
        for turn in topic.turns:
            lines.append(
                f"{topic.topic_id}\t{turn.index}\t{turn.query}\t{turn.answer or ''}"
            )
    return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class TurnMetadata:
    """Run-metadata sidecar row for one completed turn."""

    topic_id: str
    turn: int
    mode: Mode
    label: UsefulnessLabel | None
    backend_ids: str

    def to_line(self) -> str:
        label = "" if self.label is None else str(int(self.label))
        return f"{self.topic_id}\t{self.turn}\t{self.mode.value}\t{label}\t{self.backend_ids}"


def run_batch(
    engine: Engine,
    topics: Iterable[ScriptedTopic],
    mode: Mode,
    run_id: str | None = None,
) -> tuple[list[RunRecord], list[TurnMetadata]]:
    """Run every scripted topic through the pipeline in the given mode.

    Deterministic: identical inputs produce identical run rows. MI turns
    must carry scripted answers.
    """
    run_tag = run_id or engine.run_id or mode.value
    records: list[RunRecord] = []
    metadata: list[TurnMetadata] = []
    for topic in topics:
        session = Session.new(engine, mode, topic_id=topic.topic_id)
        for turn in topic.turns:
            outcome = submit_query(session, turn.query)
            if mode.mixed_initiative:
                if turn.answer is None:
                    raise InvalidArgumentsError(
                        f"topic {topic.topic_id} turn {turn.index}: scripted answer required in "
                        f"{mode.value} mode"
                    )
                result = submit_answer(session, turn.answer)
            else:
                assert isinstance(outcome, TurnResult)
                result = outcome
            turn_id = f"{topic.topic_id}_{turn.index}"
            for rank, (pid, score) in enumerate(result.ranking.entries, start=1):
                records.append(
                    RunRecord(
                        topic_turn_id=turn_id,
                        passage_id=pid,
                        rank=rank,
                        score=score,
                        run_id=run_tag,
                    )
                )
            metadata.append(
                TurnMetadata(
                    topic_id=topic.topic_id,
                    turn=turn.index,
                    mode=mode,
                    label=result.label,
                    backend_ids=engine.backend_ids(),
                )
            )
    return records, metadata
