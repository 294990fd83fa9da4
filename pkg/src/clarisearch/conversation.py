"""Dialogue data model: turns, utterance kinds, query states.

Histories are immutable values shared by the rewriter, the pipeline and
batch evaluation; every mutation returns a new value. Text is stored
verbatim at this layer — tokenization and normalization happen in
retrieval.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, TextIO

from .errors import DuplicateIdError, InvalidUtteranceError, ParseError, ValidationError

if TYPE_CHECKING:
    from .retrieval import RankedList
    from .usefulness import UsefulnessLabel


class Role(str, Enum):
    USER = "user"
    SYSTEM = "system"


class UtteranceKind(str, Enum):
    QUERY = "query"
    ANSWER = "answer"
    CLARIFYING_QUESTION = "clarifying_question"
    PASSAGE_LIST = "passage_list"


_USER_KINDS = {UtteranceKind.QUERY, UtteranceKind.ANSWER}
_SYSTEM_KINDS = {UtteranceKind.CLARIFYING_QUESTION, UtteranceKind.PASSAGE_LIST}


@dataclass(frozen=True)
class Utterance:
    """A single user or system contribution to the dialogue.

    ``passages`` may only be set for ``PASSAGE_LIST`` utterances; text may
    be empty only for ``PASSAGE_LIST``.
    """

    role: Role
    kind: UtteranceKind
    text: str = ""
    passages: RankedList | None = None

    def __post_init__(self) -> None:
        if self.role == Role.USER and self.kind not in _USER_KINDS:
            raise InvalidUtteranceError(f"user utterance cannot have kind {self.kind.value}")
        if self.role == Role.SYSTEM and self.kind not in _SYSTEM_KINDS:
            raise InvalidUtteranceError(f"system utterance cannot have kind {self.kind.value}")
        if self.kind != UtteranceKind.PASSAGE_LIST and not self.text.strip():
            raise InvalidUtteranceError(f"{self.kind.value} utterance must carry non-empty text")
        if self.passages is not None and self.kind != UtteranceKind.PASSAGE_LIST:
            raise InvalidUtteranceError("only passage_list utterances may carry passages")


@dataclass(frozen=True)
class Turn:
    """One (user, system) exchange; ``index`` is 1-based within a history."""

    index: int
    user: Utterance
    system: Utterance

    def __post_init__(self) -> None:
        if self.index < 1:
            raise InvalidUtteranceError("turn index must be positive")
        if self.user.role != Role.USER:
            raise InvalidUtteranceError("turn.user must have role=user")
        if self.system.role != Role.SYSTEM:
            raise InvalidUtteranceError("turn.system must have role=system")


@dataclass(frozen=True)
class ConversationHistory:
    """An ordered dialogue history with contiguous 1..n turn indices.

    The turn sequence must alternate consistently: a query may only follow
    a passage list (or open the conversation), an answer may only follow a
    clarifying question.
    """

    topic_id: str
    turns: tuple[Turn, ...] = ()

    def __post_init__(self) -> None:
        prev_system: Utterance | None = None
        for pos, turn in enumerate(self.turns, start=1):
            if turn.index != pos:
                raise ValidationError(
                    f"topic {self.topic_id}: turn indices must be contiguous from 1, "
                    f"got {turn.index} at position {pos}"
                )
            if turn.user.kind == UtteranceKind.QUERY:
                if prev_system is not None and prev_system.kind != UtteranceKind.PASSAGE_LIST:
                    raise ValidationError(
                        f"topic {self.topic_id}: query at turn {pos} must follow a passage list"
                    )
            else:  # answer
                if prev_system is None or prev_system.kind != UtteranceKind.CLARIFYING_QUESTION:
                    raise ValidationError(
                        f"topic {self.topic_id}: answer at turn {pos} must follow a clarifying question"
                    )
            prev_system = turn.system

    def __len__(self) -> int:
        return len(self.turns)

    def last_user_query(self) -> str | None:
        """Text of the most recent user utterance of kind=query, if any."""
        for turn in reversed(self.turns):
            if turn.user.kind == UtteranceKind.QUERY:
                return turn.user.text
        return None


@dataclass(frozen=True)
class QueryState:
    """The query in its three forms: raw, history-resolved, expanded."""

    raw: str
    resolved: str
    expanded: str
    label: UsefulnessLabel | None = None

    def __post_init__(self) -> None:
        if self.raw.strip() and not self.resolved.strip():
            raise ValidationError("resolved query must be non-empty when raw is non-empty")
        if (self.label is None or int(self.label) == 0) and self.expanded != self.resolved:
            raise ValidationError("expanded must equal resolved when no usefulness label applies")

    def with_expansion(self, expanded: str, label: UsefulnessLabel) -> QueryState:
        return replace(self, expanded=expanded, label=label)


def append_turn(history: ConversationHistory, user: Utterance, system: Utterance) -> ConversationHistory:
    """Return a new history extended by one turn; the input is not mutated."""
    if user.role != Role.USER:
        raise InvalidUtteranceError("append_turn: first utterance must have role=user")
    if system.role != Role.SYSTEM:
        raise InvalidUtteranceError("append_turn: second utterance must have role=system")
    next_index = len(history.turns) + 1
    return ConversationHistory(
        topic_id=history.topic_id,
        turns=history.turns + (Turn(index=next_index, user=user, system=system),),
    )


# --- topic file format -------------------------------------------------------
#
# One turn per line:
#   topic_id \t turn_index \t user_kind \t user_text \t system_kind \t system_text
# UTF-8, LF line endings. Lines of one topic are contiguous and in turn order.

_FIELD_COUNT = 6


def parse_topics(stream: TextIO | Iterable[str]) -> list[ConversationHistory]:
    """Parse a topic file into one ConversationHistory per topic."""
    histories: list[ConversationHistory] = []
    seen_ids: set[str] = set()
    current_id: str | None = None
    current_turns: list[Turn] = []

    def flush() -> None:
        nonlocal current_id, current_turns
        if current_id is not None:
            histories.append(ConversationHistory(topic_id=current_id, turns=tuple(current_turns)))
        current_id = None
        current_turns = []

    for line_no, raw_line in enumerate(stream, start=1):
        line = raw_line.rstrip("\n").rstrip("\r")
        if not line:
            raise ParseError("blank line in topic file", line_no)
        fields = line.split("\t")
        if len(fields) != _FIELD_COUNT:
            raise ParseError(f"expected {_FIELD_COUNT} tab-separated fields, got {len(fields)}", line_no)
        topic_id, index_str, user_kind, user_text, system_kind, system_text = fields
        if not topic_id:
            raise ParseError("empty topic_id", line_no)
        try:
            index = int(index_str)
        except ValueError:
            raise ParseError(f"turn index {index_str!r} is not an integer", line_no) from None

        if topic_id != current_id:
            if topic_id in seen_ids:
                raise DuplicateIdError(f"topic id {topic_id!r} appears in two separate blocks")
            flush()
            current_id = topic_id
            seen_ids.add(topic_id)

        expected = len(current_turns) + 1
        if index != expected:
            raise ParseError(f"topic {topic_id}: expected turn index {expected}, got {index}", line_no)
        try:
            user = Utterance(role=Role.USER, kind=UtteranceKind(user_kind), text=user_text)
            system = Utterance(role=Role.SYSTEM, kind=UtteranceKind(system_kind), text=system_text)
        except (ValueError, InvalidUtteranceError) as exc:
            raise ParseError(str(exc), line_no) from None
        current_turns.append(Turn(index=index, user=user, system=system))

    flush()
    return histories


def serialize_topics(histories: Iterable[ConversationHistory]) -> str:
    """Canonical topic-file text; inverse of :func:`parse_topics`."""
    lines: list[str] = []
    for history in histories:
        for turn in history.turns:
            for text in (turn.user.text, turn.system.text):
                if "\t" in text or "\n" in text or "\r" in text:
                    raise ValidationError("topic-file text fields cannot contain tabs or newlines")
            lines.append(
                "\t".join(
                    (
                        history.topic_id,
                        str(turn.index),
                        turn.user.kind.value,
                        turn.user.text,
                        turn.system.kind.value,
                        turn.system.text,
                    )
                )
            )
    return "".join(line + "\n" for line in lines)
