"""Fixed word lists used across the engine.

The stopword list is deliberately small (30 entries) and skewed towards
conversational filler ("tell me about ...", "i want to ...") because it is
used to pick salient terms during query rewriting and to keep noise words
out of RM3 expansion. Indexing keeps stopwords; only expansion and
rewriting filter on them.
"""

# 30 entries, frozen. Changing this list changes rewriter and RM3 outputs.
STOPWORDS: frozenset[str] = frozenset({
    "a", "an", "and", "are", "about", "at", "be", "by", "do", "for",
    "from", "have", "i", "in", "is", "it", "me", "of", "on", "or",
    "tell", "that", "the", "this", "to", "want", "was", "with", "would",
    "you",
})

# First content token of an answer decides polarity.
AFFIRMATIONS: frozenset[str] = frozenset({
    "yes", "yeah", "yep", "sure", "correct", "right", "exactly",
})

NEGATIONS: frozenset[str] = frozenset({
    "no", "nope", "not", "nah",
})

# Generic template questions dropped when filtering a clarifying-question
# pool. Matched case-insensitively on whitespace-normalized text.
GENERIC_QUESTION_BLOCKLIST: tuple[str, ...] = (
    "can you be more specific?",
    "what do you mean?",
    "could you clarify that?",
    "do you need anything else?",
    "would you like more information?",
    "can you tell me more?",
    "is there anything else?",
    "what else would you like to know?",
)


def normalize_question_text(text: str) -> str:
    """Whitespace-collapsed, lowercased form used for blocklist matching."""
    return " ".join(text.split()).lower()
