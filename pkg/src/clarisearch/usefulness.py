"""Four-class usefulness classification and expansion dispatch.

Given the resolved query, the clarifying question asked and the user's
answer, a classifier decides which of four actions to take:

* 0 — neither useful: leave the query untouched;
* 1 — question useful: expand with the question;
* 2 — answer useful: expand with the answer;
* 3 — both useful: expand with question and answer.

The built-in classifier is a multinomial softmax regression over a small
set of lexical features (answer polarity, length, novel content, overlap
between question and query) trained with deterministic full-batch gradient
descent. A remote classify backend speaking the shared wire protocol can
replace it per run configuration.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum, IntEnum
from importlib import resources
from typing import Any, Iterable, Sequence, TextIO

import numpy as np
import requests

from . import rewrite
from .errors import (
    BackendUnavailableError,
    ContractError,
    InvalidArgumentsError,
    ParseError,
)
from .evaluation import MetricReport, MetricResult, macro_f1_and_accuracy, stratified_kfold_split
from .retrieval import tokenize
from .wordlists import AFFIRMATIONS, NEGATIONS, STOPWORDS


class UsefulnessLabel(IntEnum):
    NONE_USEFUL = 0
    QUESTION_USEFUL = 1
    ANSWER_USEFUL = 2
    BOTH_USEFUL = 3

    @property
    def display_name(self) -> str:
        return {0: "none", 1: "question", 2: "answer", 3: "both"}[int(self)]


class Polarity(str, Enum):
    AFFIRMATIVE = "affirmative"
    NEGATIVE = "negative"
    OTHER = "other"


@dataclass(frozen=True)
class AnnotatedExample:
    """One (query, question, answer, label) training row."""

    query: str
    question: str
    answer: str
    label: UsefulnessLabel

    def __post_init__(self) -> None:
        if not (self.query.strip() and self.question.strip() and self.answer.strip()):
            raise InvalidArgumentsError("annotated example texts must be non-empty")


@dataclass(frozen=True)
class FeatureVector:
    answer_polarity: Polarity
    answer_token_count: int
    answer_novel_content_tokens: int
    question_query_overlap: float
    starts_affirmative_then_content: bool
    starts_negative_then_content: bool

    def __post_init__(self) -> None:
        if self.answer_token_count < 0 or self.answer_novel_content_tokens < 0:
            raise InvalidArgumentsError("feature counts must be non-negative")
        if not 0.0 <= self.question_query_overlap <= 1.0:
            raise InvalidArgumentsError("overlap must lie in [0, 1]")


def detect_polarity(answer: str) -> Polarity:
    """Polarity of the first non-stopword token of the answer."""
    for token in tokenize(answer):
        if token in STOPWORDS:
            continue
        if token in AFFIRMATIONS:
            return Polarity.AFFIRMATIVE
        if token in NEGATIONS:
            return Polarity.NEGATIVE
        return Polarity.OTHER
    return Polarity.OTHER


def _content_tokens(answer_tokens: Iterable[str]) -> set[str]:
    # polarity markers are carriers, not content
    return {
        t for t in answer_tokens
        if t not in STOPWORDS and t not in AFFIRMATIONS and t not in NEGATIONS
    }


def extract_features(query: str, question: str, answer: str) -> FeatureVector:
    """Lexical features of one (query, question, answer) triple."""
    if not (query.strip() and question.strip() and answer.strip()):
        raise InvalidArgumentsError("query, question and answer must be non-empty")
    query_tokens = set(tokenize(query))
    question_tokens = tokenize(question)
    answer_tokens = tokenize(answer)

    question_set = set(question_tokens)
    overlap = (len(question_set & query_tokens) / len(question_set)) if question_set else 0.0

    novel = _content_tokens(answer_tokens) - query_tokens - question_set
    polarity = detect_polarity(answer)
    has_novel = len(novel) > 0
    return FeatureVector(
        answer_polarity=polarity,
        answer_token_count=len(answer_tokens),
        answer_novel_content_tokens=len(novel),
        question_query_overlap=overlap,
        starts_affirmative_then_content=polarity == Polarity.AFFIRMATIVE and has_novel,
        starts_negative_then_content=polarity == Polarity.NEGATIVE and has_novel,
    )


_FEATURE_NAMES = (
    "bias",
    "is_affirmative",
    "is_negative",
    "is_other",
    "has_novel_content",
    "affirmative_and_novel",
    "negative_and_novel",
    "log_token_count",
    "log_novel_count",
    "question_query_overlap",
)


def _encode(fv: FeatureVector) -> np.ndarray:
    has_novel = 1.0 if fv.answer_novel_content_tokens > 0 else 0.0
    is_affirm = 1.0 if fv.answer_polarity == Polarity.AFFIRMATIVE else 0.0
    is_neg = 1.0 if fv.answer_polarity == Polarity.NEGATIVE else 0.0
    return np.array(
        [
            1.0,
            is_affirm,
            is_neg,
            1.0 if fv.answer_polarity == Polarity.OTHER else 0.0,
            has_novel,
            is_affirm * has_novel,
            is_neg * has_novel,
            np.log1p(fv.answer_token_count),
            np.log1p(fv.answer_novel_content_tokens),
            fv.question_query_overlap,
        ],
        dtype=np.float64,
    )


class UsefulnessModel:
    """Multinomial softmax regression over :class:`FeatureVector`.

    Predictions are the argmax of class scores with ties broken towards the
    lower label; training is deterministic (zero-initialized weights,
    fixed-step full-batch gradient descent).
    """

    N_CLASSES = 4

    def __init__(self, weights: np.ndarray | None = None, fold_metrics: dict[str, Any] | None = None):
        self.weights = weights
        self.fold_metrics = fold_metrics or {}

    @property
    def trained(self) -> bool:
        return self.weights is not None

    def fit(self, features: Sequence[FeatureVector], labels: Sequence[UsefulnessLabel],
            iterations: int = 400, learning_rate: float = 0.5, l2: float = 1e-3) -> None:
        x = np.stack([_encode(f) for f in features])
        y = np.zeros((len(labels), self.N_CLASSES))
        for row, label in enumerate(labels):
            y[row, int(label)] = 1.0
        w = np.zeros((self.N_CLASSES, x.shape[1]))
        n = x.shape[0]
        for _ in range(iterations):
            logits = x @ w.T
            logits -= logits.max(axis=1, keepdims=True)
            exp = np.exp(logits)
            probs = exp / exp.sum(axis=1, keepdims=True)
            grad = (probs - y).T @ x / n + l2 * w
            w -= learning_rate * grad
        self.weights = w

    def predict(self, fv: FeatureVector) -> UsefulnessLabel:
        if not self.trained:
            raise ContractError("model is not trained")
        scores = self.weights @ _encode(fv)
        return UsefulnessLabel(int(np.argmax(scores)))

    def to_json(self) -> str:
        if not self.trained:
            raise ContractError("model is not trained")
        return json.dumps(
            {
                "format": "clarisearch-usefulness-model",
                "version": 1,
                "feature_names": list(_FEATURE_NAMES),
                "weights": self.weights.tolist(),
                "fold_metrics": self.fold_metrics,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> UsefulnessModel:
        data = json.loads(text)
        if data.get("format") != "clarisearch-usefulness-model":
            raise ParseError("not a usefulness model file")
        weights = np.array(data["weights"], dtype=np.float64)
        if weights.shape != (cls.N_CLASSES, len(_FEATURE_NAMES)):
            raise ParseError(f"unexpected weight shape {weights.shape}")
        return cls(weights=weights, fold_metrics=data.get("fold_metrics", {}))


def train(
    examples: Sequence[AnnotatedExample],
    folds: int = 5,
    seed: int = 13,
) -> tuple[UsefulnessModel, MetricReport]:
    """Stratified k-fold cross-validation, then a final fit on all examples.

    The report carries per-fold and mean macro-F1 and accuracy; everything
    is deterministic given the seed.
    """
    if not examples:
        raise InvalidArgumentsError("no training examples")
    features = [extract_features(e.query, e.question, e.answer) for e in examples]
    labels = [e.label for e in examples]
    splits = stratified_kfold_split([int(l) for l in labels], folds, seed)

    f1_per_fold: dict[str, float] = {}
    acc_per_fold: dict[str, float] = {}
    for fold_no, (train_idx, test_idx) in enumerate(splits, start=1):
        fold_model = UsefulnessModel()
        fold_model.fit([features[i] for i in train_idx], [labels[i] for i in train_idx])
        predicted = [fold_model.predict(features[i]) for i in test_idx]
        truth = [labels[i] for i in test_idx]
        f1, acc = macro_f1_and_accuracy([int(t) for t in truth], [int(p) for p in predicted])
        key = f"fold_{fold_no}"
        f1_per_fold[key] = f1
        acc_per_fold[key] = acc

    report = MetricReport(
        metrics={
            "macro_f1": MetricResult(
                mean=sum(f1_per_fold.values()) / folds, per_turn=f1_per_fold
            ),
            "accuracy": MetricResult(
                mean=sum(acc_per_fold.values()) / folds, per_turn=acc_per_fold
            ),
        }
    )
    model = UsefulnessModel(fold_metrics={
        "folds": folds,
        "seed": seed,
        "macro_f1": f1_per_fold,
        "accuracy": acc_per_fold,
    })
    model.fit(features, labels)
    return model, report


def classify(model: UsefulnessModel, query: str, question: str, answer: str) -> UsefulnessLabel:
    """Predict which parts of the clarifying exchange are useful."""
    if not model.trained:
        raise ContractError("classify requires a trained model")
    return model.predict(extract_features(query, question, answer))


class RemoteClassifyBackend:
    """Client for a classify service speaking the shared wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 10.0, identity: str | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.identity = identity or f"remote-classify:{endpoint}"

    def classify(self, query: str, question: str, answer: str) -> UsefulnessLabel:
        try:
            response = requests.post(
                self.endpoint,
                json={"op": "classify", "query": query, "question": question, "answer": answer},
                timeout=self.timeout,
            )
            response.raise_for_status()
            label = response.json()["label"]
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise BackendUnavailableError(f"classify backend {self.endpoint}: {exc}") from exc
        if label not in (0, 1, 2, 3):
            raise BackendUnavailableError(f"classify backend returned invalid label {label!r}")
        return UsefulnessLabel(label)


def dispatch_expansion(
    label: UsefulnessLabel,
    resolved: str,
    question: str,
    answer: str,
    expander: rewrite.RewriteBackend,
) -> str:
    """Apply the four-case expansion rule for the given usefulness label."""
    if not resolved.strip():
        raise InvalidArgumentsError("dispatch_expansion: resolved query must be non-empty")
    label = UsefulnessLabel(label)
    if label == UsefulnessLabel.NONE_USEFUL:
        return resolved
    if label == UsefulnessLabel.QUESTION_USEFUL:
        return rewrite.expand(expander, resolved, question=question)
    if label == UsefulnessLabel.ANSWER_USEFUL:
        return rewrite.expand(expander, resolved, answer=answer)
    return rewrite.expand(expander, resolved, question=question, answer=answer)


# --- annotation files -----------------------------------------------------------


def load_annotations(stream: TextIO | Iterable[str]) -> list[AnnotatedExample]:
    """Read a ``label \\t query \\t question \\t answer`` annotation file."""
    examples: list[AnnotatedExample] = []
    for line_no, raw_line in enumerate(stream, start=1):
        line = raw_line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", line_no)
        label_str, query, question, answer = parts
        if label_str not in {"0", "1", "2", "3"}:
            raise ParseError(f"label must be one of 0..3, got {label_str!r}", line_no)
        examples.append(
            AnnotatedExample(
                query=query,
                question=question,
                answer=answer,
                label=UsefulnessLabel(int(label_str)),
            )
        )
    return examples


def serialize_annotations(examples: Iterable[AnnotatedExample]) -> str:
    lines = [
        f"{int(e.label)}\t{e.query}\t{e.question}\t{e.answer}"
        for e in examples
    ]
    return "".join(line + "\n" for line in lines)


def load_bundled_annotations() -> list[AnnotatedExample]:
    """The 150-example synthetic training set shipped with the package."""
    text = resources.files("clarisearch").joinpath("data/annotations.tsv").read_text("utf-8")
    return load_annotations(text.splitlines())


# --- synthetic annotation generator ----------------------------------------------

# label prevalence percentages as published for the annotation scheme
PREVALENCE_PERCENT = {
    UsefulnessLabel.NONE_USEFUL: 32,
    UsefulnessLabel.ANSWER_USEFUL: 53,
    UsefulnessLabel.QUESTION_USEFUL: 11,
    UsefulnessLabel.BOTH_USEFUL: 6,
}

_TOPICS: tuple[tuple[str, str, str], ...] = (
    # (subject, question facet, answer detail)
    ("hobby stores", "hours of operation", "model train kits"),
    ("computer programming", "a coding bootcamp", "career options programmers"),
    ("map of usa", "us territories", "printable state borders"),
    ("declaration of independence", "its signers", "who wrote drafts"),
    ("solar panels", "installation costs", "battery storage sizing"),
    ("garden composting", "worm bins", "kitchen scraps ratio"),
    ("tropical fish", "aquarium cleaning", "freshwater breeding guides"),
    ("electric cars", "charging stations", "winter range tests"),
    ("ancient rome", "gladiator games", "aqueduct engineering"),
    ("sourdough bread", "starter feeding", "hydration percentages"),
    ("trail running", "local races", "ankle strengthening drills"),
    ("jazz piano", "chord voicings", "improvisation practice routines"),
    ("beekeeping", "hive inspections", "queen rearing calendar"),
    ("photography basics", "camera settings", "portrait lighting setups"),
    ("spanish lessons", "grammar drills", "conversation partner exchanges"),
    ("mountain weather", "avalanche risk", "windchill forecasting models"),
    ("home insulation", "attic foam", "window sealing tape"),
    ("marathon training", "weekly mileage", "taper nutrition plans"),
    ("bird watching", "migration seasons", "binocular magnification advice"),
    ("chess openings", "sicilian defense", "endgame study collections"),
    ("coffee roasting", "bean origins", "grinder burr comparisons"),
    ("kayak camping", "river permits", "dry bag packing lists"),
    ("fossil hunting", "local quarries", "trilobite identification charts"),
    ("watercolor painting", "paper weights", "pigment mixing wheels"),
    ("urban gardening", "balcony planters", "drip irrigation timers"),
    ("night sky", "telescope types", "nebula photography filters"),
    ("rock climbing", "indoor gyms", "finger tendon recovery"),
    ("woodworking joints", "dovetail jigs", "mortise chisel sizes"),
    ("cheese making", "rennet sources", "cave aging humidity"),
    ("vintage radios", "tube testers", "capacitor replacement kits"),
)

_QUERY_TEMPLATES = (
    "tell me about {subject}",
    "i want information on {subject}",
    "find {subject}",
    "i am looking for {subject}",
    "what is there to know about {subject}",
)

_QUESTION_TEMPLATES = (
    "do you want to know about {facet}?",
    "are you interested in {facet}?",
    "would you like details on {facet}?",
    "do you mean {facet}?",
)

# answers with no content tokens beyond polarity markers and stopwords
_BARE_NEGATIVE = ("No.", "no", "nope", "nah", "no not that", "no i do not")
_BARE_AFFIRMATIVE = ("Yes.", "yes", "yeah", "yep", "sure", "exactly", "yes exactly")

_ANSWER_NEGATIVE_CONTENT = (
    "no i need {detail}",
    "no i am asking about {detail}",
    "not really i care more about {detail}",
    "no show me {detail} instead",
)
_ANSWER_OTHER_CONTENT = (
    "mostly i am curious about {detail}",
    "actually {detail} is what i am after",
)
_ANSWER_AFFIRMATIVE_CONTENT = (
    "yes and also {detail}",
    "yes especially {detail}",
    "yes plus anything on {detail}",
)


def rule_label(query: str, question: str, answer: str) -> UsefulnessLabel:
    """The polarity-by-novel-content labeling rule the synthetic set encodes."""
    fv = extract_features(query, question, answer)
    has_novel = fv.answer_novel_content_tokens > 0
    if fv.answer_polarity == Polarity.AFFIRMATIVE:
        return UsefulnessLabel.BOTH_USEFUL if has_novel else UsefulnessLabel.QUESTION_USEFUL
    return UsefulnessLabel.ANSWER_USEFUL if has_novel else UsefulnessLabel.NONE_USEFUL


def _largest_remainder_counts(total: int) -> dict[UsefulnessLabel, int]:
    weight_sum = sum(PREVALENCE_PERCENT.values())
    raw = {lab: total * pct / weight_sum for lab, pct in PREVALENCE_PERCENT.items()}
    counts = {lab: int(v) for lab, v in raw.items()}
    shortfall = total - sum(counts.values())
    for lab, _ in sorted(raw.items(), key=lambda kv: -(kv[1] - int(kv[1])))[:shortfall]:
        counts[lab] += 1
    return counts


def synthesize_annotations(n: int = 150, seed: int = 7) -> list[AnnotatedExample]:
    """Generate a labeled set following the published prevalence (32/53/11/6).

    Every example's label agrees with :func:`rule_label`, so the set is
    linearly separable under the built-in feature encoding.
    """
    rng = random.Random(seed)
    counts = _largest_remainder_counts(n)
    examples: list[AnnotatedExample] = []
    for label, count in counts.items():
        for _ in range(count):
            subject, facet, detail = rng.choice(_TOPICS)
            query = rng.choice(_QUERY_TEMPLATES).format(subject=subject)
            question = rng.choice(_QUESTION_TEMPLATES).format(facet=facet)
            if label == UsefulnessLabel.NONE_USEFUL:
                answer = rng.choice(_BARE_NEGATIVE)
            elif label == UsefulnessLabel.QUESTION_USEFUL:
                answer = rng.choice(_BARE_AFFIRMATIVE)
            elif label == UsefulnessLabel.ANSWER_USEFUL:
                template = rng.choice(_ANSWER_NEGATIVE_CONTENT + _ANSWER_OTHER_CONTENT)
                answer = template.format(detail=detail)
            else:
                answer = rng.choice(_ANSWER_AFFIRMATIVE_CONTENT).format(detail=detail)
            example = AnnotatedExample(query=query, question=question, answer=answer, label=label)
            generated = rule_label(query, question, answer)
            if generated != label:
                raise AssertionError(
                    f"template drift: {query!r}/{question!r}/{answer!r} labels as {generated}"
                )
            examples.append(example)
    rng.shuffle(examples)
    return examples
