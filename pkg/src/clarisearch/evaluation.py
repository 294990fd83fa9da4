"""Rank metrics, classifier metrics and TREC-format run/qrels handling.

Aggregation policy, pinned for determinism and mirrored by the test
oracles:

* turns present in the run but absent from the qrels are skipped and
  counted, never averaged as zero;
* turns judged but with no passage at or above the relevance threshold are
  given their degenerate per-turn value (0.0), flagged, and excluded from
  means;
* nDCG uses linear gain by default (``grade / log2(rank + 1)``);
  exponential gain is a switch.
"""

from __future__ import annotations

import math
import re
import random
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence, TextIO

from .errors import InvalidArgumentsError, ParseError, StratificationError, ValidationError

DEFAULT_REL_THRESHOLD = 1

RUN_LINE_RE = re.compile(r"^(\S+) Q0 (\S+) (\d+) (-?\d+\.\d{6}) (\S+)$")


@dataclass(frozen=True)
class Qrels:
    """Graded judgments keyed by (topic_turn_id, passage_id)."""

    judgments: Mapping[tuple[str, str], int]

    def __post_init__(self) -> None:
        for (tid, pid), grade in self.judgments.items():
            if grade < 0:
                raise ValidationError(f"negative grade for ({tid}, {pid})")

    def turns(self) -> set[str]:
        return {tid for tid, _ in self.judgments}

    def grades_for(self, topic_turn_id: str) -> dict[str, int]:
        return {
            pid: grade
            for (tid, pid), grade in self.judgments.items()
            if tid == topic_turn_id
        }

    def relevant_ids(self, topic_turn_id: str, rel_threshold: int = DEFAULT_REL_THRESHOLD) -> set[str]:
        return {
            pid for pid, grade in self.grades_for(topic_turn_id).items() if grade >= rel_threshold
        }


@dataclass(frozen=True)
class RunRecord:
    """One TREC run row."""

    topic_turn_id: str
    passage_id: str
    rank: int
    score: float
    run_id: str


@dataclass(frozen=True)
class MetricResult:
    """Per-turn values plus their mean for one metric.

    ``skipped`` lists turns without judgments; ``flagged`` lists judged
    turns with no relevant passage (excluded from the mean).
    """

    mean: float
    per_turn: Mapping[str, float]
    skipped: tuple[str, ...] = ()
    flagged: tuple[str, ...] = ()


@dataclass
class MetricReport:
    metrics: dict[str, MetricResult] = field(default_factory=dict)

    def mean(self, name: str) -> float:
        return self.metrics[normalize_metric_name(name)].mean


# --- file formats -------------------------------------------------------------


def read_qrels(stream: TextIO | Iterable[str]) -> Qrels:
    """Parse ``topic_turn_id 0 passage_id grade`` rows (whitespace tolerant)."""
    judgments: dict[tuple[str, str], int] = {}
    for line_no, raw_line in enumerate(stream, start=1):
        line = raw_line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 whitespace-separated fields, got {len(parts)}", line_no)
        tid, _, pid, grade_str = parts
        try:
            grade = int(grade_str)
        except ValueError:
            raise ParseError(f"grade {grade_str!r} is not an integer", line_no) from None
        if grade < 0:
            raise ParseError("grades must be non-negative", line_no)
        judgments[(tid, pid)] = grade
    return Qrels(judgments=judgments)


def write_qrels(qrels: Qrels) -> str:
    lines = [
        f"{tid} 0 {pid} {grade}"
        for (tid, pid), grade in sorted(qrels.judgments.items())
    ]
    return "".join(line + "\n" for line in lines)


def read_run(stream: TextIO | Iterable[str]) -> list[RunRecord]:
    """Parse a six-column TREC run; validates rank contiguity and score order."""
    records: list[RunRecord] = []
    for line_no, raw_line in enumerate(stream, start=1):
        line = raw_line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 whitespace-separated fields, got {len(parts)}", line_no)
        tid, q0, pid, rank_str, score_str, run_id = parts
        if q0 != "Q0":
            raise ParseError(f"second column must be 'Q0', got {q0!r}", line_no)
        try:
            rank = int(rank_str)
            score = float(score_str)
        except ValueError:
            raise ParseError("rank or score is not numeric", line_no) from None
        records.append(RunRecord(tid, pid, rank, score, run_id))
    validate_run(records)
    return records


def validate_run(records: Sequence[RunRecord]) -> None:
    """Check per-turn rank contiguity from 1, non-increasing scores and
    unique passage ids."""
    by_turn: dict[str, list[RunRecord]] = {}
    for record in records:
        by_turn.setdefault(record.topic_turn_id, []).append(record)
    for tid, rows in by_turn.items():
        rows = sorted(rows, key=lambda r: r.rank)
        seen: set[str] = set()
        prev_score: float | None = None
        for expected, row in enumerate(rows, start=1):
            if row.rank != expected:
                raise ValidationError(f"turn {tid}: expected rank {expected}, got {row.rank}")
            if row.passage_id in seen:
                raise ValidationError(f"turn {tid}: duplicate passage {row.passage_id!r}")
            seen.add(row.passage_id)
            if prev_score is not None and row.score > prev_score:
                raise ValidationError(f"turn {tid}: scores must be non-increasing at rank {row.rank}")
            prev_score = row.score


def write_run(records: Sequence[RunRecord]) -> str:
    """Canonical TREC text: sorted by (topic_turn_id, rank), scores with 6
    decimal places."""
    validate_run(records)
    ordered = sorted(records, key=lambda r: (r.topic_turn_id, r.rank))
    lines = [
        f"{r.topic_turn_id} Q0 {r.passage_id} {r.rank} {r.score:.6f} {r.run_id}"
        for r in ordered
    ]
    return "".join(line + "\n" for line in lines)


def run_by_turn(records: Sequence[RunRecord]) -> dict[str, list[str]]:
    """Ranked passage ids per turn."""
    by_turn: dict[str, list[RunRecord]] = {}
    for record in records:
        by_turn.setdefault(record.topic_turn_id, []).append(record)
    return {
        tid: [r.passage_id for r in sorted(rows, key=lambda r: r.rank)]
        for tid, rows in by_turn.items()
    }


# --- rank metrics -------------------------------------------------------------


def _aggregate(
    ranked_by_turn: Mapping[str, Sequence[str]],
    qrels: Qrels,
    per_turn_value,
    rel_threshold: int,
    needs_relevant: bool = True,
) -> MetricResult:
    judged_turns = qrels.turns()
    per_turn: dict[str, float] = {}
    included: list[float] = []
    skipped: list[str] = []
    flagged: list[str] = []
    for tid in sorted(ranked_by_turn):
        if tid not in judged_turns:
            skipped.append(tid)
            continue
        grades = qrels.grades_for(tid)
        relevant = {pid for pid, g in grades.items() if g >= rel_threshold}
        value = per_turn_value(list(ranked_by_turn[tid]), grades, relevant)
        per_turn[tid] = value
        if needs_relevant and not relevant:
            flagged.append(tid)
            continue
        included.append(value)
    mean = sum(included) / len(included) if included else 0.0
    return MetricResult(mean=mean, per_turn=per_turn, skipped=tuple(skipped), flagged=tuple(flagged))


def recall_at_k(
    ranked_by_turn: Mapping[str, Sequence[str]],
    qrels: Qrels,
    k: int,
    rel_threshold: int = DEFAULT_REL_THRESHOLD,
) -> MetricResult:
    if k < 1:
        raise InvalidArgumentsError("recall cutoff k must be >= 1")

    def value(ranked: list[str], grades: dict[str, int], relevant: set[str]) -> float:
        if not relevant:
            return 0.0
        return len(relevant.intersection(ranked[:k])) / len(relevant)

    return _aggregate(ranked_by_turn, qrels, value, rel_threshold)


def mean_average_precision(
    ranked_by_turn: Mapping[str, Sequence[str]],
    qrels: Qrels,
    rel_threshold: int = DEFAULT_REL_THRESHOLD,
) -> MetricResult:
    def value(ranked: list[str], grades: dict[str, int], relevant: set[str]) -> float:
        if not relevant:
            return 0.0
        hits = 0
        precision_sum = 0.0
        for rank, pid in enumerate(ranked, start=1):
            if pid in relevant:
                hits += 1
                precision_sum += hits / rank
        return precision_sum / len(relevant)

    return _aggregate(ranked_by_turn, qrels, value, rel_threshold)


def mrr(
    ranked_by_turn: Mapping[str, Sequence[str]],
    qrels: Qrels,
    rel_threshold: int = DEFAULT_REL_THRESHOLD,
) -> MetricResult:
    def value(ranked: list[str], grades: dict[str, int], relevant: set[str]) -> float:
        for rank, pid in enumerate(ranked, start=1):
            if pid in relevant:
                return 1.0 / rank
        return 0.0

    return _aggregate(ranked_by_turn, qrels, value, rel_threshold)


def dcg(grades_in_rank_order: Sequence[int], k: int | None = None, exponential: bool = False) -> float:
    usable = grades_in_rank_order if k is None else grades_in_rank_order[:k]
    total = 0.0
    for i, grade in enumerate(usable, start=1):
        gain = (2.0**grade - 1.0) if exponential else float(grade)
        total += gain / math.log2(i + 1)
    return total


def ndcg_at_k(
    ranked_by_turn: Mapping[str, Sequence[str]],
    qrels: Qrels,
    k: int | None = None,
    exponential: bool = False,
) -> MetricResult:
    def value(ranked: list[str], grades: dict[str, int], relevant: set[str]) -> float:
        gains = [grades.get(pid, 0) for pid in ranked]
        ideal = sorted(grades.values(), reverse=True)
        idcg = dcg(ideal, k, exponential)
        if idcg == 0.0:
            return 0.0
        return dcg(gains, k, exponential) / idcg

    # relevance for inclusion purposes: any positive grade contributes to IDCG
    return _aggregate(ranked_by_turn, qrels, value, rel_threshold=1)


# --- classifier metrics ---------------------------------------------------------


def macro_f1_and_accuracy(
    true_labels: Sequence[Hashable],
    predicted_labels: Sequence[Hashable],
) -> tuple[float, float]:
    """Macro-F1 over classes present in the truth, plus exact-match accuracy.

    Per-class F1 is 0 when precision + recall is 0.
    """
    if len(true_labels) != len(predicted_labels):
        raise InvalidArgumentsError("label sequences must have equal length")
    if not true_labels:
        raise InvalidArgumentsError("label sequences must be non-empty")
    classes = sorted(set(true_labels), key=repr)
    f1_values = []
    for cls in classes:
        tp = sum(1 for t, p in zip(true_labels, predicted_labels) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(true_labels, predicted_labels) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(true_labels, predicted_labels) if t == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        f1_values.append(f1)
    accuracy = sum(1 for t, p in zip(true_labels, predicted_labels) if t == p) / len(true_labels)
    return sum(f1_values) / len(f1_values), accuracy


def cohens_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement between two annotators."""
    if len(labels_a) != len(labels_b):
        raise InvalidArgumentsError("label sequences must have equal length")
    n = len(labels_a)
    if n < 1:
        raise InvalidArgumentsError("label sequences must be non-empty")
    observed = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    classes = set(labels_a) | set(labels_b)
    expected = 0.0
    for cls in classes:
        pa = sum(1 for a in labels_a if a == cls) / n
        pb = sum(1 for b in labels_b if b == cls) / n
        expected += pa * pb
    if expected == 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def stratified_kfold_split(
    labels: Sequence[Hashable], folds: int, seed: int
) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Deterministic stratified k-fold index split.

    Per-class counts across folds differ by at most one; folds partition
    the index set. Raises when some class has fewer examples than folds.
    """
    if folds < 2:
        raise InvalidArgumentsError("folds must be >= 2")
    by_class: dict[Hashable, list[int]] = {}
    for idx, label in enumerate(labels):
        by_class.setdefault(label, []).append(idx)
    for cls, indices in sorted(by_class.items(), key=lambda kv: repr(kv[0])):
        if len(indices) < folds:
            raise StratificationError(
                f"class {cls!r} has {len(indices)} examples, fewer than {folds} folds"
            )
    rng = random.Random(seed)
    fold_members: list[list[int]] = [[] for _ in range(folds)]
    for cls, indices in sorted(by_class.items(), key=lambda kv: repr(kv[0])):
        shuffled = indices[:]
        rng.shuffle(shuffled)
        for position, idx in enumerate(shuffled):
            fold_members[position % folds].append(idx)
    all_indices = set(range(len(labels)))
    splits: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    for members in fold_members:
        test = tuple(sorted(members))
        train = tuple(sorted(all_indices.difference(members)))
        splits.append((train, test))
    return splits


# --- metric-name driven evaluation ----------------------------------------------

_METRIC_NAME_RE = re.compile(r"^(r|ndcg)@(\d+)$")


def normalize_metric_name(name: str) -> str:
    return name.strip().lower().replace("recall@", "r@")


def evaluate_run(
    records: Sequence[RunRecord],
    qrels: Qrels,
    metric_names: Sequence[str],
    rel_threshold: int = DEFAULT_REL_THRESHOLD,
    exponential_gain: bool = False,
) -> MetricReport:
    """Compute the requested metrics over a run; unknown names raise."""
    ranked = run_by_turn(records)
    report = MetricReport()
    for raw_name in metric_names:
        name = normalize_metric_name(raw_name)
        if name == "map":
            result = mean_average_precision(ranked, qrels, rel_threshold)
        elif name == "mrr":
            result = mrr(ranked, qrels, rel_threshold)
        elif name == "ndcg":
            result = ndcg_at_k(ranked, qrels, None, exponential_gain)
        else:
            match = _METRIC_NAME_RE.match(name)
            if not match:
                raise InvalidArgumentsError(f"unknown metric {raw_name!r}")
            cutoff = int(match.group(2))
            if match.group(1) == "r":
                result = recall_at_k(ranked, qrels, cutoff, rel_threshold)
            else:
                result = ndcg_at_k(ranked, qrels, cutoff, exponential_gain)
        report.metrics[name] = result
    return report
