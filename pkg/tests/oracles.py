"""Independent brute-force oracles used by the unit and acceptance tests.

Everything here is computed directly from the stated formulas on plain
data structures (no inverted index, no package ranking helpers) so that
the engine's optimized paths are checked against a second, separately
written implementation.
"""

from __future__ import annotations

import math
import re

from clarisearch.wordlists import STOPWORDS


def toks(text: str) -> list[str]:
    # Independent tokenizer: lowercase, alphanumeric runs.
    return re.findall(r"[^\W_]+", text.lower())


def bm25_scores_direct(
    docs: list[tuple[str, str]],
    weights: dict[str, float],
    k1: float = 0.95,
    b: float = 0.45,
) -> dict[str, float]:
    """Score every passage by evaluating the BM25 formula term by term."""
    tokenized = {pid: toks(text) for pid, text in docs}
    n = len(docs)
    lengths = {pid: len(t) for pid, t in tokenized.items()}
    avg = sum(lengths.values()) / n if n else 0.0
    scores: dict[str, float] = {}
    for pid, tokens in tokenized.items():
        total = 0.0
        for term, weight in weights.items():
            if weight <= 0:
                continue
            tf = tokens.count(term)
            if tf == 0:
                continue
            df = sum(1 for other in tokenized.values() if term in other)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            norm = k1 * (1.0 - b + b * (lengths[pid] / avg if avg else 0.0))
            total += weight * idf * tf * (k1 + 1.0) / (tf + norm)
        scores[pid] = total
    return scores


def search_direct(
    docs: list[tuple[str, str]],
    weights: dict[str, float],
    k: int,
    k1: float = 0.95,
    b: float = 0.45,
) -> list[tuple[str, float]]:
    scores = bm25_scores_direct(docs, weights, k1, b)
    positive = [(pid, s) for pid, s in scores.items() if s > 0.0]
    positive.sort(key=lambda kv: (-kv[1], kv[0]))
    return positive[:k] if k > 0 else []


def rm3_direct(
    docs: list[tuple[str, str]],
    weights: dict[str, float],
    fb_docs: int = 10,
    fb_terms: int = 10,
    lam: float = 0.5,
    k1: float = 0.95,
    b: float = 0.45,
) -> dict[str, float]:
    """RM3 computed step by step from the stated mixture definition."""
    total_w = sum(w for w in weights.values() if w > 0)
    p_q = {t: w / total_w for t, w in weights.items() if w > 0} if total_w > 0 else {}

    feedback = search_direct(docs, weights, fb_docs, k1, b)
    if not feedback:
        return p_q
    score_sum = sum(s for _, s in feedback)
    tokenized = {pid: toks(text) for pid, text in docs}

    p_rm: dict[str, float] = {}
    for pid, score in feedback:
        tokens = tokenized[pid]
        length = len(tokens)
        for term in set(tokens):
            if term in STOPWORDS:
                continue
            p_rm[term] = p_rm.get(term, 0.0) + (score / score_sum) * tokens.count(term) / length
    retained = dict(sorted(p_rm.items(), key=lambda kv: (-kv[1], kv[0]))[:fb_terms])

    combined: dict[str, float] = {}
    for term in set(p_q) | set(retained):
        value = lam * p_q.get(term, 0.0) + (1.0 - lam) * retained.get(term, 0.0)
        if value > 0.0:
            combined[term] = value
    total = sum(combined.values())
    if total <= 0:
        return p_q
    return {t: v / total for t, v in combined.items()}


# --- rank metric oracles ---------------------------------------------------------
#
# Aggregation rules (mirroring the engine's pinned policy): turns without
# judgments are skipped; judged turns with no relevant passage are excluded
# from means.


def recall_direct(ranked: list[str], grades: dict[str, int], k: int, threshold: int = 1) -> float:
    relevant = {pid for pid, g in grades.items() if g >= threshold}
    if not relevant:
        return 0.0
    return sum(1 for pid in ranked[:k] if pid in relevant) / len(relevant)


def average_precision_direct(ranked: list[str], grades: dict[str, int], threshold: int = 1) -> float:
    relevant = {pid for pid, g in grades.items() if g >= threshold}
    if not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for i, pid in enumerate(ranked, start=1):
        if pid in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def reciprocal_rank_direct(ranked: list[str], grades: dict[str, int], threshold: int = 1) -> float:
    relevant = {pid for pid, g in grades.items() if g >= threshold}
    for i, pid in enumerate(ranked, start=1):
        if pid in relevant:
            return 1.0 / i
    return 0.0


def ndcg_direct(ranked: list[str], grades: dict[str, int], k: int | None = None) -> float:
    def dcg_of(gains: list[int]) -> float:
        cut = gains if k is None else gains[:k]
        return sum(g / math.log2(i + 1) for i, g in enumerate(cut, start=1))

    actual = dcg_of([grades.get(pid, 0) for pid in ranked])
    ideal = dcg_of(sorted(grades.values(), reverse=True))
    if ideal == 0.0:
        return 0.0
    return actual / ideal


def mean_over_turns(
    per_turn_fn,
    run: dict[str, list[str]],
    qrels: dict[str, dict[str, int]],
    threshold: int = 1,
) -> float:
    values = []
    for tid, ranked in run.items():
        if tid not in qrels:
            continue
        grades = qrels[tid]
        if not any(g >= threshold for g in grades.values()):
            continue
        values.append(per_turn_fn(ranked, grades))
    return sum(values) / len(values) if values else 0.0


def pairwise_aggregate_direct(prob_matrix: list[list[float]]) -> list[float]:
    """Sum of win probabilities per row, ascending-j summation order."""
    n = len(prob_matrix)
    sums = []
    for i in range(n):
        total = 0.0
        for j in range(n):
            if i != j:
                total += prob_matrix[i][j]
        sums.append(total)
    return sums
