import io
import math

import pytest

from clarisearch.clarification import (
    ClarifyingQuestion,
    QuestionPool,
    RemoteEmbedScorer,
    TfIdfScorer,
    filter_pool,
    load_pool,
    select_question,
)
from clarisearch.errors import (
    BackendUnavailableError,
    ContractError,
    DuplicateIdError,
    EmptyPoolError,
    ParseError,
)


def pool_of(*texts: str, filtered: bool = False) -> QuestionPool:
    questions = tuple(ClarifyingQuestion(id=f"q{i}", text=t) for i, t in enumerate(texts, 1))
    return QuestionPool(questions=questions, filtered=filtered)


class TestLoadPool:
    def test_three_lines(self):
        stream = io.StringIO("q1\tdo you want a?\nq2\tdo you want b?\nq3\tdo you want c?\n")
        pool = load_pool(stream)
        assert len(pool) == 3
        assert not pool.filtered
        assert [q.id for q in pool.questions] == ["q1", "q2", "q3"]

    def test_empty_file(self):
        assert len(load_pool(io.StringIO(""))) == 0

    def test_duplicate_id(self):
        with pytest.raises(DuplicateIdError):
            load_pool(io.StringIO("q7\ta?\nq7\tb?\n"))

    def test_malformed_line(self):
        with pytest.raises(ParseError):
            load_pool(io.StringIO("no tab here\n"))


class TestFilterPool:
    def test_min_tokens(self):
        pool = pool_of("ok?", "do you want hours of operation?")
        out = filter_pool(pool)
        assert [q.text for q in out.questions] == ["do you want hours of operation?"]
        assert out.filtered

    def test_question_mark_required(self):
        pool = pool_of("tell me your budget", "what is your budget?")
        out = filter_pool(pool)
        assert [q.text for q in out.questions] == ["what is your budget?"]

    def test_blocklist(self):
        pool = pool_of("Can you be more specific?", "do you mean solar panels?")
        out = filter_pool(pool)
        assert [q.text for q in out.questions] == ["do you mean solar panels?"]

    def test_duplicates_keep_first(self):
        questions = (
            ClarifyingQuestion(id="q2", text="do you want details?"),
            ClarifyingQuestion(id="q1", text="do you want details?"),
        )
        out = filter_pool(QuestionPool(questions=questions))
        assert [q.id for q in out.questions] == ["q2"]

    def test_idempotent(self):
        pool = pool_of("ok?", "do you want hours of operation?", "do you want hours of operation?")
        once = filter_pool(pool)
        twice = filter_pool(once)
        assert once == twice


class TestTfIdfScorer:
    def test_self_similarity_is_one(self):
        scorer = TfIdfScorer(["a b c", "b c d"])
        assert scorer.score("b c", "b c") == pytest.approx(1.0)

    def test_bounded_by_self_similarity(self):
        scorer = TfIdfScorer(["alpha beta", "gamma delta"])
        assert scorer.score("alpha beta", "alpha beta") >= scorer.score("alpha beta", "alpha gamma")

    def test_disjoint_texts_score_zero(self):
        scorer = TfIdfScorer(["x y"])
        assert scorer.score("a b", "c d") == 0.0


class TestSelectQuestion:
    def test_identical_question_selected(self):
        pool = filter_pool(pool_of("are you asking about metal detectors?", "do you want beach rules?"))
        scorer = TfIdfScorer.from_pool(pool)
        out = select_question("are you asking about metal detectors?", pool, scorer)
        assert out.text == "are you asking about metal detectors?"

    def test_tfidf_cosine_argmax(self):
        pool = filter_pool(
            pool_of(
                "do you want a map of us territories?",
                "are you interested in a coding bootcamp?",
            )
        )
        scorer = TfIdfScorer.from_pool(pool)
        out = select_question("map of usa", pool, scorer)
        assert out.text == "do you want a map of us territories?"

    def test_tie_breaks_to_lower_id(self):
        questions = (
            ClarifyingQuestion(id="q9", text="same question here?"),
            ClarifyingQuestion(id="q2", text="same question other?"),
        )
        pool = QuestionPool(questions=questions, filtered=True)

        class ConstantScorer(TfIdfScorer):
            def __init__(self):
                super().__init__([])

            def score(self, query, candidate):
                return 0.5

        assert select_question("anything", pool, ConstantScorer()).id == "q2"

    def test_unfiltered_pool_rejected(self):
        pool = pool_of("do you want details on this?")
        with pytest.raises(ContractError):
            select_question("x", pool, TfIdfScorer.from_pool(pool))

    def test_empty_pool(self):
        pool = QuestionPool(questions=(), filtered=True)
        with pytest.raises(EmptyPoolError):
            select_question("x", pool, TfIdfScorer([]))

    def test_permutation_invariant(self):
        texts = (
            "do you want winter camping gear?",
            "are you looking for summer tents?",
            "should we compare sleeping bags?",
        )
        pool_a = filter_pool(pool_of(*texts))
        questions_reversed = tuple(reversed(pool_a.questions))
        pool_b = QuestionPool(questions=questions_reversed, filtered=True)
        scorer = TfIdfScorer.from_pool(pool_a)
        query = "sleeping bags for winter"
        assert select_question(query, pool_a, scorer) == select_question(query, pool_b, scorer)


class TestRemoteEmbedScorer:
    def test_unit_vector_dot(self, monkeypatch):
        import requests

        class FakeResponse:
            def raise_for_status(self):
                return None

            def json(self):
                return {"vectors": [[1.0, 0.0], [math.sqrt(0.5), math.sqrt(0.5)]]}

        monkeypatch.setattr(requests, "post", lambda *a, **k: FakeResponse())
        scorer = RemoteEmbedScorer("http://example.invalid/embed")
        assert scorer.score("a", "b") == pytest.approx(math.sqrt(0.5))

    def test_unavailable(self, monkeypatch):
        import requests

        def boom(*args, **kwargs):
            raise requests.ConnectionError("refused")

        monkeypatch.setattr(requests, "post", boom)
        scorer = RemoteEmbedScorer("http://example.invalid/embed")
        with pytest.raises(BackendUnavailableError):
            scorer.score("a", "b")
