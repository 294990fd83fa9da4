import io
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clarisearch.errors import DuplicateIdError, NotFoundError
from clarisearch.retrieval import (
    InvertedIndex,
    Passage,
    RankedList,
    WeightedQuery,
    bm25_score,
    build_index,
    load_corpus,
    load_index,
    rm3_expand,
    save_index,
    search,
    tokenize,
)

from oracles import bm25_scores_direct, rm3_direct, search_direct

THREE_DOCS = [
    Passage("d1", "rain in spain"),
    Passage("d2", "rain rain rain"),
    Passage("d3", "sunny day"),
]


class TestTokenize:
    def test_sentence(self):
        assert tokenize("Find me map of USA.") == ["find", "me", "map", "of", "usa"]

    def test_empty(self):
        assert tokenize("") == []

    def test_punctuation_splits(self):
        assert tokenize("co-ed 2024") == ["co", "ed", "2024"]

    @given(st.text())
    @settings(max_examples=200, deadline=None)
    def test_tokens_are_lowercase_alnum(self, text):
        for token in tokenize(text):
            assert token == token.lower()
            assert token
            assert all(ch.isalnum() for ch in token)


class TestBuildIndex:
    def test_empty_corpus(self):
        index = build_index([])
        assert index.doc_count == 0
        assert index.avg_doc_length == 0.0

    def test_counts(self):
        index = build_index([Passage("d1", "rain rain sun")])
        assert index.postings["rain"] == (("d1", 2),)
        assert index.postings["sun"] == (("d1", 1),)
        assert index.doc_length["d1"] == 3

    def test_duplicate_passage(self):
        with pytest.raises(DuplicateIdError):
            build_index([Passage("d1", "a b"), Passage("d1", "c d")])

    def test_invariants(self):
        index = build_index(THREE_DOCS)
        for term, posting in index.postings.items():
            for pid, tf in posting:
                assert tf <= index.doc_length[pid]
        assert index.doc_count == len(index.doc_length)
        assert index.avg_doc_length == pytest.approx(
            sum(index.doc_length.values()) / index.doc_count
        )


class TestBM25:
    def test_no_query_terms_in_passage(self):
        index = build_index(THREE_DOCS)
        assert bm25_score(index, WeightedQuery({"rain": 1.0}), "d3") == 0.0

    def test_hand_evaluated_formula(self):
        # d2 = "rain rain rain": tf=3, len=3, avg=8/3, df=2, N=3
        index = build_index(THREE_DOCS)
        idf = math.log(1 + (3 - 2 + 0.5) / (2 + 0.5))
        norm = 0.95 * (1 - 0.45 + 0.45 * (3 / (8 / 3)))
        expected = idf * 3 * (0.95 + 1) / (3 + norm)
        assert bm25_score(index, WeightedQuery({"rain": 1.0}), "d2") == pytest.approx(
            expected, abs=1e-9
        )

    def test_higher_tf_scores_higher(self):
        index = build_index(THREE_DOCS)
        q = WeightedQuery({"rain": 1.0})
        assert bm25_score(index, q, "d2") > bm25_score(index, q, "d1")

    def test_unknown_passage(self):
        index = build_index(THREE_DOCS)
        with pytest.raises(NotFoundError):
            bm25_score(index, WeightedQuery({"rain": 1.0}), "nope")

    def test_matches_direct_oracle(self):
        docs = [(p.id, p.text) for p in THREE_DOCS]
        index = build_index(THREE_DOCS)
        q = {"rain": 1.0, "day": 2.0}
        expected = bm25_scores_direct(docs, q)
        for pid in index.doc_length:
            assert bm25_score(index, WeightedQuery(q), pid) == pytest.approx(
                expected[pid], abs=1e-9
            )

    def test_strictly_increasing_in_tf(self):
        # same lengths, increasing tf of the query term
        docs = [Passage(f"d{i}", " ".join(["rain"] * i + ["pad"] * (5 - i))) for i in range(1, 6)]
        index = build_index(docs)
        q = WeightedQuery({"rain": 1.0})
        scores = [bm25_score(index, q, f"d{i}") for i in range(1, 6)]
        assert all(a < b for a, b in zip(scores, scores[1:]))


class TestSearch:
    def test_k_zero(self):
        index = build_index(THREE_DOCS)
        assert search(index, WeightedQuery({"rain": 1.0}), 0).entries == ()

    def test_ranking_with_zero_scores_excluded(self):
        index = build_index(THREE_DOCS)
        result = search(index, WeightedQuery({"rain": 1.0}), 10)
        assert result.ids() == ["d2", "d1"]

    def test_tie_broken_by_ascending_id(self):
        index = build_index([Passage("b", "x y"), Passage("a", "x y"), Passage("c", "z")])
        result = search(index, WeightedQuery({"x": 1.0}), 10)
        assert result.ids() == ["a", "b"]

    def test_prefix_property(self):
        index = build_index(THREE_DOCS + [Passage("d4", "rain rain day")])
        q = WeightedQuery({"rain": 1.0, "day": 0.5})
        full = search(index, q, 10).entries
        for k in range(len(full) + 1):
            assert search(index, q, k).entries == full[:k]


class TestRM3:
    def test_zero_expansion_terms(self):
        index = build_index(THREE_DOCS)
        out = rm3_expand(index, WeightedQuery({"rain": 2.0}), fb_terms=0)
        assert out.weights == {"rain": 1.0}

    def test_lambda_one_is_identity(self):
        index = build_index(THREE_DOCS)
        out = rm3_expand(index, WeightedQuery({"rain": 1.0, "day": 3.0}), lambda_=1.0)
        assert out.weights == pytest.approx({"rain": 0.25, "day": 0.75})

    def test_empty_feedback_returns_normalized_input(self):
        index = build_index(THREE_DOCS)
        out = rm3_expand(index, WeightedQuery({"zebra": 4.0}))
        assert out.weights == {"zebra": 1.0}

    def test_two_passage_hand_mixture(self):
        docs = [
            Passage("p1", "storm cloud cloud"),
            Passage("p2", "storm wind sun"),
            Passage("p3", "desert dust"),
        ]
        index = build_index(docs)
        q = WeightedQuery({"storm": 1.0})
        got = rm3_expand(index, q, fb_docs=2, fb_terms=2, lambda_=0.5)
        expected = rm3_direct([(p.id, p.text) for p in docs], {"storm": 1.0}, 2, 2, 0.5)
        assert set(got.weights) == set(expected)
        for term, weight in expected.items():
            assert got.weights[term] == pytest.approx(weight, abs=1e-9)

    def test_weights_sum_to_one_and_size_bound(self):
        index = build_index(THREE_DOCS + [Passage("d4", "rain wind hail sleet")])
        q = WeightedQuery({"rain": 1.0, "sunny": 1.0})
        out = rm3_expand(index, q, fb_docs=3, fb_terms=4)
        assert sum(out.weights.values()) == pytest.approx(1.0, abs=1e-9)
        assert len(out.weights) <= 2 + 4

    def test_stopwords_not_expansion_candidates(self):
        index = build_index(THREE_DOCS)  # "in" is a stopword inside d1
        out = rm3_expand(index, WeightedQuery({"rain": 1.0}), fb_docs=2, fb_terms=10)
        assert "in" not in out.weights


class TestIndexSerialization:
    def test_round_trip_and_determinism(self):
        index = build_index(THREE_DOCS)
        text = save_index(index)
        again = save_index(build_index(list(THREE_DOCS)))
        assert text == again
        loaded = load_index(io.StringIO(text))
        assert loaded.postings == index.postings
        assert loaded.doc_length == index.doc_length
        assert loaded.doc_count == index.doc_count
        assert loaded.avg_doc_length == pytest.approx(index.avg_doc_length)


class TestCorpusFile:
    def test_load(self):
        stream = io.StringIO("d1\train in spain\nd2\tsunny day\n")
        passages = load_corpus(stream)
        assert [p.id for p in passages] == ["d1", "d2"]
        assert passages[0].text == "rain in spain"

    def test_duplicate_id(self):
        with pytest.raises(DuplicateIdError):
            load_corpus(io.StringIO("d1\ta\nd1\tb\n"))


@given(
    st.lists(
        st.text(alphabet="abcde ", min_size=1, max_size=20).filter(lambda t: t.strip()),
        min_size=1,
        max_size=8,
    ),
    st.dictionaries(
        st.text(alphabet="abcde", min_size=1, max_size=3),
        st.floats(min_value=0.1, max_value=3.0),
        min_size=1,
        max_size=4,
    ),
)
@settings(max_examples=60, deadline=None)
def test_search_matches_oracle_on_random_corpora(texts, weights):
    docs = [(f"p{i:02d}", text) for i, text in enumerate(texts)]
    index = build_index([Passage(pid, text) for pid, text in docs])
    got = search(index, WeightedQuery(weights), 5)
    expected = search_direct(docs, weights, 5)
    assert got.ids() == [pid for pid, _ in expected]
    for (gp, gs), (ep, es) in zip(got.entries, expected):
        assert gs == pytest.approx(es, abs=1e-9)


def test_ranked_list_from_scores_canonical_order():
    rl = RankedList.from_scores({"b": 1.0, "a": 1.0, "c": 2.0})
    assert rl.entries == (("c", 2.0), ("a", 1.0), ("b", 1.0))
