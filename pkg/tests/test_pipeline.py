import io

import pytest

from clarisearch.clarification import TfIdfScorer, filter_pool, load_pool
from clarisearch.errors import DuplicateIdError, InvalidArgumentsError, ParseError, StateError
from clarisearch.evaluation import write_run
from clarisearch.pipeline import (
    Engine,
    Mode,
    ScriptedTopic,
    ScriptedTurn,
    Session,
    TurnResult,
    parse_scripted_topics,
    run_batch,
    serialize_scripted_topics,
    submit_answer,
    submit_query,
)
from clarisearch.retrieval import Passage, tokenize
from clarisearch.usefulness import UsefulnessLabel, load_bundled_annotations, train

PASSAGES = [
    Passage("p1", "tarantula habitats burrow desert"),
    Passage("p2", "tarantula diet insects crickets"),
    Passage("p3", "orchid greenhouse humidity"),
    Passage("p4", "ferry harbor schedules coastal"),
    Passage("p5", "desert hiking trails"),
]

POOL_TEXT = (
    "q1\tdo you want tarantula habitats or diet?\n"
    "q2\tare you interested in orchid greenhouse care?\n"
    "q3\tdo you need ferry harbor schedules?\n"
)


@pytest.fixture(scope="module")
def model():
    model, _ = train(load_bundled_annotations(), folds=5, seed=13)
    return model


@pytest.fixture()
def engine(model):
    pool = filter_pool(load_pool(io.StringIO(POOL_TEXT)))
    return Engine.from_passages(
        PASSAGES,
        pool=pool,
        similarity=TfIdfScorer.from_pool(pool),
        usefulness_model=model,
    )


class TestSubmitQuery:
    def test_no_mi_retrieves_immediately(self, engine):
        session = Session.new(engine, Mode.NO_MI)
        result = submit_query(session, "tarantula habitats")
        assert isinstance(result, TurnResult)
        assert result.question_asked is None
        assert result.label is None
        assert result.ranking.entries == engine.retrieve("tarantula habitats").entries
        assert session.state.value == "awaiting_query"
        assert len(session.history) == 1

    def test_mi_returns_argmax_question(self, engine):
        session = Session.new(engine, Mode.MI_CLF)
        outcome = submit_query(session, "tarantula habitats")
        assert outcome.id == "q1"
        assert session.state.value == "awaiting_answer"
        assert len(session.history) == 0  # appended only when the turn completes

    def test_double_query_is_state_error(self, engine):
        session = Session.new(engine, Mode.MI_ALL)
        submit_query(session, "tarantula habitats")
        with pytest.raises(StateError):
            submit_query(session, "another query")

    def test_empty_query_rejected(self, engine):
        session = Session.new(engine, Mode.NO_MI)
        with pytest.raises(InvalidArgumentsError):
            submit_query(session, "   ")


class TestSubmitAnswer:
    def test_answer_without_question_is_state_error(self, engine):
        session = Session.new(engine, Mode.MI_CLF)
        with pytest.raises(StateError):
            submit_answer(session, "No.")

    def test_label_zero_matches_no_mi_ranking(self, engine):
        baseline = Session.new(engine, Mode.NO_MI)
        base = submit_query(baseline, "tarantula habitats")

        session = Session.new(engine, Mode.MI_CLF)
        submit_query(session, "tarantula habitats")
        result = submit_answer(session, "No.")
        assert result.label == UsefulnessLabel.NONE_USEFUL
        assert result.query_state.expanded == result.query_state.resolved
        assert result.ranking.entries == base.ranking.entries

    def test_mi_all_expands_with_both(self, engine):
        session = Session.new(engine, Mode.MI_ALL)
        question = submit_query(session, "tarantula habitats")
        result = submit_answer(session, "No.")
        assert result.label is None
        expanded_tokens = tokenize(result.query_state.expanded)
        resolved_tokens = tokenize(result.query_state.resolved)
        assert expanded_tokens[: len(resolved_tokens)] == resolved_tokens
        assert "no" in expanded_tokens
        # novel non-stopword tokens of the question got appended
        assert "diet" in expanded_tokens
        assert question.text.split()[0] not in expanded_tokens  # "do" is a stopword

    def test_mi_clf_content_answer_expands(self, engine):
        session = Session.new(engine, Mode.MI_CLF)
        submit_query(session, "tarantula habitats")
        result = submit_answer(session, "no i need crickets information")
        assert result.label == UsefulnessLabel.ANSWER_USEFUL
        assert "crickets" in tokenize(result.query_state.expanded)

    def test_history_grows_by_two_turns_per_mi_cycle(self, engine):
        session = Session.new(engine, Mode.MI_CLF)
        submit_query(session, "tarantula habitats")
        submit_answer(session, "No.")
        assert len(session.history) == 2
        assert session.history.turns[0].system.kind.value == "clarifying_question"
        assert session.history.turns[1].user.kind.value == "answer"
        assert session.history.turns[1].system.kind.value == "passage_list"
        submit_query(session, "desert trails")
        submit_answer(session, "Yes.")
        assert len(session.history) == 4
        with pytest.raises(StateError):
            submit_answer(session, "No.")

    def test_second_turn_resolution_uses_prior_query(self, engine):
        session = Session.new(engine, Mode.MI_CLF)
        submit_query(session, "tarantula habitats")
        submit_answer(session, "No.")
        submit_query(session, "what about their diet")
        resolved = session.pending[0].resolved
        assert "tarantula" in tokenize(resolved)


class TestScriptedTopics:
    TEXT = "t1\t1\ttarantula habitats\tNo.\nt1\t2\ttheir diet\tno i need crickets\n"

    def test_parse(self):
        topics = parse_scripted_topics(io.StringIO(self.TEXT))
        assert len(topics) == 1
        assert topics[0].turns[0].answer == "No."

    def test_round_trip(self):
        topics = parse_scripted_topics(io.StringIO(self.TEXT))
        assert serialize_scripted_topics(topics) == self.TEXT

    def test_empty_answer_allowed(self):
        topics = parse_scripted_topics(io.StringIO("t1\t1\tquery here\t\n"))
        assert topics[0].turns[0].answer is None

    def test_nonsequential_turns(self):
        with pytest.raises(ParseError):
            parse_scripted_topics(io.StringIO("t1\t2\tq\ta\n"))

    def test_duplicate_topic_block(self):
        text = "t1\t1\tq\ta\nt2\t1\tq\ta\nt1\t1\tq\ta\n"
        with pytest.raises(DuplicateIdError):
            parse_scripted_topics(io.StringIO(text))


class TestRunBatch:
    def topics(self):
        return [
            ScriptedTopic(
                topic_id="t1",
                turns=(
                    ScriptedTurn(1, "tarantula habitats", "No."),
                    ScriptedTurn(2, "their diet", "no i need crickets"),
                ),
            ),
            ScriptedTopic(
                topic_id="t2",
                turns=(ScriptedTurn(1, "orchid greenhouse", "Yes."),),
            ),
        ]

    def test_no_mi_single_topic(self, engine):
        topics = [ScriptedTopic(topic_id="t1", turns=(ScriptedTurn(1, "desert hiking", None),))]
        records, metadata = run_batch(engine, topics, Mode.NO_MI)
        assert all(r.topic_turn_id == "t1_1" for r in records)
        assert len(records) <= len(PASSAGES)
        assert metadata[0].label is None
        assert metadata[0].mode is Mode.NO_MI

    def test_deterministic_run_files(self, engine):
        records_a, _ = run_batch(engine, self.topics(), Mode.MI_CLF)
        records_b, _ = run_batch(engine, self.topics(), Mode.MI_CLF)
        assert write_run(records_a) == write_run(records_b)

    def test_missing_answer_names_turn(self, engine):
        topics = [ScriptedTopic(topic_id="t9", turns=(ScriptedTurn(1, "orchid care", None),))]
        with pytest.raises(InvalidArgumentsError) as exc:
            run_batch(engine, topics, Mode.MI_ALL)
        assert "t9" in str(exc.value)
        assert "1" in str(exc.value)

    def test_labels_recorded_for_mi_clf(self, engine):
        _, metadata = run_batch(engine, self.topics(), Mode.MI_CLF)
        labels = {(m.topic_id, m.turn): m.label for m in metadata}
        assert labels[("t1", 1)] == UsefulnessLabel.NONE_USEFUL
        assert labels[("t1", 2)] == UsefulnessLabel.ANSWER_USEFUL

    def test_mi_all_records_no_label(self, engine):
        _, metadata = run_batch(engine, self.topics(), Mode.MI_ALL)
        assert all(m.label is None for m in metadata)

    def test_run_scores_non_increasing_per_turn(self, engine):
        records, _ = run_batch(engine, self.topics(), Mode.MI_ALL)
        by_turn: dict[str, list] = {}
        for record in records:
            by_turn.setdefault(record.topic_turn_id, []).append(record)
        for rows in by_turn.values():
            rows.sort(key=lambda r: r.rank)
            scores = [r.score for r in rows]
            assert scores == sorted(scores, reverse=True)


class TestModeEquivalences:
    def test_all_bare_no_answers_reproduce_no_mi_run_file(self, engine):
        # with every answer classified label 0, MI_CLF output is the NO_MI output
        topics = [
            ScriptedTopic(
                topic_id="t1",
                turns=(
                    ScriptedTurn(1, "tarantula habitats", "No."),
                    ScriptedTurn(2, "their diet", "nope"),
                ),
            ),
            ScriptedTopic(
                topic_id="t2",
                turns=(ScriptedTurn(1, "orchid greenhouse", "no not that"),),
            ),
        ]
        records_clf, metadata = run_batch(engine, topics, Mode.MI_CLF, run_id="same")
        records_no_mi, _ = run_batch(engine, topics, Mode.NO_MI, run_id="same")
        assert all(m.label == UsefulnessLabel.NONE_USEFUL for m in metadata)
        assert write_run(records_clf) == write_run(records_no_mi)

    def test_mi_all_expansion_strictly_contains_resolved(self, engine):
        session = Session.new(engine, Mode.MI_ALL)
        submit_query(session, "tarantula habitats")
        result = submit_answer(session, "no i keep thinking about crickets")
        resolved_tokens = tokenize(result.query_state.resolved)
        expanded_tokens = tokenize(result.query_state.expanded)
        assert expanded_tokens[: len(resolved_tokens)] == resolved_tokens
        assert len(expanded_tokens) > len(resolved_tokens)


class TestEngineWithIndexFile:
    def test_run_from_saved_index_matches_in_memory(self, tmp_path, model):
        import io as _io

        from clarisearch.config import EngineConfig, build_engine
        from clarisearch.retrieval import build_index, save_index

        corpus_text = "".join(f"{p.id}\t{p.text}\n" for p in PASSAGES)
        corpus_path = tmp_path / "corpus.tsv"
        corpus_path.write_text(corpus_text, encoding="utf-8")
        pool_path = tmp_path / "pool.tsv"
        pool_path.write_text(POOL_TEXT, encoding="utf-8")
        index_path = tmp_path / "corpus.idx"
        index_path.write_text(save_index(build_index(PASSAGES)), encoding="utf-8")

        topics = [ScriptedTopic(topic_id="t1", turns=(ScriptedTurn(1, "tarantula habitats", "No."),))]
        engine_from_file = build_engine(
            EngineConfig(
                corpus_path=str(corpus_path),
                pool_path=str(pool_path),
                index_path=str(index_path),
            )
        )
        engine_in_memory = build_engine(
            EngineConfig(corpus_path=str(corpus_path), pool_path=str(pool_path))
        )
        records_a, _ = run_batch(engine_from_file, topics, Mode.MI_CLF, run_id="x")
        records_b, _ = run_batch(engine_in_memory, topics, Mode.MI_CLF, run_id="x")
        assert write_run(records_a) == write_run(records_b)
