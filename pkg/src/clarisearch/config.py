"""Run configuration: file paths, retrieval parameters, backend endpoints.

Config files are plain ``key = value`` text with ``#`` comments. All
parameters default to the engine's standard values (BM25 k1=0.95 b=0.45,
RM3 with 10 feedback docs / 10 terms / lambda 0.5, rerank depths 1000 and
50). Backend endpoints are optional; when absent the documented built-in
fallbacks are used, which keeps whole runs air-gapped and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .clarification import QuestionPool, RemoteEmbedScorer, TfIdfScorer, filter_pool, load_pool
from .errors import InvalidArgumentsError, ParseError, ValidationError
from .pipeline import Engine, Mode, RetrievalParams
from .rerank import RemotePairwiseScorer, RemotePointwiseScorer, RerankConfig
from .retrieval import Passage, build_index, load_corpus, load_index
from .rewrite import RemoteRewriteBackend
from .usefulness import (
    RemoteClassifyBackend,
    UsefulnessModel,
    load_annotations,
    load_bundled_annotations,
    train,
)
from .wordlists import GENERIC_QUESTION_BLOCKLIST

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass
class EngineConfig:
    corpus_path: str | None = None
    index_path: str | None = None
    pool_path: str | None = None
    annotations_path: str | None = None
    model_path: str | None = None
    blocklist_path: str | None = None
    mode: Mode = Mode.MI_CLF
    rewrite_endpoint: str | None = None
    embed_endpoint: str | None = None
    classify_endpoint: str | None = None
    score_endpoint: str | None = None
    prefer_endpoint: str | None = None
    k1: float = 0.95
    b: float = 0.45
    fb_docs: int = 10
    fb_terms: int = 10
    rm3_lambda: float = 0.5
    pointwise_depth: int = 1000
    pairwise_depth: int = 50
    seed: int = 13
    folds: int = 5
    run_id: str | None = None
    timeout: float = 10.0

    def validate(self) -> None:
        if self.k1 <= 0:
            raise ValidationError("k1 must be positive")
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError("b must lie in [0, 1]")
        if not 0.0 <= self.rm3_lambda <= 1.0:
            raise ValidationError("rm3_lambda must lie in [0, 1]")
        if self.fb_docs < 0 or self.fb_terms < 0:
            raise ValidationError("fb_docs and fb_terms must be non-negative")
        if self.pointwise_depth < 1 or self.pairwise_depth < 1:
            raise ValidationError("rerank depths must be positive")
        if self.pairwise_depth > self.pointwise_depth:
            raise ValidationError("pairwise_depth must not exceed pointwise_depth")
        for name in ("corpus_path", "index_path", "pool_path", "annotations_path",
                     "model_path", "blocklist_path"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ValidationError(f"{name} {value!r} does not exist")


_INT_KEYS = {"fb_docs", "fb_terms", "pointwise_depth", "pairwise_depth", "seed", "folds"}
_FLOAT_KEYS = {"k1", "b", "rm3_lambda", "timeout"}
_PATH_KEYS = {
    "corpus_path", "index_path", "pool_path", "annotations_path", "model_path",
    "blocklist_path",
}
_ENDPOINT_KEYS = {
    "rewrite_endpoint", "embed_endpoint", "classify_endpoint", "score_endpoint",
    "prefer_endpoint",
}


def parse_config(text: str) -> EngineConfig:
    config = EngineConfig()
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "mode":
            try:
                config.mode = Mode(value.lower())
            except ValueError:
                raise ParseError(f"unknown mode {value!r}", line_no) from None
        elif key == "run_id":
            config.run_id = value or None
        elif key in _INT_KEYS:
            try:
                setattr(config, key, int(value))
            except ValueError:
                raise ParseError(f"{key} must be an integer", line_no) from None
        elif key in _FLOAT_KEYS:
            try:
                setattr(config, key, float(value))
            except ValueError:
                raise ParseError(f"{key} must be a number", line_no) from None
        elif key in _PATH_KEYS or key in _ENDPOINT_KEYS:
            setattr(config, key, value or None)
        else:
            raise ParseError(f"unknown config key {key!r}", line_no)
    return config


def load_config(path: str | Path) -> EngineConfig:
    config = parse_config(Path(path).read_text("utf-8"))
    config.validate()
    return config


def load_blocklist(path: str | Path) -> tuple[str, ...]:
    entries = [
        line.strip()
        for line in Path(path).read_text("utf-8").splitlines()
        if line.strip() and not line.strip().startswith("#")
    ]
    return tuple(entries)


def build_engine(config: EngineConfig) -> Engine:
    """Load every referenced artifact and assemble a ready-to-run engine."""
    config.validate()
    if config.corpus_path is None:
        raise InvalidArgumentsError("config requires corpus_path")

    with open(config.corpus_path, encoding="utf-8") as handle:
        passages = load_corpus(handle)
    corpus = {p.id: p.text for p in passages}

    if config.index_path is not None:
        with open(config.index_path, encoding="utf-8") as handle:
            index = load_index(handle)
        missing = set(index.doc_length) - set(corpus)
        if missing:
            raise ValidationError(
                f"index references {len(missing)} passages missing from the corpus"
            )
    else:
        index = build_index(passages)

    blocklist = (
        load_blocklist(config.blocklist_path)
        if config.blocklist_path is not None
        else GENERIC_QUESTION_BLOCKLIST
    )
    if config.pool_path is not None:
        with open(config.pool_path, encoding="utf-8") as handle:
            pool = filter_pool(load_pool(handle), blocklist=blocklist)
    else:
        pool = QuestionPool(questions=(), filtered=True)

    similarity = (
        RemoteEmbedScorer(config.embed_endpoint, timeout=config.timeout)
        if config.embed_endpoint
        else TfIdfScorer.from_pool(pool)
    )

    model: UsefulnessModel | None = None
    if config.model_path is not None:
        model = UsefulnessModel.from_json(Path(config.model_path).read_text("utf-8"))
    elif config.classify_endpoint is None:
        if config.annotations_path is not None:
            with open(config.annotations_path, encoding="utf-8") as handle:
                examples = load_annotations(handle)
        else:
            examples = load_bundled_annotations()
        model, _ = train(examples, folds=config.folds, seed=config.seed)

    return Engine(
        index=index,
        corpus=corpus,
        pool=pool,
        similarity=similarity,
        usefulness_model=model,
        rewriter=(
            RemoteRewriteBackend(config.rewrite_endpoint, timeout=config.timeout)
            if config.rewrite_endpoint
            else None
        ),
        classify_backend=(
            RemoteClassifyBackend(config.classify_endpoint, timeout=config.timeout)
            if config.classify_endpoint
            else None
        ),
        pointwise=(
            RemotePointwiseScorer(config.score_endpoint, timeout=config.timeout)
            if config.score_endpoint
            else None
        ),
        pairwise=(
            RemotePairwiseScorer(config.prefer_endpoint, timeout=config.timeout)
            if config.prefer_endpoint
            else None
        ),
        params=RetrievalParams(
            k1=config.k1,
            b=config.b,
            fb_docs=config.fb_docs,
            fb_terms=config.fb_terms,
            rm3_lambda=config.rm3_lambda,
            rerank=RerankConfig(
                pointwise_depth=config.pointwise_depth,
                pairwise_depth=config.pairwise_depth,
            ),
        ),
        run_id=config.run_id,
    )
