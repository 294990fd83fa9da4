"""FastAPI service speaking the shared backend wire protocol.

One POST endpoint dispatches on the ``op`` field; ``GET /manifest``
describes the served ops, model identities and batch limit. Unknown ops
return a protocol error naming the op; oversize batches return a
batch-limit error; malformed bodies are rejected by validation without
crashing the service.
"""

from __future__ import annotations

import argparse
from typing import Any, Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field, ValidationError

from .models import (
    CentroidUsefulnessClassifier,
    HashedEmbedder,
    LexicalRewriter,
    OverlapScorer,
    read_annotation_file,
)

MAX_BATCH_SIZE = 64

KNOWN_OPS = ("resolve", "expand", "embed", "classify", "score", "prefer")


class ResolveRequest(BaseModel):
    op: Literal["resolve"]
    query: str
    history: list[dict[str, Any]] = Field(default_factory=list)


class ExpandRequest(BaseModel):
    op: Literal["expand"]
    query: str
    question: str | None = None
    answer: str | None = None
    history: list[dict[str, Any]] = Field(default_factory=list)


class EmbedRequest(BaseModel):
    op: Literal["embed"]
    texts: list[str]


class ClassifyRequest(BaseModel):
    op: Literal["classify"]
    query: str
    question: str
    answer: str


class PassageIn(BaseModel):
    id: str
    text: str


class ScoreRequest(BaseModel):
    op: Literal["score"]
    query: str
    passages: list[PassageIn]


class PairIn(BaseModel):
    a_id: str
    a_text: str
    b_id: str
    b_text: str


class PreferRequest(BaseModel):
    op: Literal["prefer"]
    query: str
    pairs: list[PairIn]


_REQUEST_TYPES = {
    "resolve": ResolveRequest,
    "expand": ExpandRequest,
    "embed": EmbedRequest,
    "classify": ClassifyRequest,
    "score": ScoreRequest,
    "prefer": PreferRequest,
}


def create_app(
    annotations_path: str | None = None,
    max_batch_size: int = MAX_BATCH_SIZE,
) -> FastAPI:
    rewriter = LexicalRewriter()
    embedder = HashedEmbedder()
    scorer = OverlapScorer()
    classifier = CentroidUsefulnessClassifier()
    if annotations_path is not None:
        classifier.fit(read_annotation_file(annotations_path))

    served_ops = ["resolve", "expand", "embed", "score", "prefer"]
    if classifier.trained:
        served_ops.insert(3, "classify")

    app = FastAPI(title="clarisidecar inference service")

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {"status": "ok", "ops": served_ops}

    @app.get("/manifest")
    def manifest() -> dict[str, Any]:
        return {
            "ops": served_ops,
            "models": {
                "resolve": rewriter.identity,
                "expand": rewriter.identity,
                "embed": embedder.identity,
                "classify": classifier.identity if classifier.trained else None,
                "score": scorer.identity,
                "prefer": scorer.identity,
            },
            "max_batch_size": max_batch_size,
        }

    @app.post("/")
    def handle(body: dict[str, Any]) -> dict[str, Any]:
        op = body.get("op")
        if op not in KNOWN_OPS:
            raise HTTPException(status_code=400, detail=f"unknown op {op!r}")
        if op not in served_ops:
            raise HTTPException(status_code=400, detail=f"op {op!r} is not served (no model loaded)")
        try:
            request = _REQUEST_TYPES[op].model_validate(body)
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

        if isinstance(request, ResolveRequest):
            return {"text": rewriter.resolve(request.query, request.history)}
        if isinstance(request, ExpandRequest):
            if request.question is None and request.answer is None:
                raise HTTPException(status_code=422, detail="expand requires question or answer")
            return {"text": rewriter.expand(request.query, request.question, request.answer)}
        if isinstance(request, EmbedRequest):
            if len(request.texts) > max_batch_size:
                raise HTTPException(
                    status_code=413,
                    detail=f"batch of {len(request.texts)} exceeds limit {max_batch_size}",
                )
            return {"vectors": [embedder.embed(text) for text in request.texts]}
        if isinstance(request, ClassifyRequest):
            return {"label": classifier.classify(request.query, request.question, request.answer)}
        if isinstance(request, ScoreRequest):
            if len(request.passages) > max_batch_size:
                raise HTTPException(
                    status_code=413,
                    detail=f"batch of {len(request.passages)} exceeds limit {max_batch_size}",
                )
            return {"scores": [scorer.score(request.query, p.text) for p in request.passages]}
        if len(request.pairs) > max_batch_size:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(request.pairs)} exceeds limit {max_batch_size}",
            )
        return {
            "probs": [scorer.prefer(request.query, p.a_text, p.b_text) for p in request.pairs]
        }

    return app


def main(argv: list[str] | None = None) -> int:
    import uvicorn

    parser = argparse.ArgumentParser(prog="clarisidecar")
    parser.add_argument("--annotations", help="annotation file to train the classify op")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8091)
    parser.add_argument("--max-batch-size", type=int, default=MAX_BATCH_SIZE)
    args = parser.parse_args(argv)
    app = create_app(annotations_path=args.annotations, max_batch_size=args.max_batch_size)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
