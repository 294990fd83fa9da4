"""Batch command-line interface: index, train, run, evaluate, kappa, serve.

Output is machine-readable (tab-separated ``name<TAB>value`` lines on
stdout). Exit codes: 0 on success, 2 on usage or missing-file errors,
1 on engine errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as config_mod
from . import evaluation, pipeline, retrieval, usefulness
from .errors import EngineError

USAGE_EXIT = 2


def _fail(message: str, code: int = USAGE_EXIT) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    return p


def cmd_index(args: argparse.Namespace) -> int:
    corpus_path = _require_file(args.corpus)
    with corpus_path.open(encoding="utf-8") as handle:
        passages = retrieval.load_corpus(handle)
    index = retrieval.build_index(passages)
    Path(args.out).write_text(retrieval.save_index(index), encoding="utf-8")
    print(f"passages\t{index.doc_count}")
    print(f"terms\t{len(index.postings)}")
    print(f"out\t{args.out}")
    return 0


def cmd_train_usefulness(args: argparse.Namespace) -> int:
    annotations_path = _require_file(args.annotations)
    with annotations_path.open(encoding="utf-8") as handle:
        examples = usefulness.load_annotations(handle)
    model, report = usefulness.train(examples, folds=args.folds, seed=args.seed)
    f1 = report.metrics["macro_f1"]
    acc = report.metrics["accuracy"]
    for fold in sorted(f1.per_turn):
        print(f"{fold}\tmacro_f1\t{f1.per_turn[fold]:.6f}\taccuracy\t{acc.per_turn[fold]:.6f}")
    print(f"mean_macro_f1\t{f1.mean:.6f}")
    print(f"mean_accuracy\t{acc.mean:.6f}")
    if args.out:
        Path(args.out).write_text(model.to_json(), encoding="utf-8")
        print(f"model\t{args.out}")
    return 0


def _build_run_config(args: argparse.Namespace) -> config_mod.EngineConfig:
    if args.config:
        cfg = config_mod.load_config(_require_file(args.config))
    else:
        cfg = config_mod.EngineConfig()
    for key in ("corpus", "pool", "index", "annotations", "model"):
        value = getattr(args, key)
        if value:
            _require_file(value)
            setattr(cfg, f"{key}_path", value)
    if args.run_id:
        cfg.run_id = args.run_id
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.mode = pipeline.Mode(args.mode)
    cfg.validate()
    return cfg


def cmd_run(args: argparse.Namespace) -> int:
    topics_path = _require_file(args.topics)
    cfg = _build_run_config(args)
    engine = config_mod.build_engine(cfg)
    with topics_path.open(encoding="utf-8") as handle:
        topics = pipeline.parse_scripted_topics(handle)
    records, metadata = pipeline.run_batch(engine, topics, cfg.mode, run_id=cfg.run_id)
    Path(args.out).write_text(evaluation.write_run(records), encoding="utf-8")
    meta_path = args.meta or f"{args.out}.meta"
    meta_text = "".join(row.to_line() + "\n" for row in metadata)
    Path(meta_path).write_text(meta_text, encoding="utf-8")
    print(f"turns\t{len(metadata)}")
    print(f"rows\t{len(records)}")
    print(f"out\t{args.out}")
    print(f"meta\t{meta_path}")
    if engine.degraded_to_fallback:
        print("degraded\trewrite backend unavailable, fallback used")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    run_path = _require_file(args.run)
    qrels_path = _require_file(args.qrels)
    with run_path.open(encoding="utf-8") as handle:
        records = evaluation.read_run(handle)
    with qrels_path.open(encoding="utf-8") as handle:
        qrels = evaluation.read_qrels(handle)
    names = [name for name in args.metrics.split(",") if name.strip()]
    report = evaluation.evaluate_run(
        records,
        qrels,
        names,
        rel_threshold=args.rel_threshold,
        exponential_gain=args.exp_gain,
    )
    turn_count = len(evaluation.run_by_turn(records))
    for name in names:
        result = report.metrics[evaluation.normalize_metric_name(name)]
        print(f"{evaluation.normalize_metric_name(name)}\t{result.mean:.6f}")
        if args.per_turn:
            for tid in sorted(result.per_turn):
                print(f"{evaluation.normalize_metric_name(name)}\t{tid}\t{result.per_turn[tid]:.6f}")
    any_result = next(iter(report.metrics.values()))
    print(f"turns_evaluated\t{turn_count - len(any_result.skipped)}")
    print(f"turns_skipped\t{len(any_result.skipped)}")
    return 0


def cmd_kappa(args: argparse.Namespace) -> int:
    with _require_file(args.annotations_a).open(encoding="utf-8") as handle:
        examples_a = usefulness.load_annotations(handle)
    with _require_file(args.annotations_b).open(encoding="utf-8") as handle:
        examples_b = usefulness.load_annotations(handle)
    if len(examples_a) != len(examples_b):
        return _fail("annotation files must have the same number of rows")
    kappa = evaluation.cohens_kappa(
        [int(e.label) for e in examples_a], [int(e.label) for e in examples_b]
    )
    print(f"kappa\t{kappa:.6f}")
    return 0


def cmd_synthesize_annotations(args: argparse.Namespace) -> int:
    examples = usefulness.synthesize_annotations(n=args.n, seed=args.seed)
    text = usefulness.serialize_annotations(examples)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"examples\t{len(examples)}")
        print(f"out\t{args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    cfg = config_mod.load_config(_require_file(args.config))
    engine = config_mod.build_engine(cfg)
    app = create_app(engine)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clarisearch",
        description="Mixed-initiative conversational passage retrieval engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build an inverted index from a corpus file")
    p.add_argument("corpus")
    p.add_argument("out")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("train-usefulness", help="train the usefulness classifier")
    p.add_argument("annotations")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--out", help="write the trained model as JSON")
    p.set_defaults(func=cmd_train_usefulness)

    p = sub.add_parser("run", help="run scripted topics and write a TREC run file")
    p.add_argument("topics")
    p.add_argument("--mode", required=True, choices=[m.value for m in pipeline.Mode])
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--corpus")
    p.add_argument("--pool")
    p.add_argument("--index")
    p.add_argument("--annotations")
    p.add_argument("--model")
    p.add_argument("--run-id", dest="run_id")
    p.add_argument("--seed", type=int)
    p.add_argument("--meta", help="metadata sidecar path (default: <out>.meta)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="score a run file against qrels")
    p.add_argument("run")
    p.add_argument("qrels")
    p.add_argument("--metrics", default="r@1000,map,mrr,ndcg,ndcg@3,ndcg@5")
    p.add_argument("--rel-threshold", type=int, default=1)
    p.add_argument("--exp-gain", action="store_true")
    p.add_argument("--per-turn", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("kappa", help="inter-annotator agreement of two annotation files")
    p.add_argument("annotations_a")
    p.add_argument("annotations_b")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("synthesize-annotations", help="generate a synthetic annotation set")
    p.add_argument("--n", type=int, default=150)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synthesize_annotations)

    p = sub.add_parser("serve", help="start the HTTP session service")
    p.add_argument("--config", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        return _fail(str(exc))
    except EngineError as exc:
        return _fail(str(exc), code=1)


if __name__ == "__main__":
    sys.exit(main())
