"""Hierarchical retrieval QA from the command line.

Subcommands ``ingest``, ``ask`` and ``eval`` share one JSON config.

Exit codes: 0 success, 2 usage or input error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import httpx

from hiersearch.config import Config
from hiersearch.corpus import CorpusStore
from hiersearch.dense import DenseIndex
from hiersearch.errors import BackendError
from hiersearch.evaluation import METRICS, evaluate, load_dataset
from hiersearch.pipeline import (
    MODES,
    build_embedder,
    build_gateway,
    build_pipeline,
    load_resources,
    searchers_needed,
)
from hiersearch.sparse_index import SparseIndex

logger = logging.getLogger("hiersearch")

EXIT_OK, EXIT_USAGE, EXIT_BACKEND = 0, 2, 3


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiersearch", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="JSON config file (defaults apply when omitted)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="chunk a JSONL corpus and build the indexes")
    p.add_argument("corpus", type=Path)
    p.add_argument("--store", type=Path, help="snapshot path (overrides corpus.store_path)")
    p.add_argument("--chunk-words", type=_positive_int)

    p = sub.add_parser("ask", help="answer one question")
    p.add_argument("question")
    p.add_argument("--mode", choices=MODES, default="hierarchical")
    p.add_argument("--trace", type=Path, help="write the search session as JSON")

    p = sub.add_parser("eval", help="evaluate a JSONL dataset")
    p.add_argument("dataset", type=Path)
    p.add_argument("--mode", choices=MODES, default="hierarchical")
    p.add_argument("--out", type=Path, required=True, help="summary JSON; rows go to <out>.rows.jsonl")
    p.add_argument("--first", type=_positive_int, help="only evaluate the first N records")
    p.add_argument("--parallelism", type=_positive_int, default=1)
    return parser


def cmd_ingest(config: Config, args: argparse.Namespace) -> int:
    chunk_words = args.chunk_words or config.corpus.chunk_words
    store = CorpusStore()
    n = store.ingest_jsonl(args.corpus, chunk_words=chunk_words)
    store_path = args.store or config.resolve(config.corpus.store_path)
    store.save(store_path)

    sp = config.sparse
    SparseIndex.build(store, k1=sp.k1, b=sp.b, title_weight=sp.title_weight).save(
        config.resolve(sp.index_path)
    )
    wanted = set(config.searchers.enabled) | set(config.searchers.vanilla_retrievers)
    if "dense" in wanted:
        DenseIndex.build(store, build_embedder(config)).save(config.resolve(config.dense.index_path))
    print(f"{n} chunks")
    return EXIT_OK


def _pipeline(config: Config, mode: str):
    resources = load_resources(config, searchers_needed(config, mode))
    return build_pipeline(config, mode, resources, build_gateway(config))


def cmd_ask(config: Config, args: argparse.Namespace) -> int:
    if not args.question.strip():
        print("error: question must not be empty", file=sys.stderr)
        return EXIT_USAGE
    result = _pipeline(config, args.mode).answer(args.question)
    print(result.response)
    if args.trace:
        args.trace.parent.mkdir(parents=True, exist_ok=True)
        if result.session is not None:
            args.trace.write_text(result.session.to_json(indent=2), encoding="utf-8")
        else:
            payload = {"user_query": args.question, "mode": args.mode,
                       "doc_ids": [d.id for d in result.docs], "audit": result.audit.records}
            args.trace.write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    return EXIT_OK


def cmd_eval(config: Config, args: argparse.Namespace) -> int:
    records = load_dataset(args.dataset, first=args.first)
    if not records:
        print(f"error: {args.dataset} contains no records", file=sys.stderr)
        return EXIT_USAGE
    pipeline = _pipeline(config, args.mode)
    report = evaluate(records, pipeline, parallelism=args.parallelism,
                      normalization=config.eval.normalization)
    report.write(args.out)
    print(" ".join(f"{m}={getattr(report, m):.2f}" for m in METRICS) + f" n={report.n} failed={report.failed}")
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "ask": cmd_ask, "eval": cmd_eval}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = Config.load(args.config) if args.config else Config()
        return COMMANDS[args.command](config, args)
    except (BackendError, httpx.HTTPError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
