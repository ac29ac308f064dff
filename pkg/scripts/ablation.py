"""Cumulative ablation over a dataset: vanilla BM25, then +decompose,
+summarize and +supplement on top of the sparse searcher.

Defaults run the scripted two-hop fixture offline:

    python3 scripts/ablation.py
    python3 scripts/ablation.py --config my.json --corpus wiki.jsonl --dataset dev.jsonl
"""

from __future__ import annotations

import argparse
import dataclasses
from pathlib import Path

from hiersearch.config import Config
from hiersearch.corpus import CorpusStore
from hiersearch.evaluation import METRICS, evaluate, load_dataset
from hiersearch.pipeline import Resources, build_gateway, build_pipeline, load_resources
from hiersearch.sparse_index import SparseIndex

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

# (row label, mode, decompose, summarize, supplement)
ROWS = [
    ("vanilla BM25", "vanilla", False, False, False),
    ("+ decompose", "hierarchical", True, False, False),
    ("+ summarize", "hierarchical", True, True, False),
    ("+ supplement", "hierarchical", True, True, True),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=FIXTURES / "multihop_config.json")
    parser.add_argument("--corpus", type=Path, help="JSONL corpus to index in memory (default: fixture corpus)")
    parser.add_argument("--dataset", type=Path, default=FIXTURES / "multihop_dataset.jsonl")
    parser.add_argument("--first", type=int)
    parser.add_argument("--parallelism", type=int, default=1)
    args = parser.parse_args()

    config = Config.load(args.config)
    if args.corpus or args.config == FIXTURES / "multihop_config.json":
        store = CorpusStore()
        store.ingest_jsonl(args.corpus or FIXTURES / "multihop_corpus.jsonl", config.corpus.chunk_words)
        resources = Resources(store, SparseIndex.build(store))
    else:
        resources = load_resources(config, {"sparse"})
    records = load_dataset(args.dataset, first=args.first)

    print(f"{'setting':<14}" + "".join(f"{m:>8}" for m in METRICS))
    for label, mode, decompose, summarize, supplement in ROWS:
        cfg = dataclasses.replace(
            config,
            searchers=dataclasses.replace(config.searchers, enabled=["sparse"], vanilla_retrievers=["sparse"]),
            high_level=dataclasses.replace(config.high_level, decompose=decompose, summarize=summarize,
                                           supplement=supplement),
        )
        pipeline = build_pipeline(cfg, mode, resources, build_gateway(cfg))
        report = evaluate(records, pipeline, parallelism=args.parallelism,
                          normalization=cfg.eval.normalization)
        print(f"{label:<14}" + "".join(f"{getattr(report, m):8.2f}" for m in METRICS))


if __name__ == "__main__":
    main()
