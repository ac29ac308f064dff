"""Print the breadth-first refinement tree of one sparse search when no result
set is ever accepted, showing where the depth and refinement caps bind.

    python3 scripts/budget_trace.py --max-depth 3 --max-refinements 27
"""

from __future__ import annotations

import argparse
import itertools
import re

from hiersearch.corpus import CorpusStore, DocumentChunk
from hiersearch.llm import AuditLog, LLMGateway, PromptKind, recording
from hiersearch.query import parse_query
from hiersearch.sparse_index import SparseIndex
from hiersearch.sparse_searcher import RefinementBudget, SparseSearcher

DOCS = [
    DocumentChunk("d1", "", "apple pie"),
    DocumentChunk("d2", "", "apple apple tart"),
    DocumentChunk("d3", "", "banana"),
]


class NeverSatisfied:
    """Rejects every result set and proposes a fresh keyword for each refinement."""

    def __init__(self) -> None:
        self.counter = itertools.count()

    def complete(self, kind, messages, temperature, max_tokens):
        text = messages[-1].content
        if kind is PromptKind.VERIFY:
            return "no"
        op = re.search(r"Operation: (\w+)", text).group(1)
        if op == "rewrite":
            return "apple"
        if op == "emphasize":
            return parse_query(re.search(r"Search query: (.*)", text).group(1)).clauses[0].tokens[0]
        return f"kw{next(self.counter)}"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--max-depth", type=int, default=3)
    parser.add_argument("--max-refinements", type=int, default=27)
    args = parser.parse_args()

    store = CorpusStore()
    store.add_chunks(DOCS)
    budget = RefinementBudget(args.max_depth, args.max_refinements)
    searcher = SparseSearcher(SparseIndex.build(DOCS), store, LLMGateway(NeverSatisfied()), budget)

    audit = AuditLog()
    with recording(audit):
        docs, state = searcher.search_with_state("apple")
    for rec in audit.of_type("sparse"):
        print(f"{rec['iteration']:>3}  depth {rec['depth']}  {'  ' * rec['depth']}{rec['query']}")
    per_depth = {}
    for rec in audit.of_type("sparse"):
        per_depth[rec["depth"]] = per_depth.get(rec["depth"], 0) + 1
    print(f"retrievals: {len(audit.of_type('sparse'))}  per depth: {per_depth}")
    print(f"refinements generated: {state.refinements_generated}")
    print(f"fallback result: {[d.id for d in docs]}")


if __name__ == "__main__":
    main()
