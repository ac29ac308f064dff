"""Sparse searcher: keyword rewriting plus breadth-first query refinement.

The atomic query is rewritten into a keyword query and enqueued. Each dequeued
query is run against the BM25 index and its results verified; if they do not
suffice, three refinements are derived from it (extend with a new keyword,
emphasize an existing keyword, filter out a noise word) and enqueued one level
deeper. Growth stops at ``max_depth`` or once ``max_refinements`` refinements
have been generated, whichever binds first.
"""

from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass, field

from hiersearch.corpus import CorpusStore, DocumentChunk
from hiersearch.llm import LLMGateway, PromptKind, format_documents, parse_structured, trace
from hiersearch.query import QueryClause, QueryParseError, SparseQuery, parse_query, render_query
from hiersearch.sparse_index import ScoredHit, SparseIndex, rank_hits
from hiersearch.text import analyze, content_words

logger = logging.getLogger(__name__)

EMPHASIS_FACTOR = 2.0


@dataclass(frozen=True)
class RefinementBudget:
    max_depth: int = 3
    max_refinements: int = 27
    retrieval_k: int = 10

    def __post_init__(self) -> None:
        if min(self.max_depth, self.max_refinements, self.retrieval_k) < 1:
            raise ValueError("all budget values must be positive")


@dataclass
class SparseSearchState:
    atomic_query: str
    queue: deque = field(default_factory=deque)  # of (SparseQuery, depth)
    refinements_generated: int = 0
    attempts: list[tuple[SparseQuery, list[ScoredHit]]] = field(default_factory=list)
    max_depth_enqueued: int = 0


def bag_of_words_query(text: str) -> SparseQuery:
    """Unboosted single-term clauses for the content words of ``text``."""
    words = content_words(text)
    if not words:
        raise ValueError(f"no searchable terms in {text!r}")
    return SparseQuery(tuple(QueryClause((w,)) for w in words))


def _proposal_tokens(raw: str) -> list[str]:
    line = next((ln for ln in raw.splitlines() if ln.strip()), "")
    line = re.sub(r"\^\s*[0-9.]+", " ", line)
    return analyze(line)


def _contains_run(haystack: tuple[str, ...], needle: tuple[str, ...]) -> bool:
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


class SparseSearcher:
    def __init__(
        self,
        index: SparseIndex,
        store: CorpusStore,
        gateway: LLMGateway,
        budget: RefinementBudget | None = None,
        *,
        rewrite: bool = True,
        feedback: bool = True,
    ) -> None:
        self.index = index
        self.store = store
        self.gateway = gateway
        self.budget = budget or RefinementBudget()
        self.rewrite = rewrite
        self.feedback = feedback

    # -- single steps ---------------------------------------------------------

    def rewrite_to_keywords(self, atomic_query: str) -> SparseQuery:
        raw = self.gateway.ask(PromptKind.SPARSE_REWRITE, operation="rewrite", query=atomic_query)
        text = parse_structured(PromptKind.SPARSE_REWRITE, raw)
        try:
            return parse_query(text)
        except QueryParseError as exc:
            logger.info("keyword rewrite %r unusable (%s); using bag of words", text, exc)
            return bag_of_words_query(atomic_query)

    def verify(self, docs: list[DocumentChunk], atomic_query: str) -> bool:
        if not docs:
            return False
        return self.gateway.verify(atomic_query, format_documents(docs))

    def _propose(self, operation: str, q: SparseQuery, docs: list[DocumentChunk], atomic_query: str) -> list[str]:
        slots = {"operation": operation, "query": atomic_query, "current_query": render_query(q)}
        if docs:
            slots["documents"] = format_documents(docs)
        return _proposal_tokens(self.gateway.ask(PromptKind.SPARSE_REWRITE, **slots))

    def extend(self, q: SparseQuery, docs: list[DocumentChunk], atomic_query: str = "") -> SparseQuery:
        tokens = tuple(self._propose("extend", q, docs, atomic_query or render_query(q)))
        if not tokens or any(_contains_run(c.tokens, tokens) for c in q.clauses):
            return q
        return q.with_clause(QueryClause(tokens))

    def emphasize(self, q: SparseQuery, docs: list[DocumentChunk], atomic_query: str = "") -> SparseQuery:
        tokens = tuple(self._propose("emphasize", q, docs, atomic_query or render_query(q)))
        for i, clause in enumerate(q.clauses):
            if not clause.negated and clause.tokens == tokens:
                return q.with_boost(i, clause.boost * EMPHASIS_FACTOR)
        return q

    def filter(self, q: SparseQuery, docs: list[DocumentChunk], atomic_query: str = "") -> SparseQuery:
        tokens = tuple(self._propose("filter", q, docs, atomic_query or render_query(q)))
        if not tokens:
            return q
        # Excluding part of a required clause would exclude every doc it matches.
        if any(_contains_run(c.tokens, tokens) for c in q.positives):
            return q
        if any(c.tokens == tokens for c in q.negatives):
            return q
        return q.with_clause(QueryClause(tokens, negated=True))

    # -- full pipeline ----------------------------------------------------------

    def _retrieve(self, q: SparseQuery) -> tuple[list[ScoredHit], list[DocumentChunk]]:
        hits = self.index.search(q, self.budget.retrieval_k)
        return hits, [self.store.get(h.chunk_id) for h in hits]

    def search(self, atomic_query: str) -> list[DocumentChunk]:
        return self.search_with_state(atomic_query)[0]

    def search_with_state(self, atomic_query: str) -> tuple[list[DocumentChunk], SparseSearchState]:
        state = SparseSearchState(atomic_query)
        try:
            q0 = self.rewrite_to_keywords(atomic_query) if self.rewrite else bag_of_words_query(atomic_query)
        except ValueError:
            logger.warning("atomic query %r has no searchable terms", atomic_query)
            return [], state

        if not self.feedback:
            hits, docs = self._retrieve(q0)
            state.attempts.append((q0, hits))
            trace("sparse", iteration=0, query=render_query(q0), depth=0,
                  hit_ids=[h.chunk_id for h in hits], verdict=None)
            return docs, state

        budget = self.budget
        state.queue.append((q0, 0))
        while state.queue:
            q, depth = state.queue.popleft()
            hits, docs = self._retrieve(q)
            state.attempts.append((q, hits))
            verdict = self.verify(docs, atomic_query)
            trace("sparse", iteration=len(state.attempts) - 1, query=render_query(q), depth=depth,
                  hit_ids=[h.chunk_id for h in hits], verdict=verdict)
            if verdict:
                return docs, state
            if depth >= budget.max_depth or state.refinements_generated + 3 > budget.max_refinements:
                continue
            children = [
                self.extend(q, docs, atomic_query),
                self.emphasize(q, docs, atomic_query),
                self.filter(q, docs, atomic_query),
            ]
            state.refinements_generated += 3
            for child in children:
                if child != q:
                    state.queue.append((child, depth + 1))
                    state.max_depth_enqueued = max(state.max_depth_enqueued, depth + 1)
            trace("sparse_expand", parent=render_query(q), depth=depth + 1,
                  children=[render_query(c) for c in children if c != q],
                  refinements_generated=state.refinements_generated)

        # Nothing verified: hand back everything seen, best score per document.
        best: dict[str, float] = {}
        for _, hits in state.attempts:
            for h in hits:
                best[h.chunk_id] = max(best.get(h.chunk_id, h.score), h.score)
        merged = rank_hits(best, budget.retrieval_k)
        return [self.store.get(h.chunk_id) for h in merged], state
