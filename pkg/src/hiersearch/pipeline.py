"""End-to-end question answering in one of five modes.

``hierarchical``
    high-level searcher over the enabled low-level searchers, then generation
    from the session's final context.
``vanilla``
    raw user question to the configured plain retrievers; all documents go
    into the generator prompt.
``sparse_only`` / ``dense_only`` / ``web_only``
    a single low-level searcher on the raw question, documents concatenated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

from hiersearch.config import Config
from hiersearch.corpus import CorpusStore, DocumentChunk
from hiersearch.dense import DenseIndex, HashEmbedder, RemoteEmbedder
from hiersearch.dense_searcher import DenseSearcher
from hiersearch.high_level import SEARCHER_ORDER, HighLevelConfig, HighLevelSearcher, SearchSession
from hiersearch.llm import (
    AuditLog,
    LLMGateway,
    PromptKind,
    RemoteChatBackend,
    ScriptedBackend,
    format_documents,
    parse_structured,
    recording,
)
from hiersearch.sparse_index import SparseIndex
from hiersearch.sparse_searcher import RefinementBudget, SparseSearcher, bag_of_words_query
from hiersearch.web_searcher import WebSearcher

logger = logging.getLogger(__name__)

MODES = ("hierarchical", "vanilla", "sparse_only", "dense_only", "web_only")
EMPTY_CONTEXT = "No documents were retrieved."

Retriever = Callable[[str], list[DocumentChunk]]


@dataclass
class PipelineResult:
    question: str
    response: str
    docs: list[DocumentChunk]
    context: str
    audit: AuditLog
    session: SearchSession | None = None

    def generator_prompt(self) -> list[dict]:
        calls = self.audit.llm_calls(PromptKind.GENERATE)
        return calls[-1]["messages"] if calls else []


def generate(gateway: LLMGateway, question: str, context: str) -> str:
    raw = gateway.ask(PromptKind.GENERATE, question=question, contexts=context or EMPTY_CONTEXT)
    return parse_structured(PromptKind.GENERATE, raw)


def _dedupe(docs: list[DocumentChunk]) -> list[DocumentChunk]:
    seen: dict[str, DocumentChunk] = {}
    for d in docs:
        seen.setdefault(d.id, d)
    return list(seen.values())


@dataclass
class Pipeline:
    mode: str
    gateway: LLMGateway
    searchers: Mapping[str, Retriever] = field(default_factory=dict)
    retrievers: Mapping[str, Retriever] = field(default_factory=dict)
    high_level: HighLevelSearcher | None = None
    vanilla_retrievers: tuple[str, ...] = ("sparse",)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "hierarchical" and self.high_level is None:
            raise ValueError("hierarchical mode needs a high-level searcher")

    def __call__(self, question: str) -> PipelineResult:
        return self.answer(question)

    def answer(self, question: str) -> PipelineResult:
        if not question.strip():
            raise ValueError("question must be non-empty")
        audit = AuditLog()
        session = None
        with recording(audit):
            if self.mode == "hierarchical":
                session = self.high_level.search(question, SearchSession(question, audit=audit))
                docs, context = session.retrieved_docs(), session.final_context
            elif self.mode == "vanilla":
                found: list[DocumentChunk] = []
                for name in SEARCHER_ORDER:
                    if name in self.vanilla_retrievers:
                        found.extend(self.retrievers[name](question))
                docs = _dedupe(found)
                context = format_documents(docs)
            else:
                name = self.mode.removesuffix("_only")
                if name not in self.searchers:
                    raise ValueError(f"{name} searcher is not configured")
                docs = self.searchers[name](question)
                context = format_documents(docs)
            response = generate(self.gateway, question, context)
        return PipelineResult(question, response, docs, context, audit, session)


# ------------------------------------------------------------------------- wiring


def build_gateway(config: Config) -> LLMGateway:
    llm = config.llm
    if llm.backend == "scripted":
        if not llm.script_path:
            raise ValueError("scripted backend needs llm.script_path")
        backend = ScriptedBackend.from_json(config.resolve(llm.script_path))
    elif llm.backend == "remote":
        backend = RemoteChatBackend(llm.url, llm.model, api_key_env=llm.api_key_env, max_retries=llm.max_retries)
    else:
        raise ValueError(f"unknown llm backend {llm.backend!r}")
    max_tokens = {PromptKind(k): v for k, v in llm.max_tokens.items()}
    return LLMGateway(backend, temperature=llm.temperature, max_tokens=max_tokens)


def build_embedder(config: Config):
    dense = config.dense
    if dense.embedder == "hash":
        return HashEmbedder(dense.dim)
    if dense.embedder == "remote":
        return RemoteEmbedder(dense.url, dense.model, dense.dim, api_key_env=dense.api_key_env)
    raise ValueError(f"unknown embedder {dense.embedder!r}")


@dataclass
class Resources:
    store: CorpusStore
    sparse_index: SparseIndex | None = None
    dense_index: DenseIndex | None = None
    web: WebSearcher | None = None


def load_resources(config: Config, need: set[str]) -> Resources:
    """Load the snapshot and whichever indexes the ``need``-ed searchers use."""
    store = CorpusStore.load(config.resolve(config.corpus.store_path))
    res = Resources(store)
    if "sparse" in need:
        res.sparse_index = SparseIndex.load(config.resolve(config.sparse.index_path))
    if "dense" in need:
        res.dense_index = DenseIndex.load(config.resolve(config.dense.index_path), build_embedder(config))
    if "web" in need:
        res.web = WebSearcher(config.web.endpoint, api_key_env=config.web.api_key_env,
                              rate=config.web.rate, k=config.searchers.k)
    return res


def searchers_needed(config: Config, mode: str) -> set[str]:
    if mode == "hierarchical":
        return set(config.searchers.enabled)
    if mode == "vanilla":
        return set(config.searchers.vanilla_retrievers)
    return {mode.removesuffix("_only")}


def build_pipeline(config: Config, mode: str, resources: Resources, gateway: LLMGateway) -> Pipeline:
    s = config.searchers
    store = resources.store
    searchers: dict[str, Retriever] = {}
    retrievers: dict[str, Retriever] = {}

    if resources.sparse_index is not None:
        index = resources.sparse_index
        budget = RefinementBudget(s.sparse_max_depth, s.sparse_max_refinements, s.k)
        searchers["sparse"] = SparseSearcher(
            index, store, gateway, budget, rewrite=s.sparse_rewrite, feedback=s.sparse_feedback
        ).search
        retrievers["sparse"] = lambda q: [store.get(h.chunk_id) for h in index.search(bag_of_words_query(q), s.k)]
    if resources.dense_index is not None:
        dindex = resources.dense_index
        searchers["dense"] = DenseSearcher(dindex, store, gateway, max_rewrites=s.dense_max_rewrites, k=s.k).search
        retrievers["dense"] = lambda q: [store.get(h.chunk_id) for h in dindex.search(q, s.k)]
    if resources.web is not None:
        searchers["web"] = retrievers["web"] = resources.web.search

    high_level = None
    if mode == "hierarchical":
        h = config.high_level
        high_level = HighLevelSearcher(
            gateway,
            searchers,
            HighLevelConfig(
                max_iterations=h.max_iterations, decompose=h.decompose, summarize=h.summarize,
                supplement=h.supplement, context_doc_cap=h.context_doc_cap, enabled=tuple(s.enabled),
            ),
        )
    return Pipeline(mode, gateway, searchers, retrievers, high_level, tuple(s.vanilla_retrievers))
