"""High-level searcher: plans atomic queries and condenses their evidence.

Iteration 0 decomposes the user question into atomic queries, retrieves
documents for each with every enabled low-level searcher and summarizes each
query's documents by answering it. While the summaries are judged insufficient,
new atomic queries are supplemented and only those are processed in the next
iteration.
"""

from __future__ import annotations

import enum
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

from hiersearch.corpus import DocumentChunk
from hiersearch.errors import BackendError
from hiersearch.llm import AuditLog, LLMGateway, PromptKind, format_documents, parse_structured, trace

logger = logging.getLogger(__name__)

SEARCHER_ORDER = ("sparse", "dense", "web")
NO_EVIDENCE = "No evidence found."

Searcher = Callable[[str], list[DocumentChunk]]


class Origin(str, enum.Enum):
    DECOMPOSED = "decomposed"
    SUPPLEMENTED = "supplemented"


@dataclass(frozen=True)
class AtomicQuery:
    text: str
    origin: Origin = Origin.DECOMPOSED
    iteration: int = 0

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("atomic query text must be non-empty")
        if (self.iteration == 0) != (self.origin is Origin.DECOMPOSED):
            raise ValueError("only iteration 0 holds decomposed queries")


@dataclass(frozen=True)
class Summary:
    atomic_query: AtomicQuery
    answer_text: str
    supporting_doc_ids: tuple[str, ...] = ()

    @property
    def is_sentinel(self) -> bool:
        return self.answer_text == NO_EVIDENCE


@dataclass
class Iteration:
    atomic_queries: list[AtomicQuery]
    docs: dict[str, list[DocumentChunk]] = field(default_factory=dict)
    summaries: list[Summary] = field(default_factory=list)
    elapsed_s: float = 0.0


@dataclass
class SearchSession:
    user_query: str
    iterations: list[Iteration] = field(default_factory=list)
    final_context: str = ""
    verified: bool | None = None
    audit: AuditLog = field(default_factory=AuditLog)

    @property
    def atomic_queries(self) -> list[AtomicQuery]:
        return [aq for it in self.iterations for aq in it.atomic_queries]

    @property
    def summaries(self) -> list[Summary]:
        return [s for it in self.iterations for s in it.summaries]

    def retrieved_docs(self) -> list[DocumentChunk]:
        """All raw documents retrieved in the session, first occurrence order."""
        seen: dict[str, DocumentChunk] = {}
        for it in self.iterations:
            for aq in it.atomic_queries:
                for d in it.docs.get(aq.text, []):
                    seen.setdefault(d.id, d)
        return list(seen.values())

    def to_dict(self) -> dict:
        return {
            "user_query": self.user_query,
            "verified": self.verified,
            "final_context": self.final_context,
            "iterations": [
                {
                    "atomic_queries": [
                        {"text": aq.text, "origin": aq.origin.value, "iteration": aq.iteration}
                        for aq in it.atomic_queries
                    ],
                    "doc_ids": {q: [d.id for d in docs] for q, docs in it.docs.items()},
                    "summaries": [
                        {"atomic_query": s.atomic_query.text, "answer": s.answer_text,
                         "supporting_doc_ids": list(s.supporting_doc_ids)}
                        for s in it.summaries
                    ],
                    "elapsed_s": round(it.elapsed_s, 4),
                }
                for it in self.iterations
            ],
            "audit": self.audit.records,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, **kwargs)


@dataclass(frozen=True)
class HighLevelConfig:
    max_iterations: int = 3
    decompose: bool = True
    summarize: bool = True
    supplement: bool = True
    context_doc_cap: int = 10
    enabled: tuple[str, ...] = ("sparse", "dense")

    def __post_init__(self) -> None:
        if self.max_iterations < 1 or self.context_doc_cap < 1:
            raise ValueError("max_iterations and context_doc_cap must be positive")
        unknown = set(self.enabled) - set(SEARCHER_ORDER)
        if unknown or not self.enabled:
            raise ValueError(f"enabled searchers must be a non-empty subset of {SEARCHER_ORDER}")


class RetrievalFailure(BackendError):
    """Every enabled low-level searcher failed for an atomic query."""


def _numbered_summaries(summaries: list[Summary]) -> str:
    return "\n".join(
        f"{i}. Q: {s.atomic_query.text}\n   A: {s.answer_text}" for i, s in enumerate(summaries, start=1)
    )


class HighLevelSearcher:
    def __init__(
        self,
        gateway: LLMGateway,
        searchers: Mapping[str, Searcher],
        config: HighLevelConfig | None = None,
    ) -> None:
        self.gateway = gateway
        self.searchers = dict(searchers)
        self.config = config or HighLevelConfig()
        missing = [name for name in self.config.enabled if name not in self.searchers]
        if missing:
            raise ValueError(f"enabled searchers without an implementation: {missing}")

    # -- actions ----------------------------------------------------------------

    def decompose(self, user_query: str) -> list[AtomicQuery]:
        raw = self.gateway.ask(PromptKind.DECOMPOSE, question=user_query)
        texts = parse_structured(PromptKind.DECOMPOSE, raw) or [user_query]
        return [AtomicQuery(t) for t in dict.fromkeys(texts)]

    def retrieve_for(self, aq: AtomicQuery, enabled: tuple[str, ...] | None = None) -> list[DocumentChunk]:
        enabled = enabled or self.config.enabled
        if not enabled:
            raise ValueError("at least one searcher must be enabled")
        docs: dict[str, DocumentChunk] = {}
        failures = 0
        names = [n for n in SEARCHER_ORDER if n in enabled]
        for name in names:
            try:
                found = self.searchers[name](aq.text)
            except Exception as exc:  # one searcher failing must not sink the others
                failures += 1
                logger.warning("%s searcher failed for %r: %s", name, aq.text, exc)
                trace("searcher_error", searcher=name, query=aq.text, error=repr(exc))
                continue
            for d in found:
                docs.setdefault(d.id, d)
        if failures == len(names):
            raise RetrievalFailure(f"all searchers failed for {aq.text!r}")
        return list(docs.values())

    def summarize(self, aq: AtomicQuery, docs: list[DocumentChunk]) -> Summary:
        if not docs:
            return Summary(aq, NO_EVIDENCE, ())
        shown = docs[: self.config.context_doc_cap]
        raw = self.gateway.ask(PromptKind.SUMMARIZE, query=aq.text, documents=format_documents(shown))
        answer = parse_structured(PromptKind.SUMMARIZE, raw) or NO_EVIDENCE
        return Summary(aq, answer, tuple(d.id for d in shown))

    def verify_global(self, user_query: str, summaries: list[Summary]) -> bool:
        if not summaries:
            raise ValueError("nothing to verify")
        if all(s.is_sentinel for s in summaries):
            return False
        return self.gateway.verify(user_query, _numbered_summaries(summaries))

    def supplement(self, user_query: str, summaries: list[Summary], prior: list[AtomicQuery], iteration: int) -> list[AtomicQuery]:
        raw = self.gateway.ask(PromptKind.SUPPLEMENT, question=user_query, summaries=_numbered_summaries(summaries))
        known = {aq.text.strip().lower() for aq in prior}
        out = []
        for text in parse_structured(PromptKind.SUPPLEMENT, raw):
            key = text.strip().lower()
            if key in known:
                continue
            known.add(key)
            out.append(AtomicQuery(text, Origin.SUPPLEMENTED, iteration))
        return out

    # -- orchestration ------------------------------------------------------------

    def _run_iteration(self, queries: list[AtomicQuery]) -> Iteration:
        start = time.perf_counter()
        it = Iteration(queries)
        for aq in queries:
            docs = self.retrieve_for(aq)
            it.docs[aq.text] = docs
            if self.config.summarize:
                it.summaries.append(self.summarize(aq, docs))
        it.elapsed_s = time.perf_counter() - start
        return it

    def _raw_evidence(self, session: SearchSession) -> list[Summary]:
        # Without summarization the verifier and supplementer see the raw documents,
        # one pseudo-summary per atomic query.
        out = []
        for it in session.iterations:
            for aq in it.atomic_queries:
                docs = it.docs.get(aq.text, [])
                text = format_documents(docs[: self.config.context_doc_cap]) if docs else NO_EVIDENCE
                out.append(Summary(aq, text, tuple(d.id for d in docs)))
        return out

    def _evidence(self, session: SearchSession) -> list[Summary]:
        return session.summaries if self.config.summarize else self._raw_evidence(session)

    def search(self, user_query: str, session: SearchSession | None = None) -> SearchSession:
        if not user_query.strip():
            raise ValueError("user query must be non-empty")
        cfg = self.config
        session = session or SearchSession(user_query)

        queries = self.decompose(user_query) if cfg.decompose else [AtomicQuery(user_query)]
        session.iterations.append(self._run_iteration(queries))

        if cfg.supplement:
            session.verified = self.verify_global(user_query, self._evidence(session))
            while not session.verified and len(session.iterations) < cfg.max_iterations:
                new = self.supplement(
                    user_query, self._evidence(session), session.atomic_queries, len(session.iterations)
                )
                if not new:
                    break
                session.iterations.append(self._run_iteration(new))
                session.verified = self.verify_global(user_query, self._evidence(session))

        if cfg.summarize:
            session.final_context = "\n\n".join(
                f"Q: {s.atomic_query.text}\nA: {s.answer_text}" for s in session.summaries
            )
        else:
            session.final_context = format_documents(session.retrieved_docs())
        return session
