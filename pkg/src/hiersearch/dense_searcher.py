"""Dense searcher: retrieve with the raw atomic query first, then, while the
results are judged insufficient, write a pseudo-document grounded in the latest
results and retrieve again with ``query [SEP] pseudo-document``."""

from __future__ import annotations

import hashlib
import logging

from hiersearch.corpus import CorpusStore, DocumentChunk
from hiersearch.dense import DenseIndex
from hiersearch.llm import LLMGateway, PromptKind, format_documents, parse_structured, trace

logger = logging.getLogger(__name__)

SEPARATOR = " [SEP] "


class DenseSearcher:
    def __init__(
        self,
        index: DenseIndex,
        store: CorpusStore,
        gateway: LLMGateway,
        *,
        max_rewrites: int = 3,
        k: int = 10,
    ) -> None:
        if max_rewrites < 0 or k < 1:
            raise ValueError("need max_rewrites >= 0 and k >= 1")
        self.index = index
        self.store = store
        self.gateway = gateway
        self.max_rewrites = max_rewrites
        self.k = k

    def generate_pseudo_document(self, atomic_query: str, feedback_docs: list[DocumentChunk]) -> str:
        slots = {"query": atomic_query}
        if feedback_docs:
            slots["documents"] = format_documents(feedback_docs)
        text = parse_structured(PromptKind.PSEUDO_DOC, self.gateway.ask(PromptKind.PSEUDO_DOC, **slots))
        return text or atomic_query

    def verify(self, docs: list[DocumentChunk], atomic_query: str) -> bool:
        if not docs:
            return False
        return self.gateway.verify(atomic_query, format_documents(docs))

    def _retrieve(self, text: str) -> list[DocumentChunk]:
        return [self.store.get(h.chunk_id) for h in self.index.search(text, self.k)]

    def search(self, atomic_query: str) -> list[DocumentChunk]:
        docs = self._retrieve(atomic_query)
        verdict = self.verify(docs, atomic_query)
        trace("dense", round=0, pseudo_doc_hash=None, hit_ids=[d.id for d in docs], verdict=verdict)
        for round_no in range(1, self.max_rewrites + 1):
            if verdict:
                break
            pseudo = self.generate_pseudo_document(atomic_query, docs)
            docs = self._retrieve(atomic_query + SEPARATOR + pseudo)
            verdict = self.verify(docs, atomic_query)
            trace("dense", round=round_no,
                  pseudo_doc_hash=hashlib.sha1(pseudo.encode("utf-8")).hexdigest()[:12],
                  hit_ids=[d.id for d in docs], verdict=verdict)
        return docs
