"""Hierarchical retrieval-augmented generation.

A high-level searcher decomposes a question into atomic queries, low-level
sparse / dense / web searchers fetch evidence for each, and the high-level
searcher summarizes, verifies and supplements until the generator can answer.
"""

from hiersearch.corpus import CorpusStore, DocumentChunk, chunk_text
from hiersearch.dense import DenseIndex, HashEmbedder, RemoteEmbedder
from hiersearch.high_level import AtomicQuery, HighLevelSearcher, SearchSession, Summary
from hiersearch.llm import LLMGateway, PromptKind, RemoteChatBackend, ScriptedBackend
from hiersearch.query import QueryClause, SparseQuery, parse_query, render_query
from hiersearch.sparse_index import SparseIndex

__all__ = [
    "AtomicQuery",
    "CorpusStore",
    "DenseIndex",
    "DocumentChunk",
    "HashEmbedder",
    "HighLevelSearcher",
    "LLMGateway",
    "PromptKind",
    "QueryClause",
    "RemoteChatBackend",
    "RemoteEmbedder",
    "ScriptedBackend",
    "SearchSession",
    "SparseIndex",
    "SparseQuery",
    "Summary",
    "chunk_text",
    "parse_query",
    "render_query",
]

__version__ = "0.1.0"
