"""Embedded BM25 inverted index with positional postings.

Scoring for a document ``d`` and query ``q``::

    score(d) = sum over positive clauses c of  boost(c) * idf(c) * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl))

where ``tf`` is the (phrase) frequency of ``c`` in the body plus ``title_weight``
times its frequency in the title, ``dl`` is the body length plus ``title_weight``
times the title length, and ``idf = ln(1 + (N - df + 0.5)/(df + 0.5))``. A phrase
counts only where its tokens appear contiguously and in order within one field.
Documents matching any excluded clause are dropped, as are documents with a zero
score.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from hiersearch.corpus import DocumentChunk
from hiersearch.query import QueryClause, SparseQuery
from hiersearch.text import analyze

FORMAT_TAG = "hiersearch.sparse-index/1"


@dataclass(frozen=True, order=True)
class ScoredHit:
    chunk_id: str
    score: float


def rank_hits(scores: dict[str, float], k: int) -> list[ScoredHit]:
    """Sort by score descending, then chunk id ascending, and cut to ``k``."""
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [ScoredHit(cid, s) for cid, s in ordered[:k]]


# postings: term -> {doc_idx: (body positions, title positions)}
_Postings = dict[str, dict[int, tuple[list[int], list[int]]]]


class SparseIndex:
    def __init__(self, k1: float = 1.2, b: float = 0.75, title_weight: float = 2.0) -> None:
        if k1 < 0 or not (0.0 <= b <= 1.0) or title_weight < 0:
            raise ValueError("need k1 >= 0, 0 <= b <= 1, title_weight >= 0")
        self.k1 = k1
        self.b = b
        self.title_weight = title_weight
        self.doc_ids: list[str] = []
        self._docs: list[tuple[list[str], list[str]]] = []  # (title tokens, body tokens)
        self._lengths: list[float] = []
        self._postings: _Postings = {}
        self._seen: set[str] = set()
        self.avgdl = 0.0

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    @classmethod
    def build(
        cls,
        chunks: Iterable[DocumentChunk],
        k1: float = 1.2,
        b: float = 0.75,
        title_weight: float = 2.0,
    ) -> "SparseIndex":
        index = cls(k1=k1, b=b, title_weight=title_weight)
        for chunk in chunks:
            index._add(chunk.id, analyze(chunk.title), analyze(chunk.text))
        index._finish()
        return index

    def _add(self, doc_id: str, title: list[str], body: list[str]) -> None:
        if doc_id in self._seen:
            raise ValueError(f"duplicate chunk id {doc_id!r}")
        self._seen.add(doc_id)
        idx = len(self.doc_ids)
        self.doc_ids.append(doc_id)
        self._docs.append((title, body))
        self._lengths.append(len(body) + self.title_weight * len(title))
        for field_no, tokens in ((0, body), (1, title)):
            for pos, tok in enumerate(tokens):
                entry = self._postings.setdefault(tok, {}).setdefault(idx, ([], []))
                entry[field_no].append(pos)

    def _finish(self) -> None:
        self.avgdl = sum(self._lengths) / len(self._lengths) if self._lengths else 0.0

    def document_frequency(self, tokens: tuple[str, ...] | list[str]) -> int:
        return len(self._matches(tuple(tokens)))

    def _matches(self, tokens: tuple[str, ...]) -> dict[int, float]:
        """doc_idx -> weighted (phrase) frequency for every doc containing ``tokens``."""
        lists = [self._postings.get(t) for t in tokens]
        if any(p is None for p in lists):
            return {}
        first = lists[0]
        candidates = set(first)
        for p in lists[1:]:
            candidates &= p.keys()
        out: dict[int, float] = {}
        for idx in candidates:
            counts = []
            for field_no in (0, 1):
                starts = first[idx][field_no]
                if len(tokens) > 1:
                    rest = [set(p[idx][field_no]) for p in lists[1:]]
                    starts = [s for s in starts if all(s + off + 1 in r for off, r in enumerate(rest))]
                counts.append(len(starts))
            tf = counts[0] + self.title_weight * counts[1]
            if tf > 0:
                out[idx] = tf
        return out

    def idf(self, df: int) -> float:
        n = self.n_docs
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def _clause_scores(self, clause: QueryClause) -> dict[int, float]:
        matches = self._matches(clause.tokens)
        if not matches:
            return {}
        idf = self.idf(len(matches))
        k1, b, avgdl = self.k1, self.b, self.avgdl
        out = {}
        for idx, tf in matches.items():
            norm = k1 * (1.0 - b + b * self._lengths[idx] / avgdl)
            out[idx] = clause.boost * (idf * tf * (k1 + 1.0) / (tf + norm))
        return out

    def search(self, q: SparseQuery, k: int = 10) -> list[ScoredHit]:
        if k <= 0:
            raise ValueError("k must be positive")
        if self.n_docs == 0:
            return []
        excluded: set[int] = set()
        for clause in q.negatives:
            excluded.update(self._matches(clause.tokens))
        totals: dict[int, float] = {}
        for clause in q.positives:
            for idx, s in self._clause_scores(clause).items():
                if idx not in excluded:
                    totals[idx] = totals.get(idx, 0.0) + s
        return rank_hits({self.doc_ids[i]: s for i, s in totals.items() if s > 0}, k)

    def save(self, path: str | Path) -> None:
        payload = {
            "format": FORMAT_TAG,
            "params": {"k1": self.k1, "b": self.b, "title_weight": self.title_weight},
            "docs": [
                {"id": cid, "title": title, "body": body}
                for cid, (title, body) in zip(self.doc_ids, self._docs)
            ],
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SparseIndex":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != FORMAT_TAG:
            raise ValueError(f"unsupported sparse index format {payload.get('format')!r}")
        index = cls(**payload["params"])
        for doc in payload["docs"]:
            index._add(doc["id"], doc["title"], doc["body"])
        index._finish()
        return index
