"""Dense retrieval: text embedders and an exact top-k cosine index."""

from __future__ import annotations

import hashlib
import logging
import os
import time
from typing import Callable, Iterable, Protocol, Sequence

import httpx
import numpy as np

from hiersearch.corpus import DocumentChunk
from hiersearch.errors import TransportError
from hiersearch.sparse_index import ScoredHit
from hiersearch.text import analyze

logger = logging.getLogger(__name__)

FORMAT_TAG = "hiersearch.dense-index/1"


class EmbeddingError(ValueError):
    pass


class Embedder(Protocol):
    name: str
    dim: int

    def embed_many(self, texts: Sequence[str]) -> np.ndarray: ...


def _normalize_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise EmbeddingError("cannot normalize a zero vector")
    return mat / norms


def embed(embedder: Embedder, text: str) -> np.ndarray:
    """Embed one text into an L2-normalized vector."""
    return embedder.embed_many([text])[0]


class HashEmbedder:
    """Signed feature hashing over analyzed tokens.

    Each token lands in one of ``dim`` buckets and contributes +1 or -1, with
    bucket and sign taken from two independent slices of a BLAKE2b digest.
    """

    def __init__(self, dim: int = 256) -> None:
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.name = f"hash-{dim}"

    def _vector(self, text: str) -> np.ndarray:
        if not text.strip():
            raise EmbeddingError("cannot embed empty text")
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in analyze(text):
            digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=16).digest()
            bucket = int.from_bytes(digest[:8], "little") % self.dim
            sign = 1.0 if digest[8] & 1 else -1.0
            vec[bucket] += sign
        return vec

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return _normalize_rows(np.stack([self._vector(t) for t in texts]))


class RemoteEmbedder:
    """Client for an embeddings endpoint: POST ``{"model", "input": [...]}`` and
    read ``data[i].embedding``. Retries 429/5xx and connection errors."""

    def __init__(
        self,
        url: str,
        model: str,
        dim: int,
        *,
        api_key_env: str | None = "EMBEDDING_API_KEY",
        client: httpx.Client | None = None,
        max_retries: int = 4,
        backoff: float = 0.5,
        timeout: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.url = url
        self.model = model
        self.dim = dim
        self.name = f"remote:{model}"
        self.api_key_env = api_key_env
        self.client = client or httpx.Client(timeout=timeout)
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env) if self.api_key_env else None
        return {"Authorization": f"Bearer {key}"} if key else {}

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        if any(not t.strip() for t in texts):
            raise EmbeddingError("cannot embed empty text")
        if not texts:
            return np.zeros((0, self.dim))
        body = {"model": self.model, "input": list(texts)}
        last_status: int | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self.client.post(self.url, json=body, headers=self._headers())
            except httpx.TransportError as exc:
                last_status = None
                logger.warning("embedding request failed (%s), attempt %d", exc, attempt + 1)
            else:
                if resp.status_code == 200:
                    data = resp.json()["data"]
                    mat = np.asarray([row["embedding"] for row in data], dtype=np.float64)
                    if mat.shape != (len(texts), self.dim):
                        raise EmbeddingError(f"expected shape {(len(texts), self.dim)}, got {mat.shape}")
                    return _normalize_rows(mat)
                last_status = resp.status_code
                if resp.status_code != 429 and resp.status_code < 500:
                    raise TransportError(
                        f"embedding endpoint returned HTTP {resp.status_code}",
                        attempts=attempt + 1, status=resp.status_code,
                    )
            if attempt < self.max_retries:
                self.sleep(self.backoff * 2**attempt)
        raise TransportError(
            "embedding endpoint kept failing", attempts=self.max_retries + 1, status=last_status
        )


class DenseIndex:
    """Flat matrix of normalized vectors, rows kept in ascending chunk-id order so a
    stable argsort on the scores breaks ties by id."""

    def __init__(self, embedder: Embedder, ids: list[str], vectors: np.ndarray) -> None:
        self.embedder = embedder
        self.embedder_name = embedder.name
        self.dim = embedder.dim
        self.ids = ids
        self.vectors = vectors

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def build(cls, chunks: Iterable[DocumentChunk], embedder: Embedder, batch_size: int = 64) -> "DenseIndex":
        chunks = sorted(chunks, key=lambda c: c.id)
        ids = [c.id for c in chunks]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValueError(f"duplicate chunk id {dup!r}")
        rows = []
        for start in range(0, len(chunks), batch_size):
            batch = chunks[start : start + batch_size]
            rows.append(embedder.embed_many([c.text for c in batch]))
        vectors = np.concatenate(rows) if rows else np.zeros((0, embedder.dim))
        return cls(embedder, ids, vectors)

    def search(self, query_text: str, k: int = 10, embedder: Embedder | None = None) -> list[ScoredHit]:
        if k <= 0:
            raise ValueError("k must be positive")
        if embedder is not None and (embedder.name, embedder.dim) != (self.embedder_name, self.dim):
            raise ValueError(
                f"index built with {self.embedder_name}/{self.dim}, query embedder is {embedder.name}/{embedder.dim}"
            )
        if not self.ids:
            return []
        qvec = embed(embedder or self.embedder, query_text)
        scores = self.vectors @ qvec
        order = np.argsort(-scores, kind="stable")[:k]
        return [ScoredHit(self.ids[i], float(np.clip(scores[i], -1.0, 1.0))) for i in order]

    def save(self, path) -> None:
        np.savez(
            path, ids=np.asarray(self.ids, dtype=str), vectors=self.vectors,
            meta=np.asarray([FORMAT_TAG, self.embedder_name, str(self.dim)]),
        )

    @classmethod
    def load(cls, path, embedder: Embedder) -> "DenseIndex":
        with np.load(path) as data:
            tag, name, dim = (str(x) for x in data["meta"])
            if tag != FORMAT_TAG:
                raise ValueError(f"unsupported dense index format {tag!r}")
            if (name, int(dim)) != (embedder.name, embedder.dim):
                raise ValueError(f"index built with {name}/{dim}, got embedder {embedder.name}/{embedder.dim}")
            return cls(embedder, [str(i) for i in data["ids"]], data["vectors"])
