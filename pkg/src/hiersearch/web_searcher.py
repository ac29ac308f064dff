"""Web searcher: forward the atomic query to a search API and return the result
abstracts as chunks. Results are neither rewritten nor verified."""

from __future__ import annotations

import logging
import os
import threading
import time
from typing import Callable
from urllib.parse import urlsplit

import httpx

from hiersearch.corpus import DocumentChunk
from hiersearch.errors import AuthError, BackendError, QuotaError, TransportError
from hiersearch.llm import trace

logger = logging.getLogger(__name__)


class RateLimiter:
    """Spaces calls at least ``1 / rate`` seconds apart."""

    def __init__(
        self,
        rate: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.interval = 1.0 / rate if rate > 0 else 0.0
        self.clock = clock
        self.sleep = sleep
        self._next = 0.0
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            now = self.clock()
            wait = self._next - now
            self._next = max(now, self._next) + self.interval
        if wait > 0:
            self.sleep(wait)


_limiters: dict[tuple[str, float], RateLimiter] = {}
_limiters_lock = threading.Lock()


def limiter_for(endpoint: str, rate: float) -> RateLimiter:
    key = (urlsplit(endpoint).netloc, rate)
    with _limiters_lock:
        if key not in _limiters:
            _limiters[key] = RateLimiter(rate)
        return _limiters[key]


class WebSearcher:
    """``GET {endpoint}?q=...&count=k`` with a subscription-key header; reads
    ``webPages.value[].{name,url,snippet}``."""

    def __init__(
        self,
        endpoint: str,
        *,
        api_key_env: str = "BING_SEARCH_KEY",
        key_header: str = "Ocp-Apim-Subscription-Key",
        rate: float = 3.0,
        k: int = 10,
        client: httpx.Client | None = None,
        limiter: RateLimiter | None = None,
        max_retries: int = 2,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 30.0,
    ) -> None:
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.key_header = key_header
        self.k = k
        self.client = client or httpx.Client(timeout=timeout)
        self.limiter = limiter or limiter_for(endpoint, rate)
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep

    def search(self, atomic_query: str, k: int | None = None) -> list[DocumentChunk]:
        k = self.k if k is None else k
        if not atomic_query.strip():
            raise ValueError("web search needs a non-empty query")
        if k < 1:
            raise ValueError("k must be positive")
        key = os.environ.get(self.api_key_env, "")
        headers = {self.key_header: key} if key else {}
        params = {"q": atomic_query, "count": k}

        status: int | None = None
        for attempt in range(self.max_retries + 1):
            self.limiter.acquire()
            try:
                resp = self.client.get(self.endpoint, params=params, headers=headers)
            except httpx.TransportError as exc:
                status = None
                logger.warning("web search request failed: %s", exc)
            else:
                status = resp.status_code
                if status == 200:
                    return self._to_chunks(resp.json(), k, atomic_query)
                if status == 401:
                    raise AuthError("web search rejected the subscription key")
                if status == 403:
                    if "quota" in resp.text.lower():
                        raise QuotaError("web search quota exhausted")
                    raise AuthError("web search access forbidden")
                if status != 429 and status < 500:
                    raise BackendError(f"web search returned HTTP {status}")
            if attempt < self.max_retries:
                self.sleep(self.backoff * 2**attempt)
        if status == 429:
            raise QuotaError("web search kept rate-limiting requests")
        raise TransportError("web search kept failing", attempts=self.max_retries + 1, status=status)

    def _to_chunks(self, payload: dict, k: int, query: str) -> list[DocumentChunk]:
        results = (payload.get("webPages") or {}).get("value") or []
        seen: set[str] = set()
        chunks = []
        for item in results:
            url, snippet = item.get("url"), (item.get("snippet") or "").strip()
            if not url or url in seen or not snippet:
                continue
            seen.add(url)
            chunks.append(DocumentChunk(id=url, title=item.get("name") or "", text=snippet, source="web"))
        chunks = chunks[:k]
        trace("web", query=query, hit_ids=[c.id for c in chunks])
        return chunks
