"""Every language-model call goes through :class:`LLMGateway`.

The gateway renders prompts from a fixed template registry, dispatches them to a
backend (a chat-completions HTTP endpoint or a scripted table used as a test
oracle), and appends each prompt/response pair to the audit log active in the
current context.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Protocol, Sequence

import httpx

from hiersearch.errors import AuthError, BackendError, TransportError

logger = logging.getLogger(__name__)


class PromptKind(str, enum.Enum):
    DECOMPOSE = "decompose"
    SUPPLEMENT = "supplement"
    SPARSE_REWRITE = "sparse_rewrite"
    SUMMARIZE = "summarize"
    VERIFY = "verify"
    GENERATE = "generate"
    PSEUDO_DOC = "pseudo_doc"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role != "assistant" and not self.content:
            raise ValueError(f"{self.role} message must have content")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


# --------------------------------------------------------------------------- audit


class AuditLog:
    """Append-only list of event dicts; safe to append from several threads."""

    def __init__(self) -> None:
        self.records: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def append(self, record: dict[str, Any]) -> None:
        with self._lock:
            self.records.append(record)

    def of_type(self, type_: str) -> list[dict[str, Any]]:
        return [r for r in self.records if r["type"] == type_]

    def llm_calls(self, kind: PromptKind | None = None) -> list[dict[str, Any]]:
        calls = self.of_type("llm")
        if kind is not None:
            calls = [c for c in calls if c["kind"] == kind.value]
        return calls


_current_audit: contextvars.ContextVar[AuditLog | None] = contextvars.ContextVar(
    "hiersearch_audit", default=None
)


@contextlib.contextmanager
def recording(audit: AuditLog) -> Iterator[AuditLog]:
    """Route LLM calls and searcher traces made inside the block to ``audit``."""
    token = _current_audit.set(audit)
    try:
        yield audit
    finally:
        _current_audit.reset(token)


def current_audit() -> AuditLog | None:
    return _current_audit.get()


def trace(type_: str, **fields: Any) -> None:
    audit = _current_audit.get()
    if audit is not None:
        audit.append({"type": type_, **fields})


# ----------------------------------------------------------------------- templates

_LIST_FORMAT = 'Output format: one query per line, numbered "1.", "2.", and so on. Output nothing else.'

_DECOMPOSE_SYSTEM = f"""\
Break the question into the atomic queries needed to answer it. An atomic query \
asks for a single fact and makes sense on its own to a search engine. If the \
question already asks for a single fact, return it unchanged.
{_LIST_FORMAT}

Example
Question: Which film came out first, Blind Shaft or The Mask Of Fu Manchu?
1. When did the film Blind Shaft come out?
2. When did the film The Mask Of Fu Manchu come out?

Example
Question: Who is the mother of the director of the film Polish-Russian War?
1. Who directed the film Polish-Russian War?

Example
Question: What is the capital of Australia?
1. What is the capital of Australia?"""

_SUPPLEMENT_SYSTEM = f"""\
You are given a question and the answers found so far for some atomic queries. \
List the further atomic queries still needed to answer the question. Use the \
facts already found, e.g. write the person's name instead of "the director". \
Never repeat a query that was already answered. If nothing is missing, output "none".
{_LIST_FORMAT}

Example
Question: Who is the mother of the director of the film Polish-Russian War?
Known:
1. Q: Who directed the film Polish-Russian War?
   A: The film was directed by Xawery Żuławski.
1. Who is the mother of Xawery Żuławski?"""

_SPARSE_OPERATIONS = {
    "rewrite": """\
Rewrite the query into keywords for a BM25 search engine that accepts a subset \
of Lucene syntax: wrap multi-word names in double quotes, put - in front of a \
term to exclude it, and append ^N to a term to multiply its weight by N. Output \
only the keyword query, on one line.

Example
Query: In which year was the Eiffel Tower built?
"eiffel tower" built year

Example
Query: Who wrote the novel Jaws?
"jaws" novel author

Example
Query: What is the population of Paris, the city in France?
paris^2 france population -texas""",
    "extend": """\
The search results did not answer the query. Propose one additional keyword or \
short phrase that should be added to the search query to find the missing \
information. Output only the keyword or phrase.

Example
Query: In which year was the Eiffel Tower built?
Search query: "eiffel tower"
construction date""",
    "emphasize": """\
The search results did not answer the query. Choose the one keyword of the \
current search query that matters most and should get more weight. Output only \
that keyword, exactly as it appears in the search query.

Example
Query: In which year was the Eiffel Tower built?
Search query: eiffel tower year
tower""",
    "filter": """\
The search results did not answer the query because irrelevant documents crowd \
them out. Propose one word that appears in the irrelevant documents but not in \
the relevant ones, so it can be excluded. Output only that word.

Example
Query: How fast can a jaguar run?
Search query: jaguar speed
car""",
}

_SUMMARIZE_SYSTEM = """\
Answer the query using only the documents provided. Reply with one or two \
sentences that state the answer together with the key facts supporting it. If \
the documents do not contain the answer, reply "The documents do not answer this query."."""

_VERIFY_SYSTEM = """\
Decide whether the contexts contain enough information to answer the question. \
The first word of your reply must be "yes" or "no"; a short reason may follow."""

_GENERATE_SYSTEM = """\
Answer the question using the contexts. Reply with the answer only, as a short \
phrase of a few words, without explanation."""

_PSEUDO_DOC_SYSTEM = """\
Write a short encyclopedia-style passage (about 100 words) that answers the \
query. If reference documents are given, reuse their facts and fill in what is \
still missing. Output only the passage."""


class MissingSlotError(ValueError):
    def __init__(self, kind: PromptKind, slot: str) -> None:
        super().__init__(f"{kind.value} prompt is missing required slot {slot!r}")
        self.slot = slot


@dataclass(frozen=True)
class PromptTemplate:
    kind: PromptKind
    required: tuple[str, ...]
    # (slot, label) in display order; optional slots are skipped when absent.
    layout: tuple[tuple[str, str], ...]
    system: str | dict[str, str]
    selector: str | None = None  # slot choosing among system variants

    def render(self, slots: dict[str, str]) -> list[ChatMessage]:
        for name in self.required:
            if not slots.get(name):
                raise MissingSlotError(self.kind, name)
        if isinstance(self.system, dict):
            variant = slots.get(self.selector or "", "")
            if variant not in self.system:
                raise ValueError(f"{self.kind.value} prompt has no variant {variant!r}")
            system = self.system[variant]
        else:
            system = self.system
        parts = []
        for name, label in self.layout:
            value = slots.get(name)
            if value is None:
                continue
            sep = "\n" if "\n" in value else " "
            parts.append(f"{label}:{sep}{value}")
        return [ChatMessage("system", system), ChatMessage("user", "\n\n".join(parts))]


TEMPLATES: dict[PromptKind, PromptTemplate] = {
    PromptKind.DECOMPOSE: PromptTemplate(
        PromptKind.DECOMPOSE, ("question",), (("question", "Question"),), _DECOMPOSE_SYSTEM
    ),
    PromptKind.SUPPLEMENT: PromptTemplate(
        PromptKind.SUPPLEMENT,
        ("question", "summaries"),
        (("question", "Question"), ("summaries", "Known")),
        _SUPPLEMENT_SYSTEM,
    ),
    PromptKind.SPARSE_REWRITE: PromptTemplate(
        PromptKind.SPARSE_REWRITE,
        ("query",),
        (
            ("operation", "Operation"),
            ("query", "Query"),
            ("current_query", "Search query"),
            ("documents", "Search results"),
        ),
        _SPARSE_OPERATIONS,
        selector="operation",
    ),
    PromptKind.SUMMARIZE: PromptTemplate(
        PromptKind.SUMMARIZE,
        ("query", "documents"),
        (("query", "Query"), ("documents", "Documents")),
        _SUMMARIZE_SYSTEM,
    ),
    PromptKind.VERIFY: PromptTemplate(
        PromptKind.VERIFY,
        ("question", "contexts"),
        (("question", "Question"), ("contexts", "Contexts")),
        _VERIFY_SYSTEM,
    ),
    PromptKind.GENERATE: PromptTemplate(
        PromptKind.GENERATE,
        ("question", "contexts"),
        (("contexts", "Contexts"), ("question", "Question")),
        _GENERATE_SYSTEM,
    ),
    PromptKind.PSEUDO_DOC: PromptTemplate(
        PromptKind.PSEUDO_DOC,
        ("query",),
        (("query", "Query"), ("documents", "Reference documents")),
        _PSEUDO_DOC_SYSTEM,
    ),
}


def render_prompt(kind: PromptKind, slots: dict[str, str]) -> list[ChatMessage]:
    slots = dict(slots)
    if kind is PromptKind.SPARSE_REWRITE:
        slots.setdefault("operation", "rewrite")
    return TEMPLATES[kind].render(slots)


def format_documents(docs: Sequence[Any]) -> str:
    """Numbered ``[i] title`` / text blocks; the one context layout used everywhere."""
    blocks = []
    for i, doc in enumerate(docs, start=1):
        head = f"[{i}] {doc.title}".rstrip()
        blocks.append(f"{head}\n{doc.text}")
    return "\n\n".join(blocks)


# ------------------------------------------------------------------------ parsing

_ITEM_RE = re.compile(r"^\s*(?:\d+\s*[.):]|[-*•])\s*")
_NONE_RE = re.compile(r"^(none|n/?a|nothing|no (?:further|additional|more) quer(?:y|ies).*)$", re.I)
_VERDICT_RE = re.compile(r"^[\s\"'*`#>:\-]*(yes|no)\b", re.I)


class VerdictParseError(ValueError):
    pass


def _parse_list(raw: str) -> list[str]:
    lines = [ln.strip() for ln in raw.splitlines() if ln.strip()]
    numbered = [ln for ln in lines if _ITEM_RE.match(ln)]
    # Prefer the numbered items; otherwise salvage every non-empty line.
    items = numbered or lines
    out = []
    for ln in items:
        text = _ITEM_RE.sub("", ln, count=1).strip()
        if text and not _NONE_RE.match(text.rstrip(".")):
            out.append(text)
    return out


def parse_structured(kind: PromptKind, raw: str) -> Any:
    if kind in (PromptKind.DECOMPOSE, PromptKind.SUPPLEMENT):
        return _parse_list(raw)
    if kind is PromptKind.VERIFY:
        m = _VERDICT_RE.match(raw)
        if not m:
            raise VerdictParseError(f"no yes/no verdict in {raw[:80]!r}")
        return m.group(1).lower() == "yes"
    if kind is PromptKind.SPARSE_REWRITE:
        lines = [ln.strip() for ln in raw.splitlines() if ln.strip()]
        return lines[0] if lines else ""
    return raw.strip()


# ----------------------------------------------------------------------- backends


class ChatBackend(Protocol):
    def complete(
        self, kind: PromptKind, messages: Sequence[ChatMessage], temperature: float, max_tokens: int
    ) -> str: ...


class RemoteChatBackend:
    """Chat-completions client: ``POST {base_url}/chat/completions``.

    HTTP 429, 5xx and connection failures are retried with exponential backoff;
    other 4xx statuses fail immediately.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        api_key_env: str | None = "OPENAI_API_KEY",
        client: httpx.Client | None = None,
        max_retries: int = 4,
        backoff: float = 1.0,
        max_backoff: float = 30.0,
        timeout: float = 120.0,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.api_key_env = api_key_env
        self.client = client or httpx.Client(timeout=timeout)
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.sleep = sleep

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env) if self.api_key_env else None
        return {"Authorization": f"Bearer {key}"} if key else {}

    def complete(
        self, kind: PromptKind, messages: Sequence[ChatMessage], temperature: float, max_tokens: int
    ) -> str:
        body = {
            "model": self.model,
            "messages": [m.to_dict() for m in messages],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        status: int | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self.client.post(self.url, json=body, headers=self._headers())
            except httpx.TransportError as exc:
                status = None
                logger.warning("chat request failed: %s (attempt %d)", exc, attempt + 1)
            else:
                status = resp.status_code
                if status == 200:
                    content = resp.json()["choices"][0]["message"].get("content")
                    return content or ""
                if status in (401, 403):
                    raise AuthError(f"chat endpoint rejected credentials (HTTP {status})")
                if status != 429 and status < 500:
                    raise BackendError(f"chat endpoint returned HTTP {status}: {resp.text[:200]}")
                logger.warning("chat endpoint returned HTTP %d (attempt %d)", status, attempt + 1)
            if attempt < self.max_retries:
                self.sleep(min(self.backoff * 2**attempt, self.max_backoff))
        raise TransportError("chat endpoint kept failing", attempts=self.max_retries + 1, status=status)


class ScriptMissError(BackendError):
    """The scripted backend has no rule and no fallback for a prompt."""


@dataclass(frozen=True)
class ScriptedRule:
    kind: PromptKind
    contains: str
    output: str


@dataclass(frozen=True)
class ScriptedBackend:
    """Deterministic canned responses.

    A rule fires when its kind matches and ``contains`` occurs (case-sensitively)
    in the non-system messages; the first such rule wins. A rule with an empty
    ``contains`` matches every prompt of its kind. ``fallbacks`` apply after all
    rules have been tried.
    """

    rules: tuple[ScriptedRule, ...] = ()
    fallbacks: dict[PromptKind, str] = field(default_factory=dict)

    def complete(
        self, kind: PromptKind, messages: Sequence[ChatMessage], temperature: float, max_tokens: int
    ) -> str:
        text = "\n".join(m.content for m in messages if m.role != "system")
        for rule in self.rules:
            if rule.kind is kind and rule.contains in text:
                return rule.output
        if kind in self.fallbacks:
            return self.fallbacks[kind]
        raise ScriptMissError(f"no scripted response for {kind.value} prompt: {text[:120]!r}")

    @classmethod
    def from_records(cls, records: Sequence[dict[str, str]]) -> "ScriptedBackend":
        rules = []
        for rec in records:
            rules.append(ScriptedRule(PromptKind(rec["kind"]), rec.get("contains") or "", rec["output"]))
        return cls(rules=tuple(rules))

    @classmethod
    def from_json(cls, path: str | Path) -> "ScriptedBackend":
        return cls.from_records(json.loads(Path(path).read_text(encoding="utf-8")))


# ------------------------------------------------------------------------ gateway

DEFAULT_MAX_TOKENS: dict[PromptKind, int] = {
    PromptKind.DECOMPOSE: 256,
    PromptKind.SUPPLEMENT: 256,
    PromptKind.SPARSE_REWRITE: 256,
    PromptKind.VERIFY: 256,
    PromptKind.SUMMARIZE: 512,
    PromptKind.GENERATE: 1024,
    PromptKind.PSEUDO_DOC: 256,
}


class LLMGateway:
    def __init__(
        self,
        backend: ChatBackend,
        *,
        temperature: float = 0.0,
        max_tokens: dict[PromptKind, int] | None = None,
    ) -> None:
        self.backend = backend
        self.temperature = temperature
        self.max_tokens = {**DEFAULT_MAX_TOKENS, **(max_tokens or {})}

    def chat(
        self,
        kind: PromptKind,
        messages: Sequence[ChatMessage],
        *,
        temperature: float | None = None,
        max_tokens: int | None = None,
    ) -> str:
        if not messages:
            raise ValueError("messages must not be empty")
        temperature = self.temperature if temperature is None else temperature
        max_tokens = max_tokens or self.max_tokens[kind]
        response = self.backend.complete(kind, messages, temperature, max_tokens)
        trace(
            "llm",
            kind=kind.value,
            messages=[m.to_dict() for m in messages],
            response=response,
        )
        return response

    def ask(self, kind: PromptKind, **slots: str) -> str:
        return self.chat(kind, render_prompt(kind, slots))

    def verify(self, question: str, contexts: str) -> bool:
        """Run the Verify prompt; an unparseable verdict counts as insufficient."""
        raw = self.ask(PromptKind.VERIFY, question=question, contexts=contexts)
        try:
            return parse_structured(PromptKind.VERIFY, raw)
        except VerdictParseError:
            logger.info("unparseable verdict %r treated as 'no'", raw[:80])
            return False
