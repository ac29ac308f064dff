"""Corpus ingestion and the chunk store shared by both indexes."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator

logger = logging.getLogger(__name__)


class CorpusFormatError(ValueError):
    """A corpus line could not be decoded into a record."""

    def __init__(self, path: str | Path, line_no: int, reason: str) -> None:
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no


@dataclass(frozen=True)
class DocumentChunk:
    id: str
    title: str
    text: str
    source: str = ""

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"chunk {self.id!r} has empty text")

    def to_dict(self) -> dict:
        return asdict(self)


def chunk_text(text: str, target_words: int) -> list[str]:
    """Split ``text`` into runs of ``target_words`` whitespace-delimited words.

    Every chunk but the last has exactly ``target_words`` words; words are never
    split and internal whitespace is collapsed to single spaces.
    """
    if target_words < 1:
        raise ValueError("target_words must be >= 1")
    words = text.split()
    return [" ".join(words[i : i + target_words]) for i in range(0, len(words), target_words)]


def chunk_ids_for(record_id: str, n_chunks: int) -> list[str]:
    # A record that fits in one chunk keeps its own id.
    if n_chunks == 1:
        return [record_id]
    return [f"{record_id}#{i}" for i in range(n_chunks)]


class CorpusStore:
    """In-memory id -> chunk map, persisted as a single JSONL snapshot.

    Single writer while building; read-only (and shareable) afterwards.
    """

    def __init__(self) -> None:
        self._chunks: dict[str, DocumentChunk] = {}
        self._by_record: dict[str, list[str]] = {}

    def __len__(self) -> int:
        return len(self._chunks)

    def __iter__(self) -> Iterator[DocumentChunk]:
        return iter(self._chunks.values())

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._chunks

    def get(self, chunk_id: str) -> DocumentChunk | None:
        return self._chunks.get(chunk_id)

    def add_record(
        self, record_id: str, title: str, text: str, *, source: str = "", chunk_words: int = 100
    ) -> int:
        """Chunk one record and store it, replacing any earlier version of the record."""
        pieces = chunk_text(text, chunk_words)
        for old in self._by_record.pop(record_id, []):
            self._chunks.pop(old, None)
        ids = chunk_ids_for(record_id, len(pieces))
        for cid, piece in zip(ids, pieces):
            self._chunks[cid] = DocumentChunk(id=cid, title=title, text=piece, source=source)
        self._by_record[record_id] = ids
        return len(ids)

    def ingest_jsonl(self, path: str | Path, chunk_words: int = 100) -> int:
        """Ingest ``{"id", "title", "text"}`` lines; returns the number of chunks stored.

        Fails fast on the first malformed line; the error names the line number.
        """
        if chunk_words < 1:
            raise ValueError("chunk_words must be >= 1")
        path = Path(path)
        records = []
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusFormatError(path, line_no, f"invalid JSON ({exc.msg})") from exc
                if not isinstance(obj, dict):
                    raise CorpusFormatError(path, line_no, "expected a JSON object")
                if "id" not in obj or "text" not in obj:
                    raise CorpusFormatError(path, line_no, "missing 'id' or 'text'")
                title = obj.get("title") or ""
                if not isinstance(obj["text"], str) or not isinstance(title, str):
                    raise CorpusFormatError(path, line_no, "'title' and 'text' must be strings")
                records.append((str(obj["id"]), title, obj["text"]))

        count = 0
        for rid, title, text in records:
            count += self.add_record(rid, title, text, source=path.name, chunk_words=chunk_words)
        logger.info("ingested %d records as %d chunks from %s", len(records), count, path)
        return count

    def add_chunks(self, chunks: Iterable[DocumentChunk]) -> None:
        """Insert pre-chunked documents verbatim (last write wins)."""
        for chunk in chunks:
            self._chunks[chunk.id] = chunk
            self._by_record.setdefault(chunk.id, [chunk.id])

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for chunk in self._chunks.values():
                fh.write(json.dumps(chunk.to_dict(), ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CorpusStore":
        store = cls()
        with Path(path).open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    chunk = DocumentChunk(
                        id=obj["id"], title=obj.get("title", ""), text=obj["text"],
                        source=obj.get("source", ""),
                    )
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise CorpusFormatError(path, line_no, str(exc)) from exc
                store.add_chunks([chunk])
        return store
