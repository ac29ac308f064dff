"""QA metrics (retrieval success, accuracy, exact match, token F1) and the batch
evaluation harness."""

from __future__ import annotations

import json
import logging
import re
import string
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

logger = logging.getLogger(__name__)

NORMALIZATIONS = ("squad", "lower_only")
_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = str.maketrans("", "", string.punctuation)


def normalize(text: str, mode: str = "squad") -> str:
    """Lowercase; in ``squad`` mode also drop punctuation and the articles a/an/the.
    Whitespace is always collapsed."""
    text = text.lower()
    if mode == "squad":
        text = text.translate(_PUNCT)
        text = _ARTICLES.sub(" ", text)
    elif mode != "lower_only":
        raise ValueError(f"unknown normalization {mode!r}")
    return " ".join(text.split())


def _contains(haystack: str, needle: str) -> bool:
    # Token-boundary containment on normalized strings. An empty gold only
    # matches an empty response.
    if not needle:
        return not haystack
    return f" {needle} " in f" {haystack} "


def retrieval_success(docs: Sequence[Any], golds: Sequence[str], mode: str = "squad") -> bool:
    if not docs:
        return False
    text = normalize(" ".join(d.text for d in docs), mode)
    return any(_contains(text, normalize(g, mode)) for g in golds)


def accuracy(response: str, golds: Sequence[str], mode: str = "squad") -> bool:
    pred = normalize(response, mode)
    return any(_contains(pred, normalize(g, mode)) for g in golds)


def exact_match(response: str, golds: Sequence[str], mode: str = "squad") -> bool:
    pred = normalize(response, mode)
    return any(pred == normalize(g, mode) for g in golds)


def _f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def token_f1(response: str, golds: Sequence[str], mode: str = "squad") -> float:
    pred = normalize(response, mode).split()
    return max((_f1(pred, normalize(g, mode).split()) for g in golds), default=0.0)


# --------------------------------------------------------------------------- data


@dataclass(frozen=True)
class EvalRecord:
    id: str
    question: str
    golden_answers: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "golden_answers", tuple(self.golden_answers))
        if not self.golden_answers:
            raise ValueError(f"record {self.id!r} has no golden answers")


class DatasetError(ValueError):
    pass


def load_dataset(path: str | Path, first: int | None = None) -> list[EvalRecord]:
    """Read ``{"id", "question", "golden_answers": [...]}`` lines, optionally only the first N."""
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if first is not None and len(records) >= first:
                break
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                answers = obj["golden_answers"]
                if isinstance(answers, str) or not isinstance(answers, list):
                    raise TypeError("golden_answers must be a list of strings")
                records.append(EvalRecord(str(obj["id"]), obj["question"], tuple(str(a) for a in answers)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{line_no}: {exc}") from exc
    return records


# ------------------------------------------------------------------------- report

METRICS = ("succ", "acc", "em", "f1")


@dataclass
class MetricsReport:
    succ: float
    acc: float
    em: float
    f1: float
    n: int
    failed: int = 0
    rows: list[dict[str, Any]] = field(default_factory=list)

    def summary(self) -> dict[str, Any]:
        return {
            "metrics": {m: getattr(self, m) for m in METRICS},
            "n": self.n,
            "failed": self.failed,
        }

    def write(self, out_path: str | Path) -> tuple[Path, Path]:
        """Summary JSON at ``out_path`` and per-record rows next to it as ``*.rows.jsonl``."""
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        rows_path = out_path.with_suffix(".rows.jsonl")
        out_path.write_text(json.dumps(self.summary(), indent=2) + "\n", encoding="utf-8")
        with rows_path.open("w", encoding="utf-8") as fh:
            for row in self.rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        return out_path, rows_path


def score_record(record: EvalRecord, response: str, docs: Sequence[Any], mode: str = "squad") -> dict[str, Any]:
    golds = record.golden_answers
    return {
        "id": record.id,
        "succ": float(retrieval_success(docs, golds, mode)),
        "acc": float(accuracy(response, golds, mode)),
        "em": float(exact_match(response, golds, mode)),
        "f1": token_f1(response, golds, mode),
        "response": response,
        "doc_ids": [d.id for d in docs],
        "failed": False,
    }


def evaluate(
    dataset: Iterable[EvalRecord],
    pipeline: Callable[[str], Any],
    parallelism: int = 1,
    normalization: str = "squad",
) -> MetricsReport:
    """Run ``pipeline(question)`` for every record; the result must expose
    ``.response`` and ``.docs`` (raw retrieved chunks, before summarization)."""
    records = list(dataset)
    if not records:
        raise ValueError("dataset is empty")
    if parallelism < 1:
        raise ValueError("parallelism must be positive")
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalization!r}")

    def run(record: EvalRecord) -> dict[str, Any]:
        try:
            result = pipeline(record.question)
        except Exception as exc:
            logger.warning("record %s failed: %s", record.id, exc)
            return {"id": record.id, "succ": 0.0, "acc": 0.0, "em": 0.0, "f1": 0.0,
                    "response": "", "doc_ids": [], "failed": True, "error": repr(exc)}
        return score_record(record, result.response, result.docs, normalization)

    if parallelism == 1:
        rows = [run(r) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(run, records))

    ok = [r for r in rows if not r["failed"]]
    n = len(ok)
    means = {m: (100.0 * sum(r[m] for r in ok) / n if n else 0.0) for m in METRICS}
    return MetricsReport(**means, n=n, failed=len(rows) - n, rows=rows)
