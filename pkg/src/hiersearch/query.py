"""A small Lucene-style query language: bare terms, quoted phrases, ``-`` exclusion
and ``^w`` boosts.

Grammar (clauses are separated by whitespace)::

    query   := clause (WS clause)*
    clause  := ["-"] (phrase | word) ["^" NUMBER]
    phrase  := '"' <any chars but '"'> '"'
    word    := <run of non-whitespace, no '"'>

Terms are run through :func:`hiersearch.text.analyze`, so ``Barack`` becomes
``barack`` and a bare word such as ``jean-paul`` becomes the two-token clause
``"jean paul"``. Bare words that analyze to nothing (``&``, ``--``) are dropped.
Exclusions cannot carry a boost.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from hiersearch.text import analyze


class QueryParseError(ValueError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class QueryClause:
    tokens: tuple[str, ...]
    boost: float = 1.0
    negated: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("clause needs at least one token")
        for tok in self.tokens:
            if analyze(tok) != [tok]:
                raise ValueError(f"token {tok!r} is not a normalized term")
        if not (self.boost > 0) or self.boost == float("inf"):
            raise ValueError(f"boost must be a positive finite number, got {self.boost}")
        if self.negated and self.boost != 1.0:
            raise ValueError("an exclusion clause cannot carry a boost")

    @property
    def is_phrase(self) -> bool:
        return len(self.tokens) > 1


@dataclass(frozen=True)
class SparseQuery:
    """Ordered clauses; positives always precede exclusions (stable within each group)."""

    clauses: tuple[QueryClause, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        clauses = tuple(self.clauses)
        pos = tuple(c for c in clauses if not c.negated)
        neg = tuple(c for c in clauses if c.negated)
        if not pos:
            raise ValueError("query needs at least one non-excluded clause")
        object.__setattr__(self, "clauses", pos + neg)

    @property
    def positives(self) -> tuple[QueryClause, ...]:
        return tuple(c for c in self.clauses if not c.negated)

    @property
    def negatives(self) -> tuple[QueryClause, ...]:
        return tuple(c for c in self.clauses if c.negated)

    def with_clause(self, clause: QueryClause) -> "SparseQuery":
        return SparseQuery(self.clauses + (clause,))

    def with_boost(self, index: int, boost: float) -> "SparseQuery":
        clauses = list(self.clauses)
        clauses[index] = replace(clauses[index], boost=boost)
        return SparseQuery(tuple(clauses))

    def __str__(self) -> str:
        return render_query(self)


def _format_boost(boost: float) -> str:
    if boost.is_integer() and abs(boost) < 1e15:
        return str(int(boost))
    return repr(boost)


def render_clause(clause: QueryClause) -> str:
    body = " ".join(clause.tokens)
    if clause.is_phrase:
        body = f'"{body}"'
    if clause.negated:
        return "-" + body
    if clause.boost != 1.0:
        body += "^" + _format_boost(clause.boost)
    return body


def render_query(q: SparseQuery) -> str:
    return " ".join(render_clause(c) for c in q.clauses)


def _parse_boost(raw: str, position: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise QueryParseError(f"invalid boost {raw!r}", position) from None
    if not (value > 0) or value == float("inf"):
        raise QueryParseError(f"boost must be positive and finite, got {raw!r}", position)
    return value


def parse_query(raw: str) -> SparseQuery:
    clauses: list[QueryClause] = []
    i, n = 0, len(raw)
    while i < n:
        if raw[i].isspace():
            i += 1
            continue
        start = i
        negated = False
        if raw[i] == "-" and i + 1 < n and not raw[i + 1].isspace():
            negated = True
            i += 1

        if raw[i] == '"':
            close = raw.find('"', i + 1)
            if close < 0:
                raise QueryParseError("unbalanced quote", i)
            body = raw[i + 1 : close]
            i = close + 1
            boost_raw = None
            if i < n and raw[i] == "^":
                j = i + 1
                while j < n and not raw[j].isspace():
                    j += 1
                boost_raw, boost_pos = raw[i + 1 : j], i
                i = j
            elif i < n and not raw[i].isspace():
                raise QueryParseError("expected whitespace after closing quote", i)
            tokens = analyze(body)
            if not tokens:
                raise QueryParseError("empty phrase", start)
        else:
            j = i
            while j < n and not raw[j].isspace():
                if raw[j] == '"':
                    raise QueryParseError("unexpected quote inside term", j)
                j += 1
            word = raw[i:j]
            boost_raw = None
            caret = word.rfind("^")
            if caret >= 0:
                boost_raw, boost_pos = word[caret + 1 :], i + caret
                word = word[:caret]
            i = j
            tokens = analyze(word)
            if not tokens:
                if boost_raw is not None or negated:
                    raise QueryParseError("clause has no searchable term", start)
                continue

        boost = 1.0
        if boost_raw is not None:
            boost = _parse_boost(boost_raw, boost_pos)
            if negated:
                raise QueryParseError("an exclusion cannot carry a boost", boost_pos)
        clauses.append(QueryClause(tuple(tokens), boost=boost, negated=negated))

    if not clauses:
        raise QueryParseError("empty query", 0)
    if all(c.negated for c in clauses):
        raise QueryParseError("query has only exclusions", 0)
    return SparseQuery(tuple(clauses))
