"""Shared text analysis: the one tokenizer used by the sparse index, the query
language and the hash embedder."""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[^\W_]+")

# Used only to build fallback bag-of-words queries; the index itself keeps every token.
STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been
    before being below between both but by can could did do does doing down during
    each few for from further had has have having he her here hers herself him
    himself his how i if in into is it its itself just me more most my myself no
    nor not now of off on once only or other our ours ourselves out over own same
    she should so some such than that the their theirs them themselves then there
    these they this those through to too under until up very was we were what
    when where which while who whom why will with would you your yours yourself
    yourselves
    """.split()
)


def analyze(text: str) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit."""
    return _TOKEN_RE.findall(text.lower())


def content_words(text: str) -> list[str]:
    """Analyzed tokens minus stopwords, order preserved, duplicates dropped.

    Falls back to all tokens when the text consists only of stopwords.
    """
    tokens = analyze(text)
    seen: list[str] = []
    for tok in tokens:
        if tok not in STOPWORDS and tok not in seen:
            seen.append(tok)
    if not seen:
        for tok in tokens:
            if tok not in seen:
                seen.append(tok)
    return seen
