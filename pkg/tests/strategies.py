"""Hypothesis strategies shared by the property tests."""

from __future__ import annotations

from hypothesis import strategies as st

from hiersearch.query import QueryClause, SparseQuery

VOCAB = ["apple", "pie", "tart", "banana", "eiffel", "tower", "paris", "x1", "42", "café", "naïve", "obama"]

words = st.sampled_from(VOCAB)
boosts = st.one_of(
    st.just(1.0),
    st.sampled_from([0.5, 2.0, 3.0, 4.0, 0.25, 10.0]),
    st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False),
)


@st.composite
def clauses(draw, negated: bool | None = None):
    neg = draw(st.booleans()) if negated is None else negated
    toks = tuple(draw(st.lists(words, min_size=1, max_size=3)))
    boost = 1.0 if neg else draw(boosts)
    return QueryClause(toks, boost=boost, negated=neg)


@st.composite
def sparse_queries(draw, max_clauses: int = 5):
    pos = draw(st.lists(clauses(negated=False), min_size=1, max_size=max_clauses))
    neg = draw(st.lists(clauses(negated=True), max_size=2))
    mixed = draw(st.permutations(pos + neg))
    return SparseQuery(tuple(mixed))


@st.composite
def corpora(draw, max_docs: int = 20, max_words: int = 30):
    n = draw(st.integers(min_value=1, max_value=max_docs))
    docs = []
    for i in range(n):
        body = draw(st.lists(words, min_size=1, max_size=max_words))
        title = draw(st.lists(words, max_size=3))
        docs.append((f"d{i:02d}", " ".join(title), " ".join(body)))
    return docs
