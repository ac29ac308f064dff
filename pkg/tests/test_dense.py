import json

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiersearch.corpus import DocumentChunk
from hiersearch.dense import DenseIndex, EmbeddingError, HashEmbedder, RemoteEmbedder, embed
from hiersearch.errors import TransportError
from oracles import cosine_brute_force

DOCS = [
    DocumentChunk("a", "", "the eiffel tower stands in paris"),
    DocumentChunk("b", "", "bananas grow in warm climates"),
    DocumentChunk("c", "", "paris is the capital of france"),
]


def test_hash_embedder_is_deterministic_and_unit_norm():
    e = HashEmbedder(64)
    v1, v2 = embed(e, "Paris France"), embed(HashEmbedder(64), "paris, france")
    assert np.array_equal(v1, v2)
    assert np.linalg.norm(v1) == pytest.approx(1.0)


def test_hash_embedder_rejects_empty_text():
    with pytest.raises(EmbeddingError):
        embed(HashEmbedder(), "   ")


def test_search_agrees_with_cosine_scan():
    e = HashEmbedder(128)
    index = DenseIndex.build(DOCS, e)
    raw = {d.id: [float(x) for x in e._vector(d.text)] for d in DOCS}
    query = "capital of france"
    want = cosine_brute_force([float(x) for x in e._vector(query)], raw)
    got = index.search(query, k=3)
    assert [h.chunk_id for h in got] == [d for d, _ in want]
    for h, (_, s) in zip(got, want):
        assert h.score == pytest.approx(s, abs=1e-12)


def test_identical_text_scores_one():
    index = DenseIndex.build(DOCS, HashEmbedder())
    top = index.search(DOCS[1].text, k=1)[0]
    assert top.chunk_id == "b" and top.score == pytest.approx(1.0)


def test_k_and_empty_index():
    e = HashEmbedder()
    assert DenseIndex.build([], e).search("x") == []
    with pytest.raises(ValueError):
        DenseIndex.build(DOCS, e).search("x", k=0)
    assert len(DenseIndex.build(DOCS, e).search("paris", k=2)) == 2


def test_embedder_mismatch_is_an_error(tmp_path):
    index = DenseIndex.build(DOCS, HashEmbedder(64))
    with pytest.raises(ValueError):
        index.search("paris", embedder=HashEmbedder(128))
    path = tmp_path / "d.npz"
    index.save(path)
    with pytest.raises(ValueError):
        DenseIndex.load(path, HashEmbedder(128))


def test_save_load_round_trip(tmp_path):
    e = HashEmbedder(64)
    index = DenseIndex.build(DOCS, e)
    path = tmp_path / "d.npz"
    index.save(path)
    loaded = DenseIndex.load(path, e)
    assert loaded.ids == index.ids
    assert loaded.search("paris tower") == index.search("paris tower")


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        DenseIndex.build([DOCS[0], DOCS[0]], HashEmbedder())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["paris", "tower", "banana", "france", "capital", "warm"]), min_size=1, max_size=6))
def test_ties_ordered_by_id_and_scores_descending(words):
    index = DenseIndex.build(DOCS + [DocumentChunk("0", "", DOCS[0].text)], HashEmbedder(32))
    hits = index.search(" ".join(words), k=4)
    keys = [(-h.score, h.chunk_id) for h in hits]
    assert all(a[0] <= b[0] + 1e-12 for a, b in zip(keys, keys[1:]))
    pos = {h.chunk_id: i for i, h in enumerate(hits)}
    if "0" in pos and "a" in pos:
        assert pos["0"] < pos["a"]


def _embedding_client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_remote_embedder_parses_and_normalizes():
    def handler(request):
        body = json.loads(request.content)
        assert body["model"] == "m"
        return httpx.Response(200, json={"data": [{"embedding": [3.0, 4.0]} for _ in body["input"]]})

    e = RemoteEmbedder("http://emb/v1/embeddings", "m", 2, client=_embedding_client(handler))
    np.testing.assert_allclose(e.embed_many(["x", "y"]), [[0.6, 0.8], [0.6, 0.8]])


def test_remote_embedder_retries_then_fails():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503)

    e = RemoteEmbedder("http://emb", "m", 2, client=_embedding_client(handler), max_retries=2, sleep=lambda s: None)
    with pytest.raises(TransportError) as err:
        e.embed_many(["x"])
    assert len(calls) == 3 and err.value.status == 503


def test_remote_embedder_wrong_dimension():
    def handler(request):
        return httpx.Response(200, json={"data": [{"embedding": [1.0, 0.0, 0.0]}]})

    e = RemoteEmbedder("http://emb", "m", 2, client=_embedding_client(handler))
    with pytest.raises(EmbeddingError):
        e.embed_many(["x"])
