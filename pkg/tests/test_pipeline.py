import dataclasses
import json

import httpx
import pytest

from hiersearch.config import Config
from hiersearch.corpus import CorpusStore
from hiersearch.dense import DenseIndex
from hiersearch.llm import PromptKind
from hiersearch.pipeline import (
    EMPTY_CONTEXT,
    Pipeline,
    Resources,
    build_embedder,
    build_gateway,
    build_pipeline,
    searchers_needed,
)
from hiersearch.sparse_index import SparseIndex
from hiersearch.web_searcher import RateLimiter, WebSearcher

from conftest import FIXTURES, scripted


@pytest.fixture
def config():
    return Config.load(FIXTURES / "multihop_config.json")


@pytest.fixture
def resources(multihop_store, config):
    return Resources(multihop_store, SparseIndex.build(multihop_store),
                     DenseIndex.build(multihop_store, build_embedder(config)))


def test_config_defaults_and_paths(config):
    assert config.sparse.k1 == 1.2 and config.sparse.b == 0.75
    assert config.searchers.sparse_max_refinements == 27
    assert config.resolve("build/x") == FIXTURES.resolve() / "build" / "x"
    assert Config.from_dict(config.to_dict()).to_dict() == config.to_dict()


@pytest.mark.parametrize("data", [{"nope": {}}, {"llm": {"colour": "red"}}])
def test_config_rejects_unknown_names(data):
    with pytest.raises(ValueError):
        Config.from_dict(data)


def test_searchers_needed(config):
    assert searchers_needed(config, "hierarchical") == {"sparse"}
    assert searchers_needed(config, "vanilla") == {"sparse"}
    assert searchers_needed(config, "dense_only") == {"dense"}


def test_gateway_backend_choice(config):
    with pytest.raises(ValueError):
        build_gateway(dataclasses.replace(config, llm=dataclasses.replace(config.llm, backend="carrier pigeon")))
    with pytest.raises(ValueError):
        build_gateway(dataclasses.replace(config, llm=dataclasses.replace(config.llm, script_path="")))


def test_single_searcher_modes(config, resources):
    for mode in ("sparse_only", "dense_only"):
        result = build_pipeline(config, mode, resources, build_gateway(config)).answer("Who produced Jaws?")
        assert result.docs and result.session is None
        assert result.generator_prompt()[1]["content"].startswith("Contexts:\n[1] ")


def test_web_only_mode(config, multihop_store):
    page = {"webPages": {"value": [{"name": "Jaws", "url": "https://w/jaws", "snippet": "Jaws (1975)."}]}}
    client = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(200, json=page)))
    web = WebSearcher("https://w/search", client=client, limiter=RateLimiter(0))
    pipe = build_pipeline(config, "web_only", Resources(multihop_store, web=web), build_gateway(config))
    assert [d.id for d in pipe.answer("Jaws?").docs] == ["https://w/jaws"]


def test_missing_searcher_is_an_error(config, multihop_store):
    pipe = build_pipeline(config, "dense_only", Resources(multihop_store), build_gateway(config))
    with pytest.raises(ValueError):
        pipe.answer("q")


def test_empty_context_placeholder():
    pipe = Pipeline("sparse_only", scripted(generate="x"), searchers={"sparse": lambda q: []})
    result = pipe.answer("q")
    assert EMPTY_CONTEXT in result.generator_prompt()[1]["content"]


def test_mode_validation():
    with pytest.raises(ValueError):
        Pipeline("psychic", scripted())
    with pytest.raises(ValueError):
        Pipeline("hierarchical", scripted())


def test_hierarchical_session_shares_audit(config, resources):
    result = build_pipeline(config, "hierarchical", resources, build_gateway(config)).answer(
        "Where was the director of Jaws born?")
    assert result.session.audit is result.audit
    kinds = [c["kind"] for c in result.audit.llm_calls()]
    assert kinds[0] == PromptKind.DECOMPOSE.value and kinds[-1] == PromptKind.GENERATE.value
    json.loads(result.session.to_json())
