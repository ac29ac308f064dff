from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from hiersearch.corpus import CorpusStore, DocumentChunk
from hiersearch.llm import LLMGateway, PromptKind, ScriptedBackend, ScriptedRule

FIXTURES = Path(__file__).parent / "fixtures"

APPLE_DOCS = [
    DocumentChunk("d1", "", "apple pie"),
    DocumentChunk("d2", "", "apple apple tart"),
    DocumentChunk("d3", "", "banana"),
]


def scripted(*rules: tuple[str, str, str], **fallbacks: str) -> LLMGateway:
    """Gateway over a ScriptedBackend built from (kind, contains, output) triples."""
    backend = ScriptedBackend(
        rules=tuple(ScriptedRule(PromptKind(k), c, o) for k, c, o in rules),
        fallbacks={PromptKind(k): v for k, v in fallbacks.items()},
    )
    return LLMGateway(backend)


@pytest.fixture
def apple_store() -> CorpusStore:
    store = CorpusStore()
    store.add_chunks(APPLE_DOCS)
    return store


@pytest.fixture
def multihop_store() -> CorpusStore:
    store = CorpusStore()
    store.ingest_jsonl(FIXTURES / "multihop_corpus.jsonl")
    return store


@pytest.fixture
def workdir(tmp_path: Path) -> Path:
    """A scratch copy of the fixture directory so build outputs land in tmp."""
    dest = tmp_path / "fixtures"
    shutil.copytree(FIXTURES, dest)
    return dest


# ----------------------------------------------------------- acceptance summary

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _ACCEPTANCE[number] = (title, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}")
