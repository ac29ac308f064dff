import json

import pytest

from hiersearch.cli import main

QUESTION = "Where was the director of Jaws born?"


@pytest.fixture
def built(workdir):
    assert main(["--config", str(workdir / "multihop_config.json"), "ingest",
                 str(workdir / "multihop_corpus.jsonl")]) == 0
    return workdir


def _cfg(d):
    return ["--config", str(d / "multihop_config.json")]


def test_ingest_prints_chunk_count(workdir, capsys):
    assert main(_cfg(workdir) + ["ingest", str(workdir / "tiny_corpus.jsonl")]) == 0
    assert capsys.readouterr().out.strip() == "3 chunks"
    assert (workdir / "build" / "store.jsonl").exists()
    assert (workdir / "build" / "sparse_index.json").exists()


def test_ingest_builds_dense_index_when_enabled(workdir):
    cfg = json.loads((workdir / "multihop_config.json").read_text())
    cfg["searchers"]["enabled"] = ["sparse", "dense"]
    path = workdir / "dense.json"
    path.write_text(json.dumps(cfg))
    assert main(["--config", str(path), "ingest", str(workdir / "tiny_corpus.jsonl")]) == 0
    assert (workdir / "build" / "dense_index.npz").exists()


def test_ingest_missing_file(workdir, capsys):
    assert main(_cfg(workdir) + ["ingest", str(workdir / "nope.jsonl")]) == 2


def test_ingest_bad_line_reports_line_number(workdir, capsys):
    bad = workdir / "bad.jsonl"
    bad.write_text('{"id": "a", "text": "fine"}\n{oops\n')
    assert main(_cfg(workdir) + ["ingest", str(bad)]) == 2
    assert "bad.jsonl:2" in capsys.readouterr().err


def test_ask_hierarchical_prints_answer(built, capsys):
    trace = built / "trace.json"
    assert main(_cfg(built) + ["ask", QUESTION, "--trace", str(trace)]) == 0
    assert capsys.readouterr().out.strip() == "Cincinnati"
    session = json.loads(trace.read_text())
    assert [aq["text"] for it in session["iterations"] for aq in it["atomic_queries"]] == [
        "Who directed the film Jaws?", "Where was Steven Spielberg born?"]
    assert any(r["type"] == "llm" for r in session["audit"])


def test_ask_vanilla_trace(built, capsys):
    trace = built / "trace.json"
    assert main(_cfg(built) + ["ask", QUESTION, "--mode", "vanilla", "--trace", str(trace)]) == 0
    assert json.loads(trace.read_text())["mode"] == "vanilla"


def test_ask_usage_errors(built, capsys):
    assert main(_cfg(built) + ["ask", QUESTION, "--mode", "telepathy"]) == 2
    assert main(_cfg(built) + ["ask", "   "]) == 2
    assert main([]) == 2


def test_ask_unreachable_backend(built, capsys):
    cfg = json.loads((built / "multihop_config.json").read_text())
    cfg["llm"] = {"backend": "remote", "url": "http://127.0.0.1:9/v1", "max_retries": 0}
    path = built / "remote.json"
    path.write_text(json.dumps(cfg))
    assert main(["--config", str(path), "ask", QUESTION]) == 3
    assert "backend error" in capsys.readouterr().err


def test_eval_writes_report(built, capsys):
    out = built / "reports" / "eval.json"
    assert main(_cfg(built) + ["eval", str(built / "multihop_dataset.jsonl"), "--out", str(out), "--first", "2"]) == 0
    summary = json.loads(out.read_text())
    assert summary["n"] == 2
    assert len(out.with_suffix(".rows.jsonl").read_text().splitlines()) == 2
    assert "n=2 failed=0" in capsys.readouterr().out


def test_eval_invalid_dataset(built, capsys):
    bad = built / "bad.jsonl"
    bad.write_text('{"id": "1", "question": "q"}\n')
    assert main(_cfg(built) + ["eval", str(bad), "--out", str(built / "r.json")]) == 2


def test_unknown_config_key(workdir, capsys):
    path = workdir / "bad_cfg.json"
    path.write_text('{"sparse": {"k3": 1}}')
    assert main(["--config", str(path), "ingest", str(workdir / "tiny_corpus.jsonl")]) == 2
