import json
from dataclasses import dataclass, field

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiersearch.corpus import DocumentChunk
from hiersearch.evaluation import (
    DatasetError,
    EvalRecord,
    accuracy,
    evaluate,
    exact_match,
    load_dataset,
    normalize,
    retrieval_success,
    token_f1,
)
from oracles import squad_normalize


def _docs(*texts):
    return [DocumentChunk(f"d{i}", "", t) for i, t in enumerate(texts)]


@pytest.mark.parametrize(
    "raw, norm",
    [("The Eiffel Tower!", "eiffel tower"), ("PARIS", "paris"), ("", ""), ("  a  cat,  an owl ", "cat owl")],
)
def test_normalize(raw, norm):
    assert normalize(raw) == norm == squad_normalize(raw)


def test_lower_only_mode():
    assert normalize("The  Eiffel Tower!", "lower_only") == "the eiffel tower!"
    with pytest.raises(ValueError):
        normalize("x", "stem")


@settings(max_examples=300)
@given(st.text(max_size=40))
def test_normalize_matches_oracle(s):
    assert normalize(s) == squad_normalize(s)


def test_retrieval_success_examples():
    assert retrieval_success(_docs("The capital is Paris today."), ["Paris"])
    assert not retrieval_success([], ["Paris"])
    assert retrieval_success(_docs("visit new york city hall"), ["New York City"])
    assert not retrieval_success(_docs("Parisian cafés"), ["Paris"])


@settings(max_examples=100)
@given(st.lists(st.sampled_from(["paris", "the capital", "rome", "x"]), min_size=1, max_size=4),
       st.sampled_from(["paris", "rome"]))
def test_retrieval_success_monotone_in_docs(texts, gold):
    docs = _docs(*texts)
    for i in range(1, len(docs)):
        if retrieval_success(docs[:i], [gold]):
            assert retrieval_success(docs[: i + 1], [gold])


def test_accuracy_examples():
    assert accuracy("it was steven spielberg", ["Steven Spielberg"])
    assert not accuracy("unknown", ["Steven Spielberg"])
    assert accuracy("Steven Spielberg", ["Steven Spielberg"])


def test_exact_match_examples():
    assert exact_match("The Paris", ["Paris"])
    assert squad_normalize("The Paris") == squad_normalize("Paris")
    assert not exact_match("Paris, France", ["Paris"])
    assert exact_match("Cincinnati", ["Cincinnati"])
    assert exact_match("nyc", ["New York City", "NYC"])


def test_token_f1_examples():
    assert token_f1("obama", ["barack obama"]) == pytest.approx(2 / 3, abs=1e-12)
    assert token_f1("barack obama", ["barack obama"]) == 1.0
    assert token_f1("paris", ["rome"]) == 0.0
    assert token_f1("the", ["a"]) == 1.0
    assert token_f1("the", ["paris"]) == 0.0
    assert token_f1("paris paris", ["paris", "paris rome"]) == pytest.approx(2 / 3)


SMALL = st.text(alphabet=st.sampled_from("ab ,.T"), max_size=8)


@settings(max_examples=1000)
@given(SMALL, SMALL)
def test_metric_implication_chain(pred, gold):
    if exact_match(pred, [gold]):
        assert accuracy(pred, [gold])
    if accuracy(pred, [gold]):
        assert token_f1(pred, [gold]) > 0


@dataclass
class Result:
    response: str
    docs: list = field(default_factory=list)


def test_dataset_loading(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"id": 1, "question": "q1", "golden_answers": ["a"]}\n\n'
                    '{"id": "2", "question": "q2", "golden_answers": ["b", "c"]}\n')
    records = load_dataset(path)
    assert records == [EvalRecord("1", "q1", ("a",)), EvalRecord("2", "q2", ("b", "c"))]
    assert load_dataset(path, first=1) == records[:1]


@pytest.mark.parametrize("line", ['{"id": 1, "question": "q"}', '{"id": 1, "question": "q", "golden_answers": []}',
                                  '{"id": 1, "question": "q", "golden_answers": "a"}', "not json"])
def test_dataset_errors(tmp_path, line):
    path = tmp_path / "d.jsonl"
    path.write_text(line + "\n")
    with pytest.raises(DatasetError):
        load_dataset(path)


def test_two_record_means():
    records = [EvalRecord("a", "qa", ("paris",)), EvalRecord("b", "qb", ("rome",))]
    answers = {"qa": Result("paris", _docs("paris")), "qb": Result("london", _docs("berlin"))}
    report = evaluate(records, answers.__getitem__)
    assert (report.succ, report.acc, report.em, report.f1) == (50.0, 50.0, 50.0, 50.0)


def test_failures_are_counted_not_averaged():
    records = [EvalRecord("a", "qa", ("paris",)), EvalRecord("b", "boom", ("x",))]

    def pipeline(q):
        if q == "boom":
            raise RuntimeError("backend down")
        return Result("paris", _docs("paris"))

    report = evaluate(records, pipeline)
    assert report.n == 1 and report.failed == 1 and report.em == 100.0
    assert [r["failed"] for r in report.rows] == [False, True]


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        evaluate([], lambda q: Result(""))


def test_order_preserved_under_parallelism():
    records = [EvalRecord(str(i), f"q{i}", ("x",)) for i in range(20)]
    rep1 = evaluate(records, lambda q: Result(q), parallelism=1)
    rep4 = evaluate(records, lambda q: Result(q), parallelism=4)
    assert [r["id"] for r in rep4.rows] == [str(i) for i in range(20)]
    assert rep1.rows == rep4.rows


def test_report_files(tmp_path):
    records = [EvalRecord("a", "qa", ("paris",))]
    report = evaluate(records, lambda q: Result("Paris", _docs("Paris")))
    summary_path, rows_path = report.write(tmp_path / "out" / "report.json")
    summary = json.loads(summary_path.read_text())
    assert summary == {"metrics": {"succ": 100.0, "acc": 100.0, "em": 100.0, "f1": 100.0}, "n": 1, "failed": 0}
    row = json.loads(rows_path.read_text())
    assert set(row) == {"id", "succ", "acc", "em", "f1", "response", "doc_ids", "failed"}
