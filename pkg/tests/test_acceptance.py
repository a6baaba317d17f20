"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints one PASS/FAIL line (outside pytest's capture) before
asserting, so the summary survives in plain test logs.
"""

import json

import pytest

from eflab import acceptance
from eflab.cli import EXIT_OK, main


def report_line(capsys, result):
    with capsys.disabled():
        print(f"\n{result.line()}  [{result.tolerance}]")


def detail(result) -> str:
    return json.dumps(result.details, default=str)[:2000]


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(number, capsys):
    fn = acceptance.CRITERIA[number - 1]
    result = acceptance.run_criterion(fn)
    report_line(capsys, result)
    assert result.number == number
    assert result.passed, detail(result)


def test_criterion_1_runtime_and_error(capsys):
    r = acceptance.criterion_1()
    assert r.details["max_rel_error"] <= 1e-6
    assert r.details["runtime_s_below_1"]


def test_criterion_2_discrepancy_is_flagged_not_asserted():
    r = acceptance.criterion_2()
    mix = next(f for f in r.details["functions"] if f["label"].startswith("t + exp"))
    assert mix["xi_hat"] == float("inf")
    assert r.details["notes"]


def test_criterion_7_counts():
    r = acceptance.criterion_7()
    assert r.details["total_ics"] >= 25
    assert all(f["confident_s1"] == 0 for f in r.details["families"])


def test_criterion_11_plumbing_and_corpus_exit(capsys, tmp_path):
    result = acceptance.criterion_11()
    out = tmp_path / "corpus.json"
    code = main(["corpus", "--out", str(out)])
    report = json.loads(out.read_text())
    all_pass = code == EXIT_OK and all(r["passed"] for r in report["results"]) \
        and len(report["results"]) == 11
    result.passed = result.passed and all_pass
    result.details["corpus_exit_code"] = code
    report_line(capsys, result)
    assert result.passed, detail(result)
