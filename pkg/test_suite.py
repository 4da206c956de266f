import json
import os

import pytest

from src.config.settings import Settings
from src.oracle import suite
from src.oracle.oracle import OracleConfig
from src.oracle.suite import ALL_CHECKS, SuiteContext, check_6_two_course_model, run_suite, \
    submit_for_pair_bindings
from src.reporting.normal_form_sizes import normal_form_sizes, run_normal_form_sizes


def test_suite_is_healthy(tmp_path, capsys):
    report = run_suite(count=8, seed=42, report_dir=str(tmp_path), settings=Settings())
    assert report["summary"]["total_checks"] == len(ALL_CHECKS) == 7
    failing = [r["check_name"] for r in report["check_results"] if r["status"] != "PASS"]
    assert failing == []
    assert report["summary"]["overall_status"] == "HEALTHY"
    assert report["reproducers"] == []
    assert "🟢 HEALTHY" in capsys.readouterr().out


@pytest.mark.slow
def test_full_suite(tmp_path):
    report = run_suite(count=200, seed=42, report_dir=str(tmp_path), settings=Settings())
    results = {r["check_id"]: r for r in report["check_results"]}
    assert results[1]["cases_checked"] == 200
    assert results[2]["cases_checked"] + results[2]["cases_skipped"] == 200
    assert results[4]["cases_checked"] == suite.EQUIVALENCE_CASES == 50
    assert results[5]["cases_checked"] + results[5]["cases_skipped"] == suite.SKOLEM_CASES == 50
    assert report["summary"]["total_violations"] == 0
    assert report["summary"]["overall_status"] == "HEALTHY"


def test_suite_report_file(tmp_path, monkeypatch):
    monkeypatch.setattr(suite, "EQUIVALENCE_CASES", 2)
    monkeypatch.setattr(suite, "SKOLEM_CASES", 2)
    run_suite(count=4, seed=7, report_dir=str(tmp_path), settings=Settings())
    with open(os.path.join(tmp_path, "oracle_suite_report.json"), encoding="utf-8") as f:
        saved = json.load(f)
    assert set(saved) == {"report_timestamp", "summary", "corpus", "reproducers", "check_results"}
    assert saved["corpus"] == {"count": 4, "seed": 7}
    for result in saved["check_results"]:
        assert {"check_id", "check_name", "rule", "cases_checked", "cases_skipped",
                "violations_found", "status", "violation_details"} <= set(result)


def test_submit_for_pair_holds_only_without_change(gradebook, two_course):
    model, _ = two_course
    bindings = [{k: v.label for k, v in env.items()} for env in submit_for_pair_bindings(gradebook, model)]
    assert bindings == [{"c": "c1", "c'": "c1", "s1": "Harry", "s2": "Harry", "bNew": "hwk1"}]


def test_two_course_model_check(tmp_path):
    ctx = SuiteContext(Settings(), OracleConfig(), 0, 42, str(tmp_path))
    result = check_6_two_course_model(ctx)
    assert result["status"] == "PASS", result["violation_details"]


def test_normal_form_sizes(gradebook, tmp_path):
    df = normal_form_sizes(gradebook)
    assert list(df["predicate"]) == ["Enroll", "Drop", "SubmitForPair", "AssignGrade"]
    assert (df["clauses"] > 0).all()
    assert (df["skolem_relations"] == 0).all()
    run_normal_form_sizes(gradebook, report_dir=str(tmp_path))
    assert sorted(os.listdir(tmp_path)) == ["normal_form_sizes.csv", "normal_form_sizes.json"]
