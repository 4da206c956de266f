import json
import os

import pytest

from conftest import Gradebook, submitted
from src.executor.executor import run_predicate
from src.kernel.errors import OracleOverflowError
from src.normalization.normalizer import normalize_predicate
from src.oracle.corpus import course_slice
from src.oracle.oracle import (
    OracleConfig, OracleModel, Verdict, check_facts, enumerate_poststates, first_poststate, holds,
    oracle_check, transition_holds, write_reproducer,
)


def pete_hwk1_a(gb):
    return {"s": gb.atoms["Pete"], "b": gb.atoms["hwk1"], "g": gb.atoms["A"]}


# ── the two-course model ────────────────────────────────────────────

def test_two_course_model(gradebook, two_course):
    model, a = two_course
    m = OracleModel.single(model)
    assert holds(gradebook.predicate("Enroll").body, m, {"c": a["c0"], "c'": a["c1"], "sNew": a["Meg"]})
    assert not holds(gradebook.predicate("Enroll").body, m, {"c": a["c1"], "c'": a["c0"], "sNew": a["Meg"]})
    assert check_facts(gradebook, model) == []


def test_drop_admits_every_smaller_roster(gradebook, two_course):
    model, a = two_course
    c1 = course_slice(model, gradebook, "c1")
    posts = enumerate_poststates(gradebook, "Drop", c1, {"s": a["Meg"]}, OracleConfig(max_atoms=4))
    rosters = [{t[1].label for t in post.relations["roster"]} for post in posts]
    assert {"Harry"} in rosters and set() in rosters
    assert all("Meg" not in r for r in rosters)


def test_overflow(gradebook, two_course):
    model, a = two_course
    c1 = course_slice(model, gradebook, "c1")
    with pytest.raises(OracleOverflowError, match="at most 3"):
        enumerate_poststates(gradebook, "Drop", c1, {"s": a["Meg"]})
    with pytest.raises(OracleOverflowError, match="cap"):
        enumerate_poststates(gradebook, "Drop", c1, {"s": a["Meg"]}, OracleConfig(4, 16))


# ── verdicts on the gradebook session ───────────────────────────────

def test_assign_grade_has_one_post_state(session_spec, settings):
    gb = submitted(session_spec, settings)
    posts = enumerate_poststates(session_spec, "AssignGrade", gb.inst, pete_hwk1_a(gb))
    assert len(posts) == 1
    assert len(posts[0].relations["gradebook"]) == 2


def test_executor_result_is_sound(session_spec, settings):
    gb = submitted(session_spec, settings)
    result = gb.call("AssignGrade", s="Pete", b="hwk1", g="A")
    assert transition_holds(session_spec, "AssignGrade", gb.inst, result.post, pete_hwk1_a(gb))
    assert oracle_check(session_spec, "AssignGrade", gb.inst, pete_hwk1_a(gb), result).ok


def test_dropping_facts_is_caught(session_spec, settings):
    gb = submitted(session_spec, settings)
    np = normalize_predicate(session_spec.predicate("AssignGrade"), [])
    result = run_predicate(np, pete_hwk1_a(gb), gb.inst, settings)
    report = oracle_check(session_spec, "AssignGrade", gb.inst, pete_hwk1_a(gb), result)
    assert report.verdict == Verdict.SOUND_VIOLATION
    assert "SameGradeForPair" in report.detail


def test_strict_failure_is_real(strict_spec, settings):
    gb = submitted(strict_spec, settings)
    result = gb.call("AssignGrade", s="Pete", b="hwk1", g="A")
    assert not result.ok
    report = oracle_check(strict_spec, "AssignGrade", gb.inst, pete_hwk1_a(gb), result)
    assert report.ok and "no post-state" in report.detail


def test_unenrolled_pair_has_no_post_state(session_spec, settings):
    gb = Gradebook(session_spec, settings)
    for sig, label in [("Student", "Pete"), ("Student", "Caitlin"), ("Submission", "hwk1")]:
        gb.create(sig, label)
    gb.commit("Enroll", sNew="Pete")
    env = {"s1": gb.atoms["Pete"], "s2": gb.atoms["Caitlin"], "bNew": gb.atoms["hwk1"]}
    assert first_poststate(session_spec, "SubmitForPair", gb.inst, env) is None


def test_reproducer_files(session_spec, settings, tmp_path):
    gb = submitted(session_spec, settings)
    np = normalize_predicate(session_spec.predicate("AssignGrade"), [])
    result = run_predicate(np, pete_hwk1_a(gb), gb.inst, settings)
    report = oracle_check(session_spec, "AssignGrade", gb.inst, pete_hwk1_a(gb), result)
    directory = write_reproducer(str(tmp_path / "repro"), session_spec, gb.inst, "AssignGrade",
                                 pete_hwk1_a(gb), report)
    assert sorted(os.listdir(directory)) == ["env.json", "snapshot.specdb", "spec.spec", "verdict.json"]
    with open(os.path.join(directory, "verdict.json"), encoding="utf-8") as f:
        verdict = json.load(f)
    assert verdict["verdict"] == "SOUND-VIOLATION"
    with open(os.path.join(directory, "env.json"), encoding="utf-8") as f:
        assert json.load(f)["s"]["label"] == "Pete"
