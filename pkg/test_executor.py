import pytest

from conftest import Gradebook, submitted
from src.config.settings import Settings
from src.executor.executor import FailureKind, run_predicate
from src.kernel.errors import SessionError
from src.normalization.normalizer import normalize_predicate
from src.oracle.corpus import generate_cases
from src.oracle.oracle import matrix_holds
from src.store.instance import is_approximation, replay


def assign_grade(gb, settings=None, **kwargs):
    np = normalize_predicate(gb.spec.predicate("AssignGrade"), gb.spec.all_facts())
    env = {"s": gb.atoms["Pete"], "b": gb.atoms["hwk1"], "g": gb.atoms["A"]}
    return run_predicate(np, env, gb.inst, settings or gb.settings, **kwargs)


# ── the gradebook session ───────────────────────────────────────────

def test_enroll_adds_to_roster(session_spec, settings):
    gb = Gradebook(session_spec, settings)
    gb.create("Student", "Pete")
    result = gb.commit("Enroll", sNew="Pete")
    assert gb.labels("roster") == {("cs311", "Pete")}
    assert [(rel, action.value) for rel, _, action in result.updates] == [("roster", "INS")]


def test_submit_for_pair(session_spec, settings):
    gb = submitted(session_spec, settings)
    assert gb.labels("roster") == {("cs311", "Pete"), ("cs311", "Caitlin")}
    assert gb.labels("work") == {("cs311", "Pete", "hwk1"), ("cs311", "Caitlin", "hwk1")}
    assert gb.labels("gradebook") == set()


def test_assign_grade_repairs_the_partner(session_spec, settings):
    gb = submitted(session_spec, settings)
    gb.commit("AssignGrade", s="Pete", b="hwk1", g="A")
    assert gb.labels("gradebook") == {("cs311", "Pete", "hwk1", "A"), ("cs311", "Caitlin", "hwk1", "A")}
    assert gb.labels("work") == {("cs311", "Pete", "hwk1"), ("cs311", "Caitlin", "hwk1")}


def test_assign_grade_without_facts_grades_one_student(session_spec, settings):
    gb = submitted(session_spec, settings)
    result = gb.call("AssignGrade", facts=False, s="Pete", b="hwk1", g="A")
    assert result.ok
    grades = {tuple(a.label for a in t) for t in result.post.relations["gradebook"]}
    assert grades == {("cs311", "Pete", "hwk1", "A")}


def test_strict_assign_grade_rolls_back(strict_spec, settings):
    gb = submitted(strict_spec, settings)
    before = gb.inst.copy()
    result = assign_grade(gb)
    assert not result.ok
    assert result.failure.kind == FailureKind.EXHAUSTED
    assert result.post is None
    assert gb.inst == before


def test_unenrolled_partner_fails(session_spec, settings):
    gb = Gradebook(session_spec, settings)
    for sig, label in [("Student", "Pete"), ("Student", "Caitlin"), ("Submission", "hwk1")]:
        gb.create(sig, label)
    gb.commit("Enroll", sNew="Pete")
    result = gb.call("SubmitForPair", s1="Pete", s2="Caitlin", bNew="hwk1")
    assert result.failure.kind == FailureKind.EXHAUSTED


def test_drop_removes_work(session_spec, settings):
    gb = submitted(session_spec, settings)
    gb.commit("Drop", s="Caitlin")
    assert gb.labels("roster") == {("cs311", "Pete")}
    assert ("cs311", "Caitlin", "hwk1") not in gb.labels("work")


# ── search behaviour ────────────────────────────────────────────────

def test_trace_is_deterministic(session_spec, settings):
    first = assign_grade(submitted(session_spec, settings), trace=True)
    second = assign_grade(submitted(session_spec, settings), trace=True)
    assert first.trace and first.trace == second.trace
    assert first.trace[0] == "ROUND 1"
    assert any(line.startswith("INS gradebook") for line in first.trace)


def test_rounds_pass_through_approximations(session_spec, settings):
    gb = submitted(session_spec, settings)
    result = assign_grade(gb)
    assert result.rounds == len(result.round_marks) >= 2
    entries = result.updates.entries
    for mark in result.round_marks + [len(entries)]:
        assert is_approximation(replay(gb.inst, entries[:mark]), gb.inst, result.post)


def test_choice_budget(session_spec, settings):
    gb = submitted(session_spec, settings)
    result = assign_grade(gb, Settings(max_choices=1))
    assert result.failure.kind == FailureKind.BUDGET
    assert "choice budget" in result.failure.message


def test_random_strategy_finds_the_same_grades(session_spec, settings):
    gb = submitted(session_spec, settings)
    result = assign_grade(gb, Settings(strategy="random:7"))
    assert result.ok
    assert result.post == assign_grade(gb).post


def test_unbound_parameter(session_spec, settings):
    gb = submitted(session_spec, settings)
    np = normalize_predicate(session_spec.predicate("Drop"), [])
    with pytest.raises(SessionError, match="unbound"):
        run_predicate(np, {}, gb.inst, settings)
    with pytest.raises(SessionError, match="is not a Student"):
        run_predicate(np, {"s": gb.atoms["hwk1"]}, gb.inst, settings)


def test_successful_runs_satisfy_the_matrix(settings):
    checked = 0
    for case in generate_cases(25, seed=3, closure=True, quantifiers="any", facts=False):
        np = normalize_predicate(case.spec.predicate(case.pred), [])
        result = run_predicate(np, case.env, case.instance, settings)
        if result.ok:
            checked += 1
            assert matrix_holds(np, case.instance, result.witness, case.env), case.text
            assert result.post.same_universe(case.instance)
    assert checked > 0
