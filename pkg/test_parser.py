import random

import pytest
from hypothesis import HealthCheck, given, settings as hyp_settings, strategies as st

from src.kernel.errors import ParseError, SpecTypeError
from src.kernel.kernel_ast import And, Eq, Forall, In, Join, Not, Or, RelName, Union, Var
from src.kernel.type_checker import check_spec, type_of
from src.oracle.corpus import random_spec_text
from src.parsing.command_parser import Arg, CreateAtom, InvokePredicate, Quit, ShowRelation, parse_command
from src.parsing.renderer import render
from src.parsing.spec_parser import parse_spec

SIGS = """
sig Student {}
sig Course { roster: set Student }
"""


# ── specifications ──────────────────────────────────────────────────

def test_gradebook_summary(gradebook):
    assert [s.name for s in gradebook.signatures] == ["Submission", "Grade", "Student", "Course"]
    assert [p.name for p in gradebook.predicates] == ["Enroll", "Drop", "SubmitForPair", "AssignGrade"]
    assert gradebook.state_sig == "Course"
    assert gradebook.relation_cols("gradebook") == ("Course", "Student", "Submission", "Grade")


def test_derived_facts_are_kept_apart(gradebook):
    assert [f.name for f in gradebook.facts] == ["SameGradeForPair"]
    assert len(gradebook.all_facts()) > len(gradebook.facts)
    assert check_spec(gradebook) == gradebook


def test_implies_desugars_to_or():
    spec = parse_spec(SIGS + "fact F { all c: Course | c.roster in Student implies c.roster = c.roster }")
    body = spec.facts[0].body
    assert isinstance(body, Forall)
    assert isinstance(body.body, Or) and isinstance(body.body.left, Not)


def test_not_in_and_neq():
    spec = parse_spec(SIGS + "pred P(c, c': Course, s: Student) { s not in c'.roster and s != s }")
    body = spec.predicates[0].body
    assert isinstance(body, And)
    assert isinstance(body.left, Not) and isinstance(body.left.body, In)
    assert isinstance(body.right, Not) and isinstance(body.right.body, Eq)


def test_box_join_reads_as_join():
    spec = parse_spec(SIGS + "pred P(c, c': Course, s: Student) { c.roster[s] = c.roster[s] }")
    left = spec.predicates[0].body.left
    assert isinstance(left, Join)
    assert left.left == Var("s")


def test_union_binds_loosest():
    spec = parse_spec(SIGS + "pred P(c, c': Course, s: Student) { c'.roster = c.roster + s }")
    right = spec.predicates[0].body.right
    assert isinstance(right, Union)
    assert right.right == Var("s")


def test_relation_names_resolve():
    spec = parse_spec(SIGS + "pred P(c, c': Course, s: Student) { s in Student }")
    assert spec.predicates[0].body.right == RelName("Student")


def test_syntax_error_has_span():
    with pytest.raises(ParseError) as err:
        parse_spec("sig A {}\npred P(s, s': A) { s in }", file="bad.spec")
    assert err.value.span is not None
    assert err.value.span.file == "bad.spec"
    assert err.value.span.line == 2


def test_type_errors_are_all_reported():
    raw = parse_spec(SIGS + "pred P(c, c': Course, s: Student) { s in Nope and x in Student }")
    with pytest.raises(SpecTypeError) as err:
        check_spec(raw)
    messages = [v.message for v in err.value.report]
    assert any("Nope" in m for m in messages)
    assert len(messages) >= 2


def test_none_needs_context():
    raw = parse_spec(SIGS + "pred P(c, c': Course) { none in none }")
    with pytest.raises(SpecTypeError, match="cannot infer the type of none"):
        check_spec(raw)


def test_type_of_join(gradebook):
    assert type_of(parse_spec(SIGS + "fact { all c: Course | c.roster in Student }")
                   .facts[0].body.body.left, gradebook, {"c": "Course"}) == ("Student",)


def test_duplicate_names_rejected():
    with pytest.raises(SpecTypeError, match="duplicate"):
        check_spec(parse_spec("sig A {}\nsig A {}"))


def test_empty_spec():
    spec = check_spec(parse_spec(""))
    assert spec.signatures == () and spec.state_sig is None


# ── round trip ──────────────────────────────────────────────────────

def test_gradebook_round_trip(gradebook_text):
    spec = parse_spec(gradebook_text)
    assert parse_spec(render(spec)) == spec


@hyp_settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.randoms(use_true_random=False))
def test_render_round_trip(rng: random.Random):
    text = random_spec_text(rng, closure=True, quantifiers="any", facts=True,
                            existential=rng.random() < 0.3)
    spec = parse_spec(text)
    assert parse_spec(render(spec)) == spec


# ── commands ────────────────────────────────────────────────────────

def test_binding_command():
    assert parse_command('cs311 = CreateCourse("cs311");') == CreateAtom("Course", "cs311", "cs311")


def test_call_with_names_and_labels():
    cmd = parse_command('AssignGrade(cs311, pete, hwk1, "A")  // grade it')
    assert cmd == InvokePredicate("AssignGrade", (Arg("cs311"), Arg("pete"), Arg("hwk1"), Arg("A", quoted=True)))


@pytest.mark.parametrize("line", ["", "   ", "# comment", "// comment"])
def test_blank_lines(line):
    assert parse_command(line) is None


def test_show_and_quit():
    assert parse_command("show gradebook") == ShowRelation("gradebook")
    assert parse_command("quit") == Quit()


@pytest.mark.parametrize("line", ["Enroll(cs311", 'x = Enroll("a")', "CreateStudent(pete)"])
def test_malformed_commands(line):
    with pytest.raises(ParseError):
        parse_command(line)
