import os
import random

import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from conftest import finished_pid, submitted
from src.kernel.errors import SchemaError, SessionError
from src.kernel.kernel_ast import NoneExpr, expr_vars, formula_exprs
from src.kernel.type_checker import type_of
from src.oracle.corpus import fill, random_case
from src.store.evaluator import closure, eval_expr, join
from src.store.instance import (
    Action, Atom, Instance, Kind, RelationDecl, apply, diff, is_approximation, replay,
)
from src.store.schema import acquire_lock, journal_append, lock_path, release_lock, validate_relation
from src.store.snapshot import HEADER, parse_snapshot, render_snapshot, snapshot_read, snapshot_write
from src.store.update_log import UpdateLog

a, b, c = Atom(0, "N", "a"), Atom(1, "N", "b"), Atom(2, "N", "c")


# ── evaluator ───────────────────────────────────────────────────────

def test_join_drops_the_matched_column():
    assert join({(a, b)}, {(b, c), (a, c)}) == {(a, c)}
    assert join({(a,)}, {(a, b)}) == {(b,)}


def test_closure_is_transitive():
    assert closure({(a, b), (b, c)}) == {(a, b), (b, c), (a, c)}
    assert closure(set()) == set()


@hyp_settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_values_match_their_types(seed):
    case = random_case(seed, quantifiers="any", facts=False)
    p = case.spec.predicate(case.pred)
    types = {prm.name: prm.type for prm in p.params}
    state = case.instance.state_atom
    env = {**case.env, **{name: state for name, t in types.items() if t == case.spec.state_sig}}
    post = case.instance.copy()
    fill(post, random.Random(seed), 0.5)
    for e in formula_exprs(p.body):
        if isinstance(e, NoneExpr) or not expr_vars(e) <= set(types):
            continue
        cols = type_of(e, case.spec, types)
        for t in eval_expr(e, case.instance, post, env):
            assert tuple(atom.sig for atom in t) == tuple(cols), case.text


# ── instances ───────────────────────────────────────────────────────

def test_initial_instance_has_one_state_atom(session_spec):
    inst = Instance.initial(session_spec)
    assert [x.label for x in inst.atoms("Course")] == ["Course"]
    inst.check_well_formed()


def test_two_course_model_is_not_well_formed(two_course):
    model, _ = two_course
    with pytest.raises(SchemaError, match="exactly one"):
        model.check_well_formed()


def test_relabel_rewrites_tuples(session_spec, settings):
    gb = submitted(session_spec, settings)
    course = gb.inst.state_atom
    renamed = gb.inst.relabel(course, "cs312")
    assert renamed == course and renamed.label == "cs312"
    assert {t[0].label for t in gb.inst.relations["roster"]} == {"cs312"}


def test_apply_refuses_immutable(session_spec):
    inst = Instance.initial(session_spec)
    with pytest.raises(AssertionError):
        apply(inst, "Course", (inst.state_atom,), Action.INSERT)


def test_validate_relation_types():
    decl = RelationDecl("r", ("N", "N"), Kind.FIELD)
    validate_relation(decl, {(a, b)}, {"N": [a, b]})
    with pytest.raises(SchemaError, match="arity"):
        validate_relation(decl, {(a,)}, {"N": [a, b]})
    with pytest.raises(SchemaError, match="not in the universe"):
        validate_relation(decl, {(a, c)}, {"N": [a, b]})


def test_approximation():
    decl = RelationDecl("r", ("N", "N"), Kind.STATE_FIELD)
    I = Instance({"N": RelationDecl("N", ("N",), Kind.SIG), "r": decl}, None,
                 {"N": [a, b, c]}, {"r": {(a, b)}})
    Iprime = replay(I, [("r", (a, b), Action.DELETE), ("r", (b, c), Action.INSERT)])
    halfway = replay(I, [("r", (b, c), Action.INSERT)])
    assert is_approximation(I, I, Iprime)
    assert is_approximation(halfway, I, Iprime)
    assert is_approximation(Iprime, I, Iprime)
    assert not is_approximation(replay(I, [("r", (a, c), Action.INSERT)]), I, Iprime)


# ── update log ──────────────────────────────────────────────────────

def test_update_log_refuses_conflicts():
    log = UpdateLog()
    log.append("r", (a,), Action.INSERT)
    assert log.conflicts("r", (a,), Action.DELETE)
    with pytest.raises(ValueError):
        log.append("r", (a,), Action.DELETE)


def test_truncate_returns_newest_first():
    log = UpdateLog([("r", (a,), Action.INSERT), ("r", (b,), Action.DELETE), ("r", (c,), Action.INSERT)])
    dropped = log.truncate(1)
    assert [t for _, t, _ in dropped] == [(c,), (b,)]
    assert len(log) == 1 and not log.conflicts("r", (b,), Action.INSERT)


@hyp_settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.floats(min_value=0.0, max_value=1.0))
def test_diff_then_replay(seed, density):
    case = random_case(seed, facts=False)
    post = case.instance.copy()
    fill(post, random.Random(seed), density)
    for name, d in post.schema.items():
        if d.kind == Kind.FIELD:
            post.relations[name] = set(case.instance.relations[name])
    assert replay(case.instance, diff(case.instance, post)) == post


# ── snapshots ───────────────────────────────────────────────────────

def test_snapshot_round_trip(session_spec, settings):
    inst = submitted(session_spec, settings).inst
    text = render_snapshot(inst)
    back = parse_snapshot(text, session_spec)
    assert back == inst
    assert render_snapshot(back) == text


def test_snapshot_write_is_atomic(session_spec, tmp_path):
    path = tmp_path / "db.specdb"
    inst = Instance.initial(session_spec)
    snapshot_write(inst, str(path))
    assert os.listdir(tmp_path) == ["db.specdb"]
    assert snapshot_read(str(path), session_spec) == inst


def test_snapshot_header_required(session_spec):
    with pytest.raises(SchemaError, match="header"):
        parse_snapshot("atom Course 0 cs311\n", session_spec)


@pytest.mark.parametrize("body, message", [
    ("atom Planet 0 x\n", "unknown signature"),
    ("atom Course 0 cs311\nrel nope\n", "unknown relation"),
    ("atom Course 0 cs311\nrel roster\n0\t7\n", "bad tuple"),
    ("atom Course 0 cs311\natom Course 0 cs312\n", "duplicate atom id"),
    ("atom Student 0 Pete\n", "exactly one"),
])
def test_snapshot_rejects(session_spec, body, message):
    with pytest.raises(SchemaError, match=message):
        parse_snapshot(f"{HEADER}\n{body}", session_spec)


def test_missing_snapshot(session_spec, tmp_path):
    with pytest.raises(SchemaError, match="cannot read"):
        snapshot_read(str(tmp_path / "missing.specdb"), session_spec)


# ── locks and journal ───────────────────────────────────────────────

def test_lock_is_exclusive(db_path):
    acquire_lock(db_path, retries=1, base_delay=0.01)
    try:
        with pytest.raises(SessionError, match="locked"):
            acquire_lock(db_path, retries=1, base_delay=0.01)
    finally:
        release_lock(db_path)
    assert not os.path.exists(lock_path(db_path))


def test_journal_format(tmp_path):
    path = tmp_path / "journal.txt"
    journal_append(str(path), 3, "Enroll(cs311, Pete)", UpdateLog([("roster", (a, b), Action.INSERT)]))
    assert path.read_text(encoding="utf-8") == "txn 3 Enroll(cs311, Pete)\nINS roster\t0\t1\n\n"


def test_stale_lock_is_reclaimed(db_path, caplog):
    with open(lock_path(db_path), "w", encoding="utf-8") as f:
        f.write(str(finished_pid()))
    acquire_lock(db_path, retries=1, base_delay=0.01)
    try:
        with open(lock_path(db_path), encoding="utf-8") as f:
            assert f.read() == str(os.getpid())
    finally:
        release_lock(db_path)
    assert "stale lock" in caplog.text
