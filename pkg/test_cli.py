import io
import json
import os

import pytest

from conftest import GOLDEN_SCRIPT, GRADEBOOK, GRADEBOOK_SESSION, GRADEBOOK_STRICT, STRICT_SCRIPT, \
    UNENROLLED_SCRIPT, finished_pid, run_lines
from src.cli.main import main
from src.cli.repl import run_repl
from src.cli.script_runner import run_script
from src.cli.session import Session
from src.config.settings import Settings
from src.kernel.errors import SessionError
from src.store.schema import acquire_lock, lock_path, release_lock
from src.store.snapshot import snapshot_read

SETUP = [
    'cs311 = CreateCourse("cs311");',
    'pete = CreateStudent("Pete");',
    'caitlin = CreateStudent("Caitlin");',
    "Enroll(cs311, pete);",
    "Enroll(caitlin)",
]


def labels(inst, rel):
    return {tuple(a.label for a in t) for t in inst.relations[rel]}


def write_script(tmp_path, lines, name="script.cmds"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


# ── sessions ────────────────────────────────────────────────────────

def test_course_binding_relabels_the_state_atom(open_session):
    (outcome,) = run_lines(open_session, ['cs311 = CreateCourse("cs311");'])
    assert outcome.lines == ["✓ cs311 = Course cs311"]
    assert open_session.instance.state_atom.label == "cs311"
    with pytest.raises(SessionError, match="already labelled"):
        run_lines(open_session, ['cs312 = CreateCourse("cs312");'])


def test_state_argument_is_optional(open_session):
    outcomes = run_lines(open_session, SETUP)
    assert all(not o.failed for o in outcomes)
    assert labels(open_session.instance, "roster") == {("cs311", "Pete"), ("cs311", "Caitlin")}


def test_user_errors(open_session):
    run_lines(open_session, SETUP)
    with pytest.raises(SessionError, match="unknown name 'nobody'"):
        run_lines(open_session, ["Drop(cs311, nobody)"])
    with pytest.raises(SessionError, match="takes 2 arguments"):
        run_lines(open_session, ["Drop(cs311, pete, pete)"])
    with pytest.raises(SessionError, match="is a Student, expected Submission"):
        run_lines(open_session, ['hwk1 = CreateSubmission("hwk1")', "SubmitForPair(pete, caitlin, pete)"])
    with pytest.raises(SessionError, match="already exists"):
        run_lines(open_session, ['again = CreateStudent("Pete")'])
    with pytest.raises(SessionError, match="unknown predicate"):
        run_lines(open_session, ["Graduate(pete)"])


def test_failed_transaction_keeps_the_last_commit(open_session):
    run_lines(open_session, SETUP[:4] + ['hwk1 = CreateSubmission("hwk1")'])
    before = open_session.instance
    (outcome,) = run_lines(open_session, ["SubmitForPair(cs311, pete, caitlin, hwk1)"])
    assert outcome.failed
    assert outcome.lines[-1].startswith("✗ SubmitForPair rolled back")
    assert open_session.instance is before
    assert snapshot_read(open_session.db_path, open_session.spec) == before


def test_show_relation(open_session):
    run_lines(open_session, SETUP)
    (outcome,) = run_lines(open_session, ["show roster"])
    assert outcome.lines[0] == "📊 roster (2 tuples)"
    assert "Caitlin" in outcome.lines[1]
    df = open_session.relation_frame("roster")
    assert list(df.columns) == ["Course", "Student"]
    with pytest.raises(SessionError):
        open_session.relation_frame("$empty")


def test_exhaustive_strategy(session_spec, db_path, tmp_path):
    settings = Settings(strategy="exhaustive")
    with Session(session_spec, db_path, settings, log_dir=str(tmp_path)) as session:
        run_lines(session, SETUP)
        assert labels(session.instance, "roster") == {("cs311", "Pete"), ("cs311", "Caitlin")}


def test_repl_counts_failures(open_session):
    out = io.StringIO()
    failures = run_repl(open_session, io.StringIO("\n".join(SETUP + ["Drop(ghost)", "quit", "Drop(pete)"])), out)
    assert failures == 1
    assert "✓ Enroll: 1 update(s)" in out.getvalue()
    assert labels(open_session.instance, "roster") == {("cs311", "Pete"), ("cs311", "Caitlin")}


def test_database_is_locked(session_spec, db_path, settings, tmp_path):
    with Session(session_spec, db_path, settings, log_dir=str(tmp_path)):
        with pytest.raises(SessionError, match="locked"):
            Session(session_spec, db_path, Settings(lock_retries=1), log_dir=str(tmp_path)).open()


def test_spec_without_state_is_refused(tmp_path, settings):
    from src.parsing.spec_parser import parse_spec
    from src.kernel.type_checker import check_spec

    with pytest.raises(SessionError, match="no State signature"):
        Session(check_spec(parse_spec("sig A {}")), str(tmp_path / "x.specdb"), settings)


# ── command line ────────────────────────────────────────────────────

def test_check(capsys):
    assert main(["check", "--spec", GRADEBOOK]) == 0
    out = capsys.readouterr().out
    assert "State signature: Course" in out
    assert "pred AssignGrade(c: Course, c': Course, s: Student, b: Submission, g: Grade)" in out
    assert "1 facts (+" in out
    assert "  sig Course { roster: Course -> Student," in out


def test_check_reports_parse_errors(tmp_path):
    bad = tmp_path / "bad.spec"
    bad.write_text("sig A {\n", encoding="utf-8")
    assert main(["check", "--spec", str(bad)]) == 1
    assert main(["check", "--spec", str(tmp_path / "missing.spec")]) == 1


def test_invalid_configuration():
    assert main(["--strategy", "greedy", "check", "--spec", GRADEBOOK]) == 1


def test_golden_session(db_path, tmp_path, capsys):
    journal = str(tmp_path / "journal.txt")
    assert main(["run", "--spec", GRADEBOOK_SESSION, "--db", db_path,
                 "--script", GOLDEN_SCRIPT, "--journal", journal]) == 0
    from src.parsing.spec_parser import load_spec

    inst = snapshot_read(db_path, load_spec(GRADEBOOK_SESSION))
    assert labels(inst, "gradebook") == {("cs311", "Pete", "hwk1", "A"), ("cs311", "Caitlin", "hwk1", "A")}
    out = capsys.readouterr().out
    assert "📊 gradebook (2 tuples)" in out
    with open(journal, encoding="utf-8") as f:
        text = f.read()
    assert text.startswith('txn 1 CreateCourse("cs311")\n')
    assert "txn 4 Enroll(Pete)\nINS roster\t0\t1\n" in text


def test_replay_is_deterministic(tmp_path):
    first, second = str(tmp_path / "one.specdb"), str(tmp_path / "two.specdb")
    for db in (first, second):
        assert main(["run", "--spec", GRADEBOOK_SESSION, "--db", db, "--script", GOLDEN_SCRIPT]) == 0
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()


def test_strict_session_rolls_back(tmp_path):
    db, prefix_db = str(tmp_path / "strict.specdb"), str(tmp_path / "prefix.specdb")
    assert main(["run", "--spec", GRADEBOOK_STRICT, "--db", db, "--script", STRICT_SCRIPT]) == 2
    with open(STRICT_SCRIPT, encoding="utf-8") as f:
        lines = [line for line in f.read().splitlines() if not line.startswith("AssignGrade")]
    prefix = write_script(tmp_path, lines)
    assert main(["run", "--spec", GRADEBOOK_STRICT, "--db", prefix_db, "--script", prefix]) == 0
    with open(db, "rb") as a, open(prefix_db, "rb") as b:
        assert a.read() == b.read()


def test_unenrolled_partner(db_path):
    assert main(["run", "--spec", GRADEBOOK_SESSION, "--db", db_path, "--script", UNENROLLED_SCRIPT]) == 2


def test_script_errors(db_path, tmp_path):
    script = write_script(tmp_path, ['cs311 = CreateCourse("cs311");', "Enroll(cs311"])
    assert main(["run", "--spec", GRADEBOOK_SESSION, "--db", db_path, "--script", script]) == 1


def test_lock_held(db_path):
    acquire_lock(db_path)
    try:
        assert main(["run", "--spec", GRADEBOOK_SESSION, "--db", db_path, "--script", GOLDEN_SCRIPT]) == 1
    finally:
        release_lock(db_path)


def test_dump_normal(capsys):
    assert main(["dump-normal", "--spec", GRADEBOOK_SESSION, "--pred", "Drop"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("pred Drop")
    assert main(["dump-normal", "--spec", GRADEBOOK_SESSION, "--pred", "Graduate"]) == 1


def test_oracle_check(db_path, capsys):
    assert main(["run", "--spec", GRADEBOOK_SESSION, "--db", db_path, "--script", GOLDEN_SCRIPT]) == 0
    capsys.readouterr()
    assert main(["oracle", "check", "--spec", GRADEBOOK_SESSION, "--db", db_path,
                 "--pred", "Drop", "--args", "Caitlin"]) == 0
    assert "✅ Drop(Caitlin): OK" in capsys.readouterr().out


def test_crashed_session_lock_is_reclaimed(db_path):
    with open(lock_path(db_path), "w", encoding="utf-8") as f:
        f.write(str(finished_pid()))
    assert main(["run", "--spec", GRADEBOOK_SESSION, "--db", db_path, "--script", GOLDEN_SCRIPT]) == 0
    assert not os.path.exists(lock_path(db_path))


def test_script_run_is_logged(open_session, tmp_path):
    script = write_script(tmp_path, SETUP + ["Drop(ghost)"])
    summary = run_script(open_session, script, echo=lambda line: None)
    assert summary.exit_code == 1 and summary.stopped_at == 6
    with open(os.path.join(open_session.log_dir, "script_runs.jsonl"), encoding="utf-8") as f:
        record = json.loads(f.read().splitlines()[-1])
    assert record["exit_code"] == 1
    assert record["stopped_at_line"] == 6
    assert record["commands"] == 6
    assert "unknown name 'ghost'" in record["error"]
