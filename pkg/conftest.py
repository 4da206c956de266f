import os
import subprocess
import sys

import pytest

from src.cli.session import Session, execute_command
from src.config.settings import SESSIONS_DIR, SPECS_DIR, Settings
from src.executor.executor import run_predicate
from src.normalization.normalizer import normalize_predicate
from src.oracle.corpus import two_course_model
from src.parsing.command_parser import parse_command
from src.parsing.spec_parser import load_spec
from src.store.instance import Instance

GRADEBOOK = os.path.join(SPECS_DIR, "gradebook.spec")
GRADEBOOK_SESSION = os.path.join(SPECS_DIR, "gradebook_session.spec")
GRADEBOOK_STRICT = os.path.join(SPECS_DIR, "gradebook_strict.spec")
GOLDEN_SCRIPT = os.path.join(SESSIONS_DIR, "gradebook.cmds")
STRICT_SCRIPT = os.path.join(SESSIONS_DIR, "gradebook_strict.cmds")
UNENROLLED_SCRIPT = os.path.join(SESSIONS_DIR, "unenrolled_pair.cmds")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run the full-size oracle suite")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size oracle suite runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def settings():
    return Settings()


@pytest.fixture(scope="session")
def gradebook_text():
    with open(GRADEBOOK, "r", encoding="utf-8") as f:
        return f.read()


@pytest.fixture(scope="session")
def gradebook():
    return load_spec(GRADEBOOK)


@pytest.fixture(scope="session")
def session_spec():
    return load_spec(GRADEBOOK_SESSION)


@pytest.fixture(scope="session")
def strict_spec():
    return load_spec(GRADEBOOK_STRICT)


@pytest.fixture
def two_course(gradebook):
    return two_course_model(gradebook)


@pytest.fixture
def db_path(tmp_path):
    return str(tmp_path / "gradebook.specdb")


@pytest.fixture
def open_session(session_spec, db_path, settings, tmp_path):
    session = Session(session_spec, db_path, settings, log_dir=str(tmp_path / "logs")).open()
    yield session
    session.close()


def run_lines(session, lines):
    """Execute command lines; returns the outcome of each non-blank line."""
    outcomes = []
    for line in lines:
        command = parse_command(line)
        if command is not None:
            outcomes.append(execute_command(session, command))
    return outcomes


class Gradebook:
    """Drives the gradebook predicates directly through the executor."""

    def __init__(self, spec, settings):
        self.spec = spec
        self.settings = settings
        self.inst = Instance.initial(spec)
        self.atoms = {}
        course = self.inst.state_atom
        self.atoms["cs311"] = self.inst.relabel(course, "cs311")

    def create(self, sig, label):
        self.atoms[label] = self.inst.create_atom(sig, label)
        return self.atoms[label]

    def call(self, pred, facts=True, **env):
        np = normalize_predicate(self.spec.predicate(pred), self.spec.all_facts() if facts else [])
        return run_predicate(np, {k: self.atoms[v] for k, v in env.items()}, self.inst, self.settings)

    def commit(self, pred, **env):
        result = self.call(pred, **env)
        assert result.ok, result.failure
        self.inst = result.post
        return result

    def labels(self, rel):
        return {tuple(a.label for a in t) for t in self.inst.relations[rel]}


def submitted(spec, settings):
    """cs311 with Pete and Caitlin enrolled and hwk1 submitted as a pair; grade A exists."""
    gb = Gradebook(spec, settings)
    for sig, label in [("Student", "Pete"), ("Student", "Caitlin"), ("Submission", "hwk1"), ("Grade", "A")]:
        gb.create(sig, label)
    gb.commit("Enroll", sNew="Pete")
    gb.commit("Enroll", sNew="Caitlin")
    gb.commit("SubmitForPair", s1="Pete", s2="Caitlin", bNew="hwk1")
    return gb


def finished_pid():
    """Pid of a process that has already exited."""
    proc = subprocess.Popen([sys.executable, "-c", "pass"])
    proc.wait()
    return proc.pid
