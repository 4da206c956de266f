"""
session.py
==========
One interactive session over one database file: the committed instance,
name bindings from CreateAtom commands, and transaction bookkeeping.

Every accepted command that changes the database rewrites the snapshot
atomically; with a journal path, the transaction is appended to it as well.
The database is locked for the lifetime of the session.

Usage:
    with Session(spec, "data/db/gradebook.specdb", settings) as session:
        outcome = execute_command(session, parse_command('Enroll(cs311, pete)'))
"""

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import pandas as pd

from src.config.settings import LOG_DIR, Settings
from src.executor.executor import ExecutionResult, Failure, FailureKind, run_predicate
from src.kernel.errors import SessionError
from src.kernel.kernel_ast import Param, Spec
from src.normalization.normalizer import NormalizedPredicate, normalize_predicate
from src.oracle.oracle import OracleConfig, check_facts, first_poststate
from src.parsing.command_parser import (
    Arg, Command, CreateAtom, InvokePredicate, Quit, ShowRelation, Snapshot,
)
from src.store.instance import Atom, Instance, Kind, diff
from src.store.schema import acquire_lock, journal_append, log_transaction, release_lock
from src.store.snapshot import snapshot_read, snapshot_write
from src.store.update_log import UpdateLog

logger = logging.getLogger("specdb.session")


@dataclass
class CommandOutcome:
    """What one command did: ``ok``, ``failed`` (transaction rolled back) or ``quit``."""

    status: str = "ok"
    lines: List[str] = field(default_factory=list)
    result: Optional[ExecutionResult] = None

    @property
    def failed(self) -> bool:
        return self.status == "failed"


class Session:
    def __init__(self, spec: Spec, db_path: str, settings: Settings,
                 journal: Optional[str] = None, log_dir: str = LOG_DIR):
        if spec.state_sig is None:
            raise SessionError("the specification has no State signature")
        self.spec = spec
        self.db_path = db_path
        self.settings = settings
        self.journal = journal
        self.log_dir = log_dir
        self.bindings: Dict[str, Atom] = {}
        self.instance: Optional[Instance] = None
        self.txn = 0
        self._normalized: Dict[str, NormalizedPredicate] = {}
        self._locked = False

    # ── lifecycle ────────────────────────────────────────────────
    def open(self) -> "Session":
        acquire_lock(self.db_path, self.settings.lock_retries, self.settings.lock_base_delay)
        self._locked = True
        try:
            if os.path.exists(self.db_path):
                self.instance = snapshot_read(self.db_path, self.spec)
                logger.info(f"📂 Loaded {self.db_path} ({len(self.instance.atoms())} atoms)")
            else:
                self.instance = Instance.initial(self.spec)
                snapshot_write(self.instance, self.db_path)
                logger.info(f"🆕 Initialised {self.db_path}")
            self.instance.check_well_formed()
            broken = check_facts(self.spec, self.instance)
            if broken:
                raise SessionError(f"{self.db_path} violates fact(s): {', '.join(broken)}")
        except BaseException:
            self.close()
            raise
        return self

    @classmethod
    def read_only(cls, spec: Spec, db_path: str, settings: Settings) -> "Session":
        """A session on a snapshot without taking the lock; for inspection only."""
        session = cls(spec, db_path, settings)
        session.instance = snapshot_read(db_path, spec)
        return session

    def close(self) -> None:
        if self._locked:
            release_lock(self.db_path)
            self._locked = False

    def __enter__(self) -> "Session":
        return self.open()

    def __exit__(self, *exc) -> None:
        self.close()

    # ── persistence ──────────────────────────────────────────────
    def _commit(self, inst: Instance, header: str, updates) -> None:
        snapshot_write(inst, self.db_path)
        self.instance = inst
        self.txn += 1
        if self.journal:
            journal_append(self.journal, self.txn, header, updates)

    # ── CreateAtom ───────────────────────────────────────────────
    def create_atom(self, cmd: CreateAtom) -> Atom:
        sig = self.spec.sig(cmd.sig)
        if sig is None:
            raise SessionError(f"unknown signature '{cmd.sig}' in Create{cmd.sig}")
        inst = self.instance.copy()
        if cmd.sig == self.spec.state_sig:
            state = inst.state_atom
            if state.label != self.spec.state_sig:
                raise SessionError(f"the {cmd.sig} atom is already labelled '{state.label}'")
            atom = inst.relabel(state, cmd.label)
            self.bindings = {k: atom if v == atom else v for k, v in self.bindings.items()}
        else:
            if inst.atom_by_label(cmd.label, cmd.sig) is not None:
                raise SessionError(f"{cmd.sig} '{cmd.label}' already exists")
            atom = inst.create_atom(cmd.sig, cmd.label)

        broken = check_facts(self.spec, inst)
        if broken:
            raise SessionError(f"Create{cmd.sig}(\"{cmd.label}\") would violate {', '.join(broken)}")
        self._commit(inst, f'Create{cmd.sig}("{cmd.label}")', UpdateLog())
        if cmd.binding:
            self.bindings[cmd.binding] = atom
        return atom

    # ── InvokePredicate ──────────────────────────────────────────
    def normalized(self, name: str) -> NormalizedPredicate:
        if name not in self._normalized:
            p = self.spec.predicate(name)
            if p is None:
                raise SessionError(f"unknown predicate '{name}'")
            self._normalized[name] = normalize_predicate(p, self.spec.all_facts())
        return self._normalized[name]

    def resolve(self, arg: Arg, expected: str) -> Atom:
        if arg.quoted:
            atom = self.instance.atom_by_label(arg.value, expected)
            if atom is None:
                raise SessionError(f"no {expected} labelled \"{arg.value}\"")
            return atom
        atom = self.bindings.get(arg.value)
        if atom is None:
            raise SessionError(f"unknown name '{arg.value}'")
        if atom not in self.instance.universe.get(atom.sig, []):
            raise SessionError(f"'{arg.value}' no longer names an atom")
        if atom.sig != expected:
            raise SessionError(f"'{arg.value}' is a {atom.sig}, expected {expected}")
        return atom

    def bind_args(self, np: NormalizedPredicate, args) -> Dict[str, Atom]:
        """
        Map call arguments onto parameters. The unprimed State parameter may
        be passed (it must name the State atom) or left out.
        """
        with_state = [prm for prm in np.params if prm.name != np.post_param]
        if len(args) == len(with_state):
            params: List[Param] = with_state
        elif len(args) == len(np.call_params):
            params = list(np.call_params)
        else:
            raise SessionError(
                f"{np.name} takes {len(with_state)} arguments "
                f"({', '.join(p.name for p in with_state)}), got {len(args)}"
            )
        env: Dict[str, Atom] = {}
        for prm, arg in zip(params, args):
            atom = self.resolve(arg, prm.type)
            if prm.type == np.state_sig and atom != self.instance.state_atom:
                raise SessionError(f"'{arg.value}' is not the current {np.state_sig}")
            env[prm.name] = atom
        return {k: v for k, v in env.items() if k != np.pre_param}

    def _exhaustive(self, np: NormalizedPredicate, env: Dict[str, Atom]) -> ExecutionResult:
        post = first_poststate(self.spec, np.name, self.instance, env,
                               OracleConfig.from_settings(self.settings))
        if post is None:
            return ExecutionResult(None, Failure(FailureKind.EXHAUSTED, f"no post-state satisfies {np.name}"))
        return ExecutionResult(post, updates=diff(self.instance, post))

    def invoke(self, cmd: InvokePredicate) -> ExecutionResult:
        np = self.normalized(cmd.name)
        env = self.bind_args(np, cmd.args)
        labels = [a.label for a in env.values()]
        started = time.time()
        if self.settings.strategy == "exhaustive":
            result = self._exhaustive(np, env)
        else:
            result = run_predicate(np, env, self.instance, self.settings)

        if result.ok:
            broken = check_facts(self.spec, result.post)
            if broken:
                logger.error(f"✗ {cmd.name}: post-state violates {', '.join(broken)}; not committed")
                result.failure = Failure(FailureKind.EXHAUSTED, f"post-state violates {', '.join(broken)}")
                result.post = None
        if result.ok:
            self._commit(result.post, f"{cmd.name}({', '.join(labels)})", result.updates)

        log_transaction(
            cmd.name, labels, "committed" if result.ok else "failed",
            updates=len(result.updates), rounds=result.rounds,
            choice_points=result.choice_points, elapsed=time.time() - started,
            error=None if result.ok else str(result.failure), log_dir=self.log_dir,
        )
        return result

    # ── ShowRelation ─────────────────────────────────────────────
    def relation_frame(self, name: str) -> pd.DataFrame:
        decl = self.instance.schema.get(name)
        if decl is None or decl.kind not in (Kind.SIG, Kind.STATE_FIELD, Kind.FIELD):
            raise SessionError(f"unknown relation '{name}'")
        columns, seen = [], {}
        for col in decl.cols:
            seen[col] = seen.get(col, 0) + 1
            columns.append(col if seen[col] == 1 else f"{col}_{seen[col]}")
        rows = [[a.label for a in t] for t in self.instance.tuples(name)]
        return pd.DataFrame(rows, columns=columns)


def execute_command(session: Session, command: Command) -> CommandOutcome:
    """Run one parsed command; user errors raise SpecDBError, rollbacks come back as ``failed``."""
    if isinstance(command, Quit):
        return CommandOutcome("quit")

    if isinstance(command, CreateAtom):
        atom = session.create_atom(command)
        bound = f"{command.binding} = " if command.binding else ""
        return CommandOutcome(lines=[f"✓ {bound}{atom.sig} {atom.label}"])

    if isinstance(command, InvokePredicate):
        result = session.invoke(command)
        lines = list(result.trace)
        if result.ok:
            lines.append(f"✓ {command.name}: {len(result.updates)} update(s)")
            return CommandOutcome(lines=lines, result=result)
        lines.append(f"✗ {command.name} rolled back: {result.failure}")
        return CommandOutcome("failed", lines, result)

    if isinstance(command, ShowRelation):
        df = session.relation_frame(command.name)
        body = "(empty)" if df.empty else df.to_string(index=False)
        return CommandOutcome(lines=[f"📊 {command.name} ({len(df)} tuples)", body])

    if isinstance(command, Snapshot):
        snapshot_write(session.instance, command.path)
        return CommandOutcome(lines=[f"💾 Snapshot saved → {command.path}"])

    raise SessionError(f"unsupported command {command!r}")
