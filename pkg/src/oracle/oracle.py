"""
oracle.py
=========
Reference semantics for predicates, independent of the normalizer and the
executor.

A transition (I, I') is evaluated as one two-state model: the State
signature holds the pre-state atom and a synthetic primed atom, every State
field holds the pre tuples under the first and the post tuples under the
second, and the primed State parameter is bound to the primed atom. Facts
are evaluated separately on I'. Post-states are enumerated by brute force
over the mutable tuple slots of the fixed universe.

Usage:
    from src.oracle.oracle import oracle_check
    report = oracle_check(spec, "AssignGrade", instance, env, result)
"""

import itertools
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Set

from src.kernel.errors import OracleOverflowError, SessionError
from src.kernel.kernel_ast import (
    And, Closure, Converse, Diff, Eq, Exists, Expr, Forall, Formula, In, Intersect, Join,
    Not, NoneExpr, Or, Predicate, Product, RelName, Spec, Tag, Union, Var,
)
from src.store.instance import EMPTY_RELATION, Atom, Instance, Kind, Tuple_

logger = logging.getLogger("specdb.oracle")

Env = Dict[str, Atom]
Rel = FrozenSet[Tuple_]


class Verdict(str, Enum):
    OK = "OK"
    SOUND_VIOLATION = "SOUND-VIOLATION"
    COMPLETE_VIOLATION = "COMPLETE-VIOLATION"


@dataclass(frozen=True)
class OracleConfig:
    max_atoms: int = 3
    enumeration_cap: int = 65_536

    def __post_init__(self):
        if self.max_atoms <= 0 or self.enumeration_cap <= 0:
            raise ValueError("oracle caps must be positive")

    @classmethod
    def from_settings(cls, settings) -> "OracleConfig":
        return cls(settings.oracle_max_atoms, settings.oracle_enumeration_cap)


@dataclass(frozen=True)
class OracleReport:
    verdict: Verdict
    detail: str = ""
    witness: Optional[Instance] = None

    @property
    def ok(self) -> bool:
        return self.verdict == Verdict.OK


# ══════════════════════════════════════════════════════════════════
# MODELS
# ══════════════════════════════════════════════════════════════════

class OracleModel:
    """Relation values for evaluation; ``pre``/``post`` serve PRE/POST-tagged reads."""

    def __init__(self, universe: Mapping[str, List[Atom]], fields: Mapping[str, Set[Tuple_]],
                 pre: Instance, post: Instance, primed: Optional[Atom] = None):
        self.universe = universe
        self.fields = fields
        self.pre = pre
        self.post = post
        self.primed = primed

    @classmethod
    def single(cls, inst: Instance) -> "OracleModel":
        """The instance read as an ordinary model (any number of State atoms)."""
        return cls(inst.universe, inst.relations, inst, inst)

    @classmethod
    def transition(cls, pre: Instance, post: Instance) -> "OracleModel":
        state = pre.state_atom
        if state is None or post.state_atom != state:
            raise SessionError("a transition needs one shared State atom")
        primed = Atom(-1 - state.id, state.sig, state.label + "'")
        universe = dict(pre.universe)
        universe[state.sig] = [primed] + list(pre.universe[state.sig])
        fields: Dict[str, Set[Tuple_]] = {}
        for name, decl in pre.schema.items():
            if not decl.stored:
                continue
            if decl.kind == Kind.STATE_FIELD:
                fields[name] = set(pre.relations[name]) | {
                    (primed,) + t[1:] for t in post.relations.get(name, ()) if t[0] == state
                }
            else:
                fields[name] = set(pre.relations[name])
        return cls(universe, fields, pre, post, primed)

    def bind(self, env: Mapping[str, Atom]) -> Env:
        """Primed names bound to the State atom denote the post-state."""
        out = dict(env)
        if self.primed is not None:
            for name, atom in env.items():
                if name.endswith("'") and atom.sig == self.primed.sig:
                    out[name] = self.primed
        return out

    def read(self, rel: RelName) -> Rel:
        if rel.tag in (Tag.PRE, Tag.POST):
            inst = self.pre if rel.tag == Tag.PRE else self.post
            decl = inst.schema.get(rel.name)
            if decl is None:
                raise SessionError(f"relation '{rel.name}' is not in the instance")
            if decl.kind == Kind.STATE_FIELD:
                state = inst.state_atom
                return frozenset(t[1:] for t in inst.relations[rel.name] if t[0] == state)
            return frozenset(inst.value(rel.name))
        if rel.name in self.universe:
            return frozenset((a,) for a in self.universe[rel.name])
        if rel.name == EMPTY_RELATION:
            return frozenset()
        return frozenset(self.fields[rel.name])


# ══════════════════════════════════════════════════════════════════
# EVALUATION
# ══════════════════════════════════════════════════════════════════

def _reach(pairs: Rel) -> Rel:
    succ: Dict[Atom, Set[Atom]] = {}
    for a, b in pairs:
        succ.setdefault(a, set()).add(b)
    out = set()
    for start in succ:
        seen: Set[Atom] = set()
        stack = list(succ[start])
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            out.add((start, node))
            stack.extend(succ.get(node, ()))
    return frozenset(out)


def value(e: Expr, model: OracleModel, env: Env) -> Rel:
    if isinstance(e, RelName):
        return model.read(e)
    if isinstance(e, Var):
        return frozenset({(env[e.name],)})
    if isinstance(e, NoneExpr):
        return frozenset()
    if isinstance(e, Converse):
        return frozenset(t[::-1] for t in value(e.expr, model, env))
    if isinstance(e, Closure):
        return _reach(value(e.expr, model, env))
    left, right = value(e.left, model, env), value(e.right, model, env)
    if isinstance(e, Union):
        return left | right
    if isinstance(e, Intersect):
        return left & right
    if isinstance(e, Diff):
        return left - right
    if isinstance(e, Product):
        return frozenset(a + b for a in left for b in right)
    if isinstance(e, Join):
        return frozenset(a[:-1] + b[1:] for a in left for b in right if a[-1] == b[0])
    raise TypeError(f"not an expression: {e!r}")


def holds(f: Formula, model: OracleModel, env: Env) -> bool:
    if isinstance(f, In):
        return value(f.left, model, env) <= value(f.right, model, env)
    if isinstance(f, Eq):
        return value(f.left, model, env) == value(f.right, model, env)
    if isinstance(f, Not):
        return not holds(f.body, model, env)
    if isinstance(f, And):
        return holds(f.left, model, env) and holds(f.right, model, env)
    if isinstance(f, Or):
        return holds(f.left, model, env) or holds(f.right, model, env)
    if isinstance(f, (Forall, Exists)):
        test = all if isinstance(f, Forall) else any
        return test(
            holds(f.body, model, {**env, f.var: t[0]})
            for t in sorted(value(f.bound, model, env))
        )
    raise TypeError(f"not a formula: {f!r}")


def satisfies(f: Formula, I: Instance, Iprime: Instance, env: Mapping[str, Atom]) -> bool:
    """Truth of ``f`` on the transition (I, I'); State-rooted reads follow the variable."""
    model = OracleModel.transition(I, Iprime)
    return holds(f, model, model.bind(env))


def check_facts(spec: Spec, inst: Instance) -> List[str]:
    """Names of the facts (declared and derived) that ``inst`` violates."""
    model = OracleModel.single(inst)
    return [
        fact.name or f"fact#{i}"
        for i, fact in enumerate(spec.all_facts())
        if not holds(fact.body, model, {})
    ]


def _predicate(spec: Spec, name: str) -> Predicate:
    p = spec.predicate(name)
    if p is None:
        raise SessionError(f"unknown predicate '{name}'")
    return p


def full_env(spec: Spec, p: Predicate, inst: Instance, env: Mapping[str, Atom]) -> Env:
    pre, post = p.state_params(spec.state_sig)
    return {**env, pre: inst.state_atom, post: inst.state_atom}


def transition_holds(spec: Spec, pred: str, I: Instance, Iprime: Instance,
                     env: Mapping[str, Atom]) -> bool:
    """(I, I') is in the predicate's meaning: body on the transition, facts on I'."""
    p = _predicate(spec, pred)
    if not satisfies(p.body, I, Iprime, full_env(spec, p, I, env)):
        return False
    return not check_facts(spec, Iprime)


# ══════════════════════════════════════════════════════════════════
# ENUMERATION
# ══════════════════════════════════════════════════════════════════

def _slots(I: Instance) -> List[tuple]:
    state = I.state_atom
    slots = []
    for name in sorted(n for n, d in I.schema.items() if d.kind == Kind.STATE_FIELD):
        cols = I.schema[name].cols[1:]
        for rest in itertools.product(*(I.atoms(c) for c in cols)):
            slots.append((name, (state,) + rest))
    return slots


def candidate_poststates(I: Instance, cfg: Optional[OracleConfig] = None) -> Iterator[Instance]:
    """Every I' over I's universe that differs from I at most in State fields, in subset order."""
    cfg = cfg or OracleConfig()
    for sig, atoms in I.universe.items():
        if sig != I.state_sig and len(atoms) > cfg.max_atoms:
            raise OracleOverflowError(
                f"signature '{sig}' has {len(atoms)} atoms; the oracle handles at most {cfg.max_atoms}")
    slots = _slots(I)
    if 2 ** len(slots) > cfg.enumeration_cap:
        raise OracleOverflowError(
            f"{len(slots)} mutable tuple slots give {2 ** len(slots):,} candidate post-states "
            f"(cap {cfg.enumeration_cap:,})")

    fields = sorted({name for name, _ in slots})
    for mask in range(2 ** len(slots)):
        post = I.copy()
        for name in fields:
            post.relations[name] = set()
        for bit, (name, t) in enumerate(slots):
            if mask >> bit & 1:
                post.relations[name].add(t)
        yield post


def iter_poststates(spec: Spec, pred: str, I: Instance, env: Mapping[str, Atom],
                    cfg: Optional[OracleConfig] = None) -> Iterator[Instance]:
    """Every I' over I's universe with (I, I') in the predicate's meaning, in subset order."""
    for post in candidate_poststates(I, cfg):
        if transition_holds(spec, pred, I, post, env):
            yield post


def enumerate_poststates(spec: Spec, pred: str, I: Instance, env: Mapping[str, Atom],
                         cfg: Optional[OracleConfig] = None) -> List[Instance]:
    return list(iter_poststates(spec, pred, I, env, cfg))


def first_poststate(spec: Spec, pred: str, I: Instance, env: Mapping[str, Atom],
                    cfg: Optional[OracleConfig] = None) -> Optional[Instance]:
    return next(iter_poststates(spec, pred, I, env, cfg), None)


# ══════════════════════════════════════════════════════════════════
# VERDICTS
# ══════════════════════════════════════════════════════════════════

def oracle_check(spec: Spec, pred: str, I: Instance, env: Mapping[str, Atom], result,
                 cfg: Optional[OracleConfig] = None) -> OracleReport:
    """Judge one executor result: sound if its post-state checks, complete if a failure is real."""
    if result.ok:
        if transition_holds(spec, pred, I, result.post, env):
            return OracleReport(Verdict.OK)
        violated = check_facts(spec, result.post)
        detail = f"facts violated: {violated}" if violated else "predicate body is false"
        logger.warning(f"✗ {pred}: executor result rejected ({detail})")
        return OracleReport(Verdict.SOUND_VIOLATION, detail, result.post)

    witness = first_poststate(spec, pred, I, env, cfg)
    if witness is None:
        return OracleReport(Verdict.OK, f"no post-state exists ({result.failure})")
    logger.warning(f"✗ {pred}: executor failed ({result.failure}) but a post-state exists")
    return OracleReport(Verdict.COMPLETE_VIOLATION, str(result.failure), witness)


def matrix_holds(np, I: Instance, Iprime: Instance, env: Mapping[str, Atom]) -> bool:
    """Evaluate a normalized clause matrix with this module's evaluator (Skolem relations read from I')."""
    model = OracleModel.transition(I, Iprime)
    base = model.bind({**env, np.pre_param: I.state_atom, np.post_param: I.state_atom})
    for clause in np.matrix:
        domains = [I.atoms(np.universal_type(v)) for v in clause.scope]
        for combo in itertools.product(*domains):
            local = {**base, **dict(zip(clause.scope, combo))}
            if not any(_literal(lit, model, local) for lit in clause.literals):
                return False
    return True


def _literal(lit, model: OracleModel, env: Env) -> bool:
    current = value(lit.exprs[0], model, env)
    for e in lit.exprs[1:]:
        current = current & value(e, model, env)
    return (not current) if lit.polarity == "empty" else bool(current)


def write_reproducer(directory: str, spec: Spec, inst: Instance, pred: str,
                     env: Mapping[str, Atom], report: OracleReport) -> str:
    """Bundle spec text, pre-state snapshot, environment and verdict for a failing case."""
    from src.parsing.renderer import render
    from src.store.snapshot import snapshot_write

    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "spec.spec"), "w", encoding="utf-8") as f:
        f.write(render(spec))
    snapshot_write(inst, os.path.join(directory, "snapshot.specdb"))
    with open(os.path.join(directory, "env.json"), "w", encoding="utf-8") as f:
        json.dump({k: {"sig": a.sig, "id": a.id, "label": a.label} for k, a in env.items()},
                  f, indent=2)
    with open(os.path.join(directory, "verdict.json"), "w", encoding="utf-8") as f:
        json.dump({
            "predicate": pred,
            "verdict": report.verdict.value,
            "detail": report.detail,
            "written_at": datetime.now().isoformat(),
        }, f, indent=2)
    logger.info(f"💾 Reproducer saved → {directory}")
    return directory
