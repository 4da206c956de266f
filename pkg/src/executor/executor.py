"""
executor.py
===========
Backtracking executor for normalized predicates.

A transaction copies the committed instance, then repeats rounds over every
instance of the clause matrix until a whole round appends nothing to the
update log. A false clause instance is realized by choosing one of its
special formulas: an Empty formula deletes every tuple currently in its
value, a NonEmpty formula inserts a chosen candidate tuple. Inserts and
deletes recurse through the expression structure down to mutable relations;
a relation tuple is never both inserted and deleted in one transaction.

Usage:
    from src.executor.executor import run_predicate
    result = run_predicate(np, {"c": cs311, "s": pete}, instance)
    if result.ok:
        instance = result.post
"""

import itertools
import logging
import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

from src.config.settings import Settings, load_settings
from src.executor.search import SearchState
from src.kernel.errors import BudgetExceeded, SessionError
from src.kernel.kernel_ast import (
    Closure, Converse, Diff, Expr, Intersect, Join, NoneExpr, Product, RelName, Tag, Union, Var,
)
from src.normalization.normalizer import NormalizedPredicate
from src.normalization.special_form import Clause, Polarity, SpecialFormula, mk_intersect
from src.store.evaluator import Env, candidates, eval_expr
from src.store.instance import Atom, Instance, Kind, RelationDecl, Tuple_
from src.store.update_log import UpdateLog

logger = logging.getLogger("specdb.executor")

Item = Tuple[Clause, Dict[str, Atom]]

_NO_SUCCESS = object()


class FailureKind(str, Enum):
    EXHAUSTED = "exhausted"
    BUDGET = "budget"


@dataclass(frozen=True)
class Failure:
    kind: FailureKind
    message: str

    def __str__(self) -> str:
        return f"{self.kind.value}: {self.message}"


@dataclass
class ExecutionResult:
    post: Optional[Instance]
    failure: Optional[Failure] = None
    updates: UpdateLog = field(default_factory=UpdateLog)
    rounds: int = 0
    choice_points: int = 0
    trace: List[str] = field(default_factory=list)
    round_marks: List[int] = field(default_factory=list)
    # post-state with the transaction's Skolem relations still attached
    witness: Optional[Instance] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


class Executor:
    def __init__(
        self,
        np: NormalizedPredicate,
        env: Mapping[str, Atom],
        pre: Instance,
        settings: Settings,
        trace: bool = False,
    ):
        self.np = np
        self.pre = pre
        post = pre.copy()
        for decl in np.skolem_decls:
            post.add_relation(RelationDecl(decl.name, decl.cols, Kind.SKOLEM))
        seed = settings.random_seed if settings.strategy.startswith("random:") else None
        self.state = SearchState(
            pre, post, settings.max_choices, trace=trace, seed=seed,
            debug_checks=settings.debug_checks,
        )
        self.env: Env = dict(env)
        state_atom = pre.state_atom
        self.env[np.pre_param] = state_atom
        self.env[np.post_param] = state_atom
        self.state_atom = state_atom
        self.max_rounds = settings.max_rounds or 2 * post.mutable_tuple_space() + 2
        self.items = self._instantiate()
        self.round_marks: List[int] = []
        self.failed_rounds: Set[frozenset] = set()
        self.failed_steps: Set[tuple] = set()

    @property
    def post(self) -> Instance:
        return self.state.post

    def _instantiate(self) -> List[Item]:
        """Every binding of each clause's universal variables over the universe."""
        items: List[Item] = []
        for clause in self.np.matrix:
            domains = [self.pre.atoms(self.np.universal_type(v)) for v in clause.scope]
            for combo in itertools.product(*domains):
                items.append((clause, dict(zip(clause.scope, combo))))
        return items

    # ══════════════════════════════════════════════════════════════
    # EVALUATION
    # ══════════════════════════════════════════════════════════════

    def value(self, e: Expr, env: Env) -> Set[Tuple_]:
        return eval_expr(e, self.pre, self.post, env)

    def literal_holds(self, lit: SpecialFormula, env: Env) -> bool:
        current = self.value(lit.exprs[0], env)
        for e in lit.exprs[1:]:
            if not current:
                break
            current = current & self.value(e, env)
        return bool(current) == (lit.polarity == Polarity.NONEMPTY)

    def _env(self, item: Item) -> Env:
        return {**self.env, **item[1]}

    def item_holds(self, item: Item) -> bool:
        env = self._env(item)
        return any(self.literal_holds(lit, env) for lit in item[0].literals)

    def matrix_holds(self) -> bool:
        return all(self.item_holds(item) for item in self.items)

    # ══════════════════════════════════════════════════════════════
    # FIXED-POINT ROUNDS
    # ══════════════════════════════════════════════════════════════

    def rounds(self, n: int) -> Iterator[None]:
        if n > self.max_rounds:
            raise BudgetExceeded("round", self.max_rounds)
        start = self.state.log.key()
        if start in self.failed_rounds:
            return
        self.state.emit(f"ROUND {n}")
        self.round_marks.append(len(self.state.log))
        found = False
        for _ in self.realize_from(0, start, len(self.state.log), n):
            found = True
            yield
        self.round_marks.pop()
        if not found:
            self.failed_rounds.add(start)

    def realize_from(self, i: int, start: frozenset, mark: int, n: int) -> Iterator[None]:
        while i < len(self.items) and self.item_holds(self.items[i]):
            i += 1
        if i == len(self.items):
            if len(self.state.log) > mark:
                yield from self.rounds(n + 1)
            elif self.matrix_holds():
                yield
            return

        key = (i, start, self.state.log.key())
        if key in self.failed_steps:
            return
        found = False
        for _ in self.realize(self.items[i]):
            for _ in self.realize_from(i + 1, start, mark, n):
                found = True
                yield
        if not found:
            self.failed_steps.add(key)

    def realize(self, item: Item) -> Iterator[None]:
        env = self._env(item)
        for lit in self.state.choose(item[0].literals):
            yield from self.realize_literal(lit, env)

    def realize_literal(self, lit: SpecialFormula, env: Env) -> Iterator[None]:
        expr = lit.exprs[0]
        for e in lit.exprs[1:]:
            expr = mk_intersect(expr, e)
        if lit.polarity == Polarity.EMPTY:
            current = sorted(self.value(expr, env))
            yield from self.each(current, lambda t: self.delete_tuple(t, expr, env))
            return
        current = self.value(expr, env)
        space = candidates(expr.cols, self.post)
        ordered = [t for t in space if t in current] + [t for t in space if t not in current]
        for t in self.state.choose(ordered):
            yield from self.insert_tuple(t, expr, env)

    def each(self, items: Sequence, step: Callable[..., Iterator[None]]) -> Iterator[None]:
        """Run ``step`` on every item in order, backtracking across all of them."""
        if not items:
            yield
            return
        for _ in step(items[0]):
            yield from self.each(items[1:], step)

    # ══════════════════════════════════════════════════════════════
    # INSERT / DELETE
    # ══════════════════════════════════════════════════════════════

    def _target(self, rel: RelName, t: Tuple_) -> Optional[Tuple[str, Tuple_]]:
        """Stored (relation, tuple) written by an update of ``rel``; None if read-only here."""
        decl = self.post.schema[rel.name]
        if not decl.mutable or rel.tag != Tag.POST:
            return None
        if decl.kind == Kind.STATE_FIELD:
            return rel.name, (self.state_atom,) + t
        return rel.name, t

    def insert_tuple(self, t: Tuple_, e: Expr, env: Env) -> Iterator[None]:
        """Make ``t`` a member of ``e``'s value."""
        if t in self.value(e, env):
            yield
            return
        if isinstance(e, (Var, NoneExpr)):
            return
        if isinstance(e, RelName):
            target = self._target(e, t)
            if target is not None:
                yield from self.state.insert(*target)
            return
        if isinstance(e, Union):
            for side in self.state.choose((e.left, e.right)):
                yield from self.insert_tuple(t, side, env)
        elif isinstance(e, Intersect):
            for _ in self.insert_tuple(t, e.left, env):
                yield from self.insert_tuple(t, e.right, env)
        elif isinstance(e, Diff):
            for _ in self.insert_tuple(t, e.left, env):
                yield from self.delete_tuple(t, e.right, env)
        elif isinstance(e, Converse):
            yield from self.insert_tuple(t[::-1], e.expr, env)
        elif isinstance(e, Product):
            k = len(e.left.cols)
            for _ in self.insert_tuple(t[:k], e.left, env):
                yield from self.insert_tuple(t[k:], e.right, env)
        elif isinstance(e, Join):
            yield from self._insert_join(t, e, env)
        elif isinstance(e, Closure):
            yield from self.insert_tuple(t, e.expr, env)
        else:
            raise TypeError(f"not an expression: {e!r}")

    def _insert_join(self, t: Tuple_, e: Join, env: Env) -> Iterator[None]:
        k = len(e.left.cols) - 1
        head, tail = t[:k], t[k:]
        left, right = self.value(e.left, env), self.value(e.right, env)

        def support(w: Atom) -> int:
            return -((head + (w,)) in left) - (((w,) + tail) in right)

        witnesses = sorted(self.post.atoms(e.left.cols[-1]), key=lambda w: (support(w), w))
        for w in self.state.choose(witnesses):
            for _ in self.insert_tuple(head + (w,), e.left, env):
                yield from self.insert_tuple((w,) + tail, e.right, env)

    def delete_tuple(self, t: Tuple_, e: Expr, env: Env) -> Iterator[None]:
        """Make ``t`` a non-member of ``e``'s value."""
        if t not in self.value(e, env):
            yield
            return
        if isinstance(e, Var):
            return
        if isinstance(e, RelName):
            target = self._target(e, t)
            if target is not None:
                yield from self.state.delete(*target)
            return
        if isinstance(e, Union):
            for _ in self.delete_tuple(t, e.left, env):
                yield from self.delete_tuple(t, e.right, env)
        elif isinstance(e, Intersect):
            for side in self.state.choose((e.left, e.right)):
                yield from self.delete_tuple(t, side, env)
        elif isinstance(e, Diff):
            for delete_left in self.state.choose((True, False)):
                if delete_left:
                    yield from self.delete_tuple(t, e.left, env)
                else:
                    yield from self.insert_tuple(t, e.right, env)
        elif isinstance(e, Converse):
            yield from self.delete_tuple(t[::-1], e.expr, env)
        elif isinstance(e, Product):
            k = len(e.left.cols)
            sides = ((t[:k], e.left), (t[k:], e.right))
            for part, side in self.state.choose(sides):
                yield from self.delete_tuple(part, side, env)
        elif isinstance(e, Join):
            yield from self._delete_join(t, e, env)
        elif isinstance(e, Closure):
            yield from self._delete_closure(t, e, env)
        else:
            raise TypeError(f"not an expression: {e!r}")

    def _delete_join(self, t: Tuple_, e: Join, env: Env) -> Iterator[None]:
        k = len(e.left.cols) - 1
        head, tail = t[:k], t[k:]
        left, right = self.value(e.left, env), self.value(e.right, env)
        witnesses = [
            w for w in self.post.atoms(e.left.cols[-1])
            if (head + (w,)) in left and ((w,) + tail) in right
        ]
        right_first = len(e.left.cols) == 1 and len(e.right.cols) > 1

        def break_witness(w: Atom) -> Iterator[None]:
            sides = [(head + (w,), e.left), ((w,) + tail, e.right)]
            if right_first:
                sides.reverse()
            if not all(part in self.value(side, env) for part, side in sides):
                yield
                return
            for part, side in self.state.choose(sides):
                yield from self.delete_tuple(part, side, env)

        yield from self.each(witnesses, break_witness)

    def _delete_closure(self, t: Tuple_, e: Closure, env: Env) -> Iterator[None]:
        edges = self.value(e.expr, env)
        paths = _simple_paths(edges, t[0], t[1])

        def break_path(path: List[Tuple_]) -> Iterator[None]:
            current = self.value(e.expr, env)
            if not all(edge in current for edge in path):
                yield
                return
            for edge in self.state.choose(path):
                yield from self.delete_tuple(edge, e.expr, env)

        yield from self.each(paths, break_path)


def _simple_paths(edges: Set[Tuple_], source: Atom, target: Atom) -> List[List[Tuple_]]:
    """Every path source → target that visits no atom twice (a cycle may end at source)."""
    succ: Dict[Atom, List[Atom]] = {}
    for a, b in sorted(edges):
        succ.setdefault(a, []).append(b)
    paths: List[List[Tuple_]] = []

    def walk(node: Atom, seen: Set[Atom], path: List[Tuple_]) -> None:
        for nxt in succ.get(node, []):
            step = path + [(node, nxt)]
            if nxt == target:
                paths.append(step)
            elif nxt not in seen:
                walk(nxt, seen | {nxt}, step)

    walk(source, {source}, [])
    return paths


# ══════════════════════════════════════════════════════════════════
# TRANSACTION
# ══════════════════════════════════════════════════════════════════

def run_predicate(
    np: NormalizedPredicate,
    env: Mapping[str, Atom],
    instance: Instance,
    settings: Optional[Settings] = None,
    trace: Optional[bool] = None,
) -> ExecutionResult:
    """
    Execute ``np`` on ``instance`` under ``env`` (call parameters → atoms).

    The committed instance is never modified; on success ``result.post`` is
    the new instance with the transaction's Skolem relations removed.
    """
    settings = settings or load_settings()
    trace = settings.trace if trace is None else trace
    _check_call(np, env, instance)
    sys.setrecursionlimit(max(sys.getrecursionlimit(), settings.recursion_limit))

    ex = Executor(np, env, instance, settings, trace=trace)
    failure: Optional[Failure] = None
    search = ex.rounds(1)
    try:
        if next(search, _NO_SUCCESS) is _NO_SUCCESS:
            failure = Failure(FailureKind.EXHAUSTED, f"no post-state satisfies {np.name} from this state")
    except BudgetExceeded as e:
        failure = Failure(FailureKind.BUDGET, str(e))

    st = ex.state
    result = ExecutionResult(
        post=None,
        failure=failure,
        updates=UpdateLog(st.log.entries),
        rounds=len(ex.round_marks) if failure is None else 0,
        choice_points=st.choices,
        trace=list(st.trace),
        round_marks=list(ex.round_marks) if failure is None else [],
    )
    if failure is None:
        post = st.post.copy()
        post.drop_relations(Kind.SKOLEM)
        if settings.debug_checks:
            post.check_well_formed()
        result.post = post
        result.witness = st.post.copy()
    logger.debug(
        f"{np.name}: {'ok' if result.ok else failure}, {len(result.updates)} updates, "
        f"{result.rounds} rounds, {result.choice_points} choices"
    )
    return result


def _check_call(np: NormalizedPredicate, env: Mapping[str, Atom], instance: Instance) -> None:
    if instance.state_atom is None:
        raise SessionError(f"instance has no single '{np.state_sig}' atom")
    for prm in np.call_params:
        atom = env.get(prm.name)
        if atom is None:
            raise SessionError(f"{np.name}: parameter '{prm.name}' is unbound")
        if atom.sig != prm.type or atom not in instance.universe.get(prm.type, []):
            raise SessionError(f"{np.name}: '{atom.label}' is not a {prm.type}")
