"""
evaluator.py
============
Relational-algebra denotation of tagged expressions over a (pre, post) pair.

  PRE       → read from ``pre``   (State fields projected onto the State atom)
  POST      → read from ``post``  (likewise; Skolem relations read in full)
  IMMUTABLE → read from ``pre``   (pre = post on immutables)

Closure is the strict transitive closure, computed by iterative squaring.
"""

from collections import defaultdict
from typing import Dict, Iterable, List, Set

from src.kernel.kernel_ast import (
    Closure, Converse, Diff, Expr, Intersect, Join, NoneExpr, Product, RelName, Tag,
    Union, Var,
)
from src.store.instance import Atom, Instance, Kind, Tuple_

Env = Dict[str, Atom]


def join(left: Iterable[Tuple_], right: Iterable[Tuple_]) -> Set[Tuple_]:
    by_head: Dict[Atom, List[Tuple_]] = defaultdict(list)
    for t in right:
        by_head[t[0]].append(t)
    out: Set[Tuple_] = set()
    for s in left:
        for t in by_head.get(s[-1], ()):
            joined = s[:-1] + t[1:]
            if joined:
                out.add(joined)
    return out


def closure(rel: Set[Tuple_]) -> Set[Tuple_]:
    result = set(rel)
    while True:
        step = result | join(result, result)
        if step == result:
            return result
        result = step


def read_relation(rel: RelName, pre: Instance, post: Instance) -> Set[Tuple_]:
    inst = post if rel.tag == Tag.POST else pre
    decl = inst.schema[rel.name]
    if decl.kind == Kind.STATE_FIELD and rel.tag in (Tag.PRE, Tag.POST):
        return inst.state_value(rel.name)
    return set(inst.value(rel.name))


def eval_expr(e: Expr, pre: Instance, post: Instance, env: Env) -> Set[Tuple_]:
    """Value of ``e``; pure, deterministic once sorted."""
    if isinstance(e, RelName):
        return read_relation(e, pre, post)
    if isinstance(e, Var):
        return {(env[e.name],)}
    if isinstance(e, NoneExpr):
        return set()
    if isinstance(e, Union):
        return eval_expr(e.left, pre, post, env) | eval_expr(e.right, pre, post, env)
    if isinstance(e, Intersect):
        return eval_expr(e.left, pre, post, env) & eval_expr(e.right, pre, post, env)
    if isinstance(e, Diff):
        return eval_expr(e.left, pre, post, env) - eval_expr(e.right, pre, post, env)
    if isinstance(e, Join):
        return join(eval_expr(e.left, pre, post, env), eval_expr(e.right, pre, post, env))
    if isinstance(e, Product):
        right = eval_expr(e.right, pre, post, env)
        return {s + t for s in eval_expr(e.left, pre, post, env) for t in right}
    if isinstance(e, Converse):
        return {tuple(reversed(t)) for t in eval_expr(e.expr, pre, post, env)}
    if isinstance(e, Closure):
        return closure(eval_expr(e.expr, pre, post, env))
    raise TypeError(f"not an expression: {e!r}")


def candidates(cols, inst: Instance) -> List[Tuple_]:
    """Every tuple of the given column types, lexicographic by atom id."""
    out: List[Tuple_] = [()]
    for col in cols:
        atoms = inst.atoms(col)
        out = [t + (a,) for t in out for a in atoms]
    return out
