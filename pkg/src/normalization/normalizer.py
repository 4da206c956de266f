"""
normalizer.py
=============
Predicate body + facts → ∀x⃗ . ⋀ᵢ ⋁ⱼ σᵢⱼ over special formulas.

Pipeline:
    standardize apart → prime facts → bound rewrite → NNF → Skolemize
    → State joins compiled to PRE/POST tags → special form

Usage:
    from src.normalization.normalizer import normalize_predicate
    np = normalize_predicate(spec.predicate("Enroll"), spec.all_facts())
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from src.kernel.kernel_ast import (
    And, Closure, Converse, Diff, Eq, Exists, Expr, Fact, Forall, Formula, In, Intersect,
    Join, Not, NoneExpr, Or, Param, Predicate, Product, RelName, Tag, Union, Var,
    conjoin, formula_exprs, fresh_name, iter_exprs, standardize_apart, substitute,
)
from src.normalization.special_form import Clause, mk_join, to_special_form

logger = logging.getLogger("specdb.normalizer")

SKOLEM_PREFIX = "$sk_"


@dataclass(frozen=True)
class SkolemDecl:
    name: str
    cols: Tuple[str, ...]


@dataclass(frozen=True)
class NormalizedPredicate:
    name: str
    params: Tuple[Param, ...]
    state_sig: str
    pre_param: str
    post_param: str
    universals: Tuple[Tuple[str, str], ...]
    matrix: Tuple[Clause, ...]
    skolem_decls: Tuple[SkolemDecl, ...] = ()
    # the universal formula the matrix was built from (tags compiled)
    universal_body: Optional[Formula] = field(default=None, compare=False, repr=False)

    def universal_type(self, var: str) -> str:
        return dict(self.universals)[var]

    @property
    def call_params(self) -> Tuple[Param, ...]:
        return tuple(p for p in self.params if p.type != self.state_sig)


# ══════════════════════════════════════════════════════════════════
# HELPERS
# ══════════════════════════════════════════════════════════════════

def _state_sig_of(p: Predicate) -> str:
    for prm in p.params:
        if prm.name.endswith("'"):
            return prm.type
    raise ValueError(f"predicate '{p.name}' has no primed State parameter")


def _names_in(f: Formula) -> Set[str]:
    names: Set[str] = set()
    for e in formula_exprs(f):
        names.update(x.name for x in iter_exprs(e) if isinstance(x, (RelName, Var)))
    return names


def _is_sig(e: Expr) -> bool:
    return isinstance(e, RelName) and e.cols is not None and e.cols == (e.name,)


def _sig_rel(name: str) -> RelName:
    return RelName(name, Tag.IMMUTABLE, cols=(name,))


# ══════════════════════════════════════════════════════════════════
# FACT PRIMING
# ══════════════════════════════════════════════════════════════════

def _drop_state_quantifier(f: Formula, state_sig: str, post: Var) -> Formula:
    if isinstance(f, (Forall, Exists)):
        if isinstance(f.bound, RelName) and f.bound.name == state_sig:
            return _drop_state_quantifier(substitute(f.body, {f.var: post}), state_sig, post)
        return type(f)(f.var, f.bound, _drop_state_quantifier(f.body, state_sig, post), f.span)
    if isinstance(f, Not):
        return Not(_drop_state_quantifier(f.body, state_sig, post), f.span)
    if isinstance(f, (And, Or)):
        return type(f)(
            _drop_state_quantifier(f.left, state_sig, post),
            _drop_state_quantifier(f.right, state_sig, post),
            f.span,
        )
    return f


def prime_facts(p: Predicate, facts: Sequence[Fact], taken: Optional[Set[str]] = None) -> Predicate:
    """
    Conjoin every fact onto the body with its State variable bound to the
    primed parameter; the fact's own State quantifier is dropped.
    """
    if not facts:
        return p
    state_sig = _state_sig_of(p)
    _, post = p.state_params(state_sig)
    post_var = Var(post, cols=(state_sig,))
    if taken is None:
        taken = {prm.name for prm in p.params} | _names_in(p.body)
    parts = [p.body]
    for fact in facts:
        body = standardize_apart(fact.body, taken)
        parts.append(_drop_state_quantifier(body, state_sig, post_var))
    return Predicate(p.name, p.params, conjoin(parts), p.span)


# ══════════════════════════════════════════════════════════════════
# BOUNDS + NNF
# ══════════════════════════════════════════════════════════════════

def rewrite_bounds(f: Formula) -> Formula:
    """Quantifiers range over whole signatures; the bounding expression moves into the body."""
    if isinstance(f, (In, Eq)):
        return f
    if isinstance(f, Not):
        return Not(rewrite_bounds(f.body), f.span)
    if isinstance(f, (And, Or)):
        return type(f)(rewrite_bounds(f.left), rewrite_bounds(f.right), f.span)
    body = rewrite_bounds(f.body)
    if _is_sig(f.bound):
        return type(f)(f.var, f.bound, body, f.span)
    sig = f.bound.cols[0]
    member = In(Var(f.var, cols=(sig,)), f.bound)
    if isinstance(f, Forall):
        return Forall(f.var, _sig_rel(sig), Or(Not(member), body), f.span)
    return Exists(f.var, _sig_rel(sig), And(member, body), f.span)


def nnf(f: Formula, negate: bool = False) -> Formula:
    """Negation normal form; ``not (a = b)`` becomes ``a not in b or b not in a``."""
    if isinstance(f, In):
        return Not(f) if negate else f
    if isinstance(f, Eq):
        if negate:
            return Or(Not(In(f.left, f.right)), Not(In(f.right, f.left)))
        return f
    if isinstance(f, Not):
        return nnf(f.body, not negate)
    if isinstance(f, And):
        ctor = Or if negate else And
        return ctor(nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Or):
        ctor = And if negate else Or
        return ctor(nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Forall):
        ctor = Exists if negate else Forall
        return ctor(f.var, f.bound, nnf(f.body, negate))
    if isinstance(f, Exists):
        ctor = Forall if negate else Exists
        return ctor(f.var, f.bound, nnf(f.body, negate))
    raise TypeError(f"not a formula: {f!r}")


# ══════════════════════════════════════════════════════════════════
# SKOLEMIZATION
# ══════════════════════════════════════════════════════════════════

def _skolem_term(name: str, cols: Tuple[str, ...], xs: Sequence[Tuple[str, str]]) -> Expr:
    """x_k.(…(x_1.$sk_y))"""
    term: Expr = RelName(name, Tag.POST, cols=cols)
    for var, sig in xs:
        term = mk_join(Var(var, cols=(sig,)), term)
    return term


def _at_most_one(decl: SkolemDecl, n_args: int, taken: Set[str]) -> Formula:
    """all x⃗, y1, y2 | not (y1 in term and y2 in term) or y1 = y2"""
    arg_types = decl.cols[:n_args]
    target = decl.cols[-1]
    xs = []
    for sig in arg_types:
        name = fresh_name("x", taken)
        taken.add(name)
        xs.append((name, sig))
    term = _skolem_term(decl.name, decl.cols, xs)
    y1 = fresh_name("y", taken)
    taken.add(y1)
    y2 = fresh_name("y", taken)
    taken.add(y2)
    v1, v2 = Var(y1, cols=(target,)), Var(y2, cols=(target,))
    body: Formula = Or(Or(Not(In(v1, term)), Not(In(v2, term))), Eq(v1, v2))
    body = Forall(y1, _sig_rel(target), Forall(y2, _sig_rel(target), body))
    for name, sig in reversed(xs):
        body = Forall(name, _sig_rel(sig), body)
    return body


def _skolemize(
    f: Formula,
    xs: List[Tuple[str, str]],
    decls: List[SkolemDecl],
    taken: Set[str],
) -> Formula:
    if isinstance(f, (In, Eq, Not)):
        return f
    if isinstance(f, (And, Or)):
        return type(f)(_skolemize(f.left, xs, decls, taken), _skolemize(f.right, xs, decls, taken))
    if isinstance(f, Forall):
        sig = f.bound.cols[0]
        body = _skolemize(f.body, xs + [(f.var, sig)], decls, taken)
        return Forall(f.var, f.bound, body, f.span)
    # Exists
    target = f.bound.cols[0]
    name = SKOLEM_PREFIX + f.var
    while name in taken:
        name = SKOLEM_PREFIX + fresh_name(f.var, taken)
    taken.add(name)
    decl = SkolemDecl(name, tuple(sig for _, sig in xs) + (target,))
    decls.append(decl)
    term = _skolem_term(name, decl.cols, xs)
    body = substitute(f.body, {f.var: term})
    nonempty = Not(In(term, NoneExpr(cols=(target,))))
    return And(nonempty, _skolemize(body, xs, decls, taken))


def skolemize(p: Predicate, taken: Optional[Set[str]] = None) -> Tuple[Predicate, List[SkolemDecl]]:
    """
    Replace every existential by a POST Skolem relation. The body must be in
    negation normal form with signature bounds; the result is universal.
    """
    taken = set(taken) if taken is not None else ({prm.name for prm in p.params} | _names_in(p.body))
    decls: List[SkolemDecl] = []
    body = _skolemize(p.body, [], decls, taken)
    n_args = {d.name: len(d.cols) - 1 for d in decls}
    constraints = [_at_most_one(d, n_args[d.name], taken) for d in decls]
    if constraints:
        body = conjoin([body] + constraints)
    return Predicate(p.name, p.params, body, p.span), decls


# ══════════════════════════════════════════════════════════════════
# STATE-JOIN COMPILATION
# ══════════════════════════════════════════════════════════════════

def _compile_expr(e: Expr, pre: str, post: str) -> Expr:
    if isinstance(e, Join) and isinstance(e.left, Var) and isinstance(e.right, RelName) \
            and e.right.tag == Tag.UNRESOLVED and e.left.name in (pre, post):
        tag = Tag.PRE if e.left.name == pre else Tag.POST
        return RelName(e.right.name, tag, cols=e.right.cols[1:], span=e.span)
    if isinstance(e, (Union, Intersect, Diff, Join, Product)):
        return type(e)(_compile_expr(e.left, pre, post), _compile_expr(e.right, pre, post), e.cols, e.span)
    if isinstance(e, (Converse, Closure)):
        return type(e)(_compile_expr(e.expr, pre, post), e.cols, e.span)
    return e


def compile_state_joins(f: Formula, pre: str, post: str) -> Formula:
    """``s.field`` → field[PRE], ``s'.field`` → field[POST]."""
    if isinstance(f, (In, Eq)):
        return type(f)(_compile_expr(f.left, pre, post), _compile_expr(f.right, pre, post), f.span)
    if isinstance(f, Not):
        return Not(compile_state_joins(f.body, pre, post), f.span)
    if isinstance(f, (And, Or)):
        return type(f)(compile_state_joins(f.left, pre, post), compile_state_joins(f.right, pre, post), f.span)
    return type(f)(f.var, _compile_expr(f.bound, pre, post), compile_state_joins(f.body, pre, post), f.span)


def _universals(f: Formula, out: List[Tuple[str, str]]) -> None:
    if isinstance(f, Not):
        _universals(f.body, out)
    elif isinstance(f, (And, Or)):
        _universals(f.left, out)
        _universals(f.right, out)
    elif isinstance(f, Forall):
        out.append((f.var, f.bound.cols[0]))
        _universals(f.body, out)


# ══════════════════════════════════════════════════════════════════
# PIPELINE
# ══════════════════════════════════════════════════════════════════

def normalize_predicate(p: Predicate, facts: Sequence[Fact]) -> NormalizedPredicate:
    """Compose the pipeline on a checked predicate and the spec's (checked) facts."""
    state_sig = _state_sig_of(p)
    pre, post = p.state_params(state_sig)

    taken = {prm.name for prm in p.params}
    body = standardize_apart(p.body, taken)
    primed = prime_facts(Predicate(p.name, p.params, body, p.span), facts, taken)

    body = nnf(rewrite_bounds(primed.body))
    skolemized, decls = skolemize(Predicate(p.name, p.params, body, p.span), taken)
    universal = compile_state_joins(skolemized.body, pre, post)

    universals: List[Tuple[str, str]] = []
    _universals(universal, universals)
    order = {v: i for i, (v, _) in enumerate(universals)}
    matrix = to_special_form(universal, state_sig, order)

    logger.debug(
        f"Normalized {p.name}: {len(matrix)} clauses, {len(universals)} universals, "
        f"{len(decls)} Skolem relations"
    )
    return NormalizedPredicate(
        name=p.name,
        params=p.params,
        state_sig=state_sig,
        pre_param=pre,
        post_param=post,
        universals=tuple(universals),
        matrix=tuple(matrix),
        skolem_decls=tuple(decls),
        universal_body=universal,
    )


def normalize_spec(spec) -> Dict[str, NormalizedPredicate]:
    return {p.name: normalize_predicate(p, spec.all_facts()) for p in spec.predicates}
