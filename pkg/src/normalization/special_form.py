"""
special_form.py
===============
Quantifier-free, negation-normal formulas → conjunction of clauses of
special formulas ``(e1 & … & ek) = none`` / ``!= none``.

Every operand is union-free and none-free; converse sits on relation names
and variables (compound operands whose reversal is not expressible with
binary converse keep an outer Converse). Union under closure is left in
place: ``^(a + b)`` is one operand.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from src.kernel.kernel_ast import (
    And, Closure, Cols, Converse, Diff, Eq, Expr, Forall, Formula, In, Intersect, Join,
    Not, NoneExpr, Or, Product, RelName, Tag, Union, Var,
)
from src.store.instance import EMPTY_RELATION


class Polarity(str, Enum):
    EMPTY = "empty"
    NONEMPTY = "nonempty"


@dataclass(frozen=True)
class SpecialFormula:
    exprs: Tuple[Expr, ...]
    polarity: Polarity

    @property
    def cols(self) -> Optional[Cols]:
        return self.exprs[0].cols


@dataclass(frozen=True)
class Clause:
    """Disjunction of special formulas, universally closed over ``scope``."""

    scope: Tuple[str, ...]
    literals: Tuple[SpecialFormula, ...]


# ══════════════════════════════════════════════════════════════════
# TYPED CONSTRUCTORS
# ══════════════════════════════════════════════════════════════════

def mk_join(a: Expr, b: Expr) -> Expr:
    return Join(a, b, cols=a.cols[:-1] + b.cols[1:])


def mk_product(a: Expr, b: Expr) -> Expr:
    return Product(a, b, cols=a.cols + b.cols)


def mk_intersect(a: Expr, b: Expr) -> Expr:
    return Intersect(a, b, cols=a.cols)


def mk_diff(a: Expr, b: Expr) -> Expr:
    return Diff(a, b, cols=a.cols)


def mk_union(a: Expr, b: Expr) -> Expr:
    return Union(a, b, cols=a.cols)


def empty_rel(state_sig: str) -> RelName:
    return RelName(EMPTY_RELATION, Tag.IMMUTABLE, cols=(state_sig,))


def true_literal(state_sig: str) -> SpecialFormula:
    return SpecialFormula((empty_rel(state_sig),), Polarity.EMPTY)


def false_literal(state_sig: str) -> SpecialFormula:
    return SpecialFormula((empty_rel(state_sig),), Polarity.NONEMPTY)


def is_true(lit: SpecialFormula) -> bool:
    return lit.polarity == Polarity.EMPTY and _is_empty_rel(lit)


def is_false(lit: SpecialFormula) -> bool:
    return lit.polarity == Polarity.NONEMPTY and _is_empty_rel(lit)


def _is_empty_rel(lit: SpecialFormula) -> bool:
    return len(lit.exprs) == 1 and isinstance(lit.exprs[0], RelName) \
        and lit.exprs[0].name == EMPTY_RELATION


# ══════════════════════════════════════════════════════════════════
# EXPRESSION REWRITING
# ══════════════════════════════════════════════════════════════════

def conv(e: Expr) -> Expr:
    """Converse of a union-free expression, pushed to the leaves by tuple reversal."""
    arity = len(e.cols)
    if arity == 1:
        return e
    if isinstance(e, RelName):
        return Converse(e, cols=tuple(reversed(e.cols)))
    if isinstance(e, Converse):
        return e.expr
    if isinstance(e, (Intersect, Diff)):
        return type(e)(conv(e.left), conv(e.right), cols=tuple(reversed(e.cols)))
    if isinstance(e, Union):
        return mk_union(conv(e.left), conv(e.right))
    if isinstance(e, Closure):
        inner = conv(e.expr)
        return Closure(inner, cols=inner.cols)
    if isinstance(e, Product) and len(e.left.cols) == 1 and len(e.right.cols) == 1:
        return mk_product(e.right, e.left)
    if isinstance(e, Join) and len(e.left.cols) == 2 and len(e.right.cols) == 2:
        return mk_join(conv(e.right), conv(e.left))
    return Converse(e, cols=tuple(reversed(e.cols)))


def terms(e: Expr) -> List[Expr]:
    """
    Union-free terms whose union equals ``e``; an empty list means ``none``.
    Intersect, Join and Product distribute; ``a - (b1 + b2)`` is ``a - b1 - b2``.
    """
    if isinstance(e, (RelName, Var)):
        return [e]
    if isinstance(e, NoneExpr):
        return []
    if isinstance(e, Union):
        return _dedup(terms(e.left) + terms(e.right))
    if isinstance(e, Intersect):
        right = terms(e.right)
        return _dedup([mk_intersect(a, b) for a in terms(e.left) for b in right])
    if isinstance(e, Join):
        right = terms(e.right)
        return _dedup([mk_join(a, b) for a in terms(e.left) for b in right])
    if isinstance(e, Product):
        right = terms(e.right)
        return _dedup([mk_product(a, b) for a in terms(e.left) for b in right])
    if isinstance(e, Diff):
        subtract = terms(e.right)
        out = []
        for a in terms(e.left):
            for b in subtract:
                a = mk_diff(a, b)
            out.append(a)
        return out
    if isinstance(e, Converse):
        return _dedup([conv(t) for t in terms(e.expr)])
    if isinstance(e, Closure):
        inner = terms(e.expr)
        if not inner:
            return []
        body = inner[0]
        for t in inner[1:]:
            body = mk_union(body, t)
        return [Closure(body, cols=e.cols)]
    raise TypeError(f"not an expression: {e!r}")


def _dedup(items: List[Expr]) -> List[Expr]:
    seen, out = set(), []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out


def factors(e: Expr) -> List[Expr]:
    """Flatten a top-level intersection into its operands."""
    if isinstance(e, Intersect):
        return factors(e.left) + factors(e.right)
    return [e]


def _minus_all(d: Expr, subtract: Sequence[Expr]) -> Tuple[Expr, ...]:
    """Operands of ``d - f1 - … - fn``, with the differences applied to d's last factor."""
    parts = factors(d)
    last = parts[-1]
    for f in subtract:
        last = mk_diff(last, f)
    return tuple(parts[:-1]) + (last,)


def _is_point(e: Expr) -> bool:
    """A product of variables denotes exactly one tuple."""
    if isinstance(e, Var):
        return True
    return isinstance(e, Product) and _is_point(e.left) and _is_point(e.right)


# ══════════════════════════════════════════════════════════════════
# BASIC FORMULAS
# ══════════════════════════════════════════════════════════════════

Literals = List[SpecialFormula]


def basic_in(left: Expr, right: Expr, state_sig: str) -> List[Literals]:
    """``D in F`` → one single-literal clause per term of D."""
    subtract = terms(right)
    return [[SpecialFormula(_minus_all(d, subtract), Polarity.EMPTY)] for d in terms(left)]


def basic_not_in(left: Expr, right: Expr, state_sig: str) -> List[Literals]:
    """``D not in F`` → one clause of NonEmpty differences (point D: one clause per term of F)."""
    lhs, subtract = terms(left), terms(right)
    if not lhs:
        return [[false_literal(state_sig)]]
    if len(lhs) == 1 and _is_point(lhs[0]):
        d = lhs[0]
        return [
            [SpecialFormula(tuple(factors(d)) + tuple(factors(f)), Polarity.EMPTY)]
            for f in subtract
        ]
    return [[SpecialFormula(_minus_all(d, subtract), Polarity.NONEMPTY) for d in lhs]]


# ══════════════════════════════════════════════════════════════════
# CLAUSE MATRIX
# ══════════════════════════════════════════════════════════════════

def _clauses(f: Formula, scope: Tuple[str, ...], state_sig: str) -> List[Tuple[Tuple[str, ...], Literals]]:
    if isinstance(f, In):
        return [(scope, lits) for lits in basic_in(f.left, f.right, state_sig)]
    if isinstance(f, Eq):
        return _clauses(And(In(f.left, f.right), In(f.right, f.left)), scope, state_sig)
    if isinstance(f, Not):
        body = f.body
        if isinstance(body, In):
            return [(scope, lits) for lits in basic_not_in(body.left, body.right, state_sig)]
        raise ValueError(f"formula is not in negation normal form: {f!r}")
    if isinstance(f, And):
        return _clauses(f.left, scope, state_sig) + _clauses(f.right, scope, state_sig)
    if isinstance(f, Or):
        left = _clauses(f.left, scope, state_sig)
        right = _clauses(f.right, scope, state_sig)
        out = []
        for sl, ll in left:
            for sr, lr in right:
                out.append((sl + tuple(v for v in sr if v not in sl), ll + lr))
        return out
    if isinstance(f, Forall):
        return _clauses(f.body, scope + (f.var,), state_sig)
    raise ValueError(f"unexpected formula in special-form input: {type(f).__name__}")


def _tidy(literals: Literals) -> Optional[Tuple[SpecialFormula, ...]]:
    """Dedup; None if the clause is trivially true; drop false disjuncts when others remain."""
    out: List[SpecialFormula] = []
    for lit in literals:
        if is_true(lit):
            return None
        if lit not in out:
            out.append(lit)
    kept = [lit for lit in out if not is_false(lit)]
    return tuple(kept) if kept else tuple(out[:1])


def to_special_form(
    f: Formula,
    state_sig: str,
    order: Optional[Dict[str, int]] = None,
) -> List[Clause]:
    """
    Conjunction-of-disjunctions of special formulas equivalent to ``f``.

    ``f`` is negation-normal and may contain Forall (its variable joins the
    scope of every clause below it) but no Exists. ``order`` fixes the
    scope ordering (declaration order of the universals).
    """
    matrix: List[Clause] = []
    for scope, literals in _clauses(f, (), state_sig):
        lits = _tidy(literals)
        if lits is None:
            continue
        if order:
            scope = tuple(sorted(scope, key=lambda v: order.get(v, len(order))))
        clause = Clause(scope, lits)
        if clause not in matrix:
            matrix.append(clause)
    if not matrix:
        matrix.append(Clause((), (true_literal(state_sig),)))
    return matrix

