"""
kernel_ast.py
=============
Abstract syntax of the kernel specification language.

  Expr    : RelName | Var | NoneExpr | Union | Intersect | Diff | Join
            | Product | Converse | Closure
  Formula : In | Eq | Not | And | Or | Forall | Exists

Nodes are frozen dataclasses. ``cols`` (the column-type sequence filled in by
the type checker) and ``span`` never take part in equality, so two ASTs are
equal exactly when they are structurally identical.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Set, Tuple, Union as TUnion

from src.kernel.errors import SourceSpan

Cols = Tuple[str, ...]


class Tag(str, Enum):
    """Where a relation-name occurrence reads its value from."""

    UNRESOLVED = "unresolved"   # State field, still under a State-variable join
    PRE = "pre"
    POST = "post"
    IMMUTABLE = "immutable"


def _meta():
    return field(default=None, compare=False, repr=False)


# ══════════════════════════════════════════════════════════════════
# EXPRESSIONS
# ══════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class RelName:
    name: str
    tag: Tag = Tag.UNRESOLVED
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Var:
    name: str
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class NoneExpr:
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Union:
    left: "Expr"
    right: "Expr"
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Intersect:
    left: "Expr"
    right: "Expr"
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Diff:
    left: "Expr"
    right: "Expr"
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Join:
    left: "Expr"
    right: "Expr"
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Product:
    left: "Expr"
    right: "Expr"
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Converse:
    expr: "Expr"
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Closure:
    expr: "Expr"
    cols: Optional[Cols] = _meta()
    span: Optional[SourceSpan] = _meta()


Expr = TUnion[RelName, Var, NoneExpr, Union, Intersect, Diff, Join, Product, Converse, Closure]
BINARY_EXPRS = (Union, Intersect, Diff, Join, Product)
UNARY_EXPRS = (Converse, Closure)


# ══════════════════════════════════════════════════════════════════
# FORMULAS
# ══════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class In:
    left: Expr
    right: Expr
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Eq:
    left: Expr
    right: Expr
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Not:
    body: "Formula"
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Forall:
    var: str
    bound: Expr
    body: "Formula"
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Exists:
    var: str
    bound: Expr
    body: "Formula"
    span: Optional[SourceSpan] = _meta()


Formula = TUnion[In, Eq, Not, And, Or, Forall, Exists]
QUANTIFIERS = (Forall, Exists)


# ══════════════════════════════════════════════════════════════════
# DECLARATIONS
# ══════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class ColumnItem:
    """One ``[set|lone] Name`` item of a field declaration, as written."""

    name: str
    multiplicity: Optional[str] = None


@dataclass(frozen=True)
class FieldDecl:
    name: str
    items: Tuple[ColumnItem, ...]
    cols: Optional[Cols] = _meta()          # owner sig first, dependents flattened
    multiplicity: str = field(default="set", compare=False)
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Signature:
    name: str
    fields: Tuple[FieldDecl, ...] = ()
    state_marked: bool = False
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Param:
    name: str
    type: str
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Predicate:
    name: str
    params: Tuple[Param, ...]
    body: Formula
    span: Optional[SourceSpan] = _meta()

    def param_type(self, name: str) -> Optional[str]:
        for p in self.params:
            if p.name == name:
                return p.type
        return None

    def state_params(self, state_sig: str) -> Tuple[str, str]:
        """(unprimed, primed) State parameter names."""
        names = [p.name for p in self.params if p.type == state_sig]
        pre = [n for n in names if not n.endswith("'")]
        post = [n for n in names if n.endswith("'")]
        return pre[0], post[0]

    def call_params(self, state_sig: str) -> Tuple[Param, ...]:
        """Parameters supplied by the caller: everything but the two State params."""
        return tuple(p for p in self.params if p.type != state_sig)


@dataclass(frozen=True)
class Fact:
    name: str
    body: Formula
    span: Optional[SourceSpan] = _meta()


@dataclass(frozen=True)
class Spec:
    signatures: Tuple[Signature, ...] = ()
    predicates: Tuple[Predicate, ...] = ()
    facts: Tuple[Fact, ...] = ()
    state_sig: Optional[str] = field(default=None, compare=False)
    derived_facts: Tuple[Fact, ...] = field(default=(), compare=False, repr=False)
    file: str = field(default="<spec>", compare=False, repr=False)

    # ── lookups ──────────────────────────────────────────────────
    def sig(self, name: str) -> Optional[Signature]:
        for s in self.signatures:
            if s.name == name:
                return s
        return None

    def predicate(self, name: str) -> Optional[Predicate]:
        for p in self.predicates:
            if p.name == name:
                return p
        return None

    def field_decl(self, name: str) -> Optional[Tuple[Signature, FieldDecl]]:
        for s in self.signatures:
            for f in s.fields:
                if f.name == name:
                    return s, f
        return None

    def sig_names(self) -> List[str]:
        return [s.name for s in self.signatures]

    def is_state_field(self, name: str) -> bool:
        found = self.field_decl(name)
        return found is not None and self.state_sig is not None and found[0].name == self.state_sig

    def relation_cols(self, name: str) -> Optional[Cols]:
        """Declared column types of a sig (unary) or field relation."""
        if self.sig(name) is not None:
            return (name,)
        found = self.field_decl(name)
        if found is not None:
            return found[1].cols
        return None

    def all_facts(self) -> Tuple[Fact, ...]:
        return tuple(self.facts) + tuple(self.derived_facts)


# ══════════════════════════════════════════════════════════════════
# TRAVERSAL HELPERS
# ══════════════════════════════════════════════════════════════════

def expr_children(e: Expr) -> Tuple[Expr, ...]:
    if isinstance(e, BINARY_EXPRS):
        return (e.left, e.right)
    if isinstance(e, UNARY_EXPRS):
        return (e.expr,)
    return ()


def iter_exprs(e: Expr) -> Iterator[Expr]:
    """Pre-order walk over an expression."""
    yield e
    for c in expr_children(e):
        yield from iter_exprs(c)


def formula_exprs(f: Formula) -> Iterator[Expr]:
    """Every top-level expression of a formula (comparison sides, quantifier bounds)."""
    if isinstance(f, (In, Eq)):
        yield f.left
        yield f.right
    elif isinstance(f, Not):
        yield from formula_exprs(f.body)
    elif isinstance(f, (And, Or)):
        yield from formula_exprs(f.left)
        yield from formula_exprs(f.right)
    elif isinstance(f, QUANTIFIERS):
        yield f.bound
        yield from formula_exprs(f.body)


def expr_vars(e: Expr) -> Set[str]:
    return {x.name for x in iter_exprs(e) if isinstance(x, Var)}


def free_vars(f: Formula) -> Set[str]:
    """Free variables of a formula; Forall/Exists bind their variable in the body only."""
    if isinstance(f, (In, Eq)):
        return expr_vars(f.left) | expr_vars(f.right)
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Or)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, QUANTIFIERS):
        return expr_vars(f.bound) | (free_vars(f.body) - {f.var})
    raise TypeError(f"not a formula: {f!r}")


def bound_vars(f: Formula) -> List[str]:
    if isinstance(f, Not):
        return bound_vars(f.body)
    if isinstance(f, (And, Or)):
        return bound_vars(f.left) + bound_vars(f.right)
    if isinstance(f, QUANTIFIERS):
        return [f.var] + bound_vars(f.body)
    return []


def expr_size(e: Expr) -> int:
    return 1 + sum(expr_size(c) for c in expr_children(e))


def formula_size(f: Formula) -> int:
    if isinstance(f, (In, Eq)):
        return 1 + expr_size(f.left) + expr_size(f.right)
    if isinstance(f, Not):
        return 1 + formula_size(f.body)
    if isinstance(f, (And, Or)):
        return 1 + formula_size(f.left) + formula_size(f.right)
    return 1 + expr_size(f.bound) + formula_size(f.body)


def conjoin(formulas: List[Formula]) -> Formula:
    """Left-associated conjunction of a nonempty list."""
    out = formulas[0]
    for f in formulas[1:]:
        out = And(out, f)
    return out


def rename_expr(e: Expr, mapping: Dict[str, Expr]) -> Expr:
    """Substitute variables by expressions (capture is impossible: bound names are unique)."""
    if isinstance(e, Var):
        repl = mapping.get(e.name)
        if repl is None:
            return e
        if isinstance(repl, Var) and repl.cols is None:
            return Var(repl.name, e.cols, e.span)
        return repl
    if isinstance(e, BINARY_EXPRS):
        return type(e)(rename_expr(e.left, mapping), rename_expr(e.right, mapping), e.cols, e.span)
    if isinstance(e, UNARY_EXPRS):
        return type(e)(rename_expr(e.expr, mapping), e.cols, e.span)
    return e


def substitute(f: Formula, mapping: Dict[str, Expr]) -> Formula:
    """Replace free variables of ``f`` according to ``mapping``."""
    if isinstance(f, (In, Eq)):
        return type(f)(rename_expr(f.left, mapping), rename_expr(f.right, mapping), f.span)
    if isinstance(f, Not):
        return Not(substitute(f.body, mapping), f.span)
    if isinstance(f, (And, Or)):
        return type(f)(substitute(f.left, mapping), substitute(f.right, mapping), f.span)
    if isinstance(f, QUANTIFIERS):
        inner = {k: v for k, v in mapping.items() if k != f.var}
        return type(f)(f.var, rename_expr(f.bound, mapping), substitute(f.body, inner), f.span)
    raise TypeError(f"not a formula: {f!r}")


def standardize_apart(f: Formula, taken: Set[str]) -> Formula:
    """
    Rename binders so that no bound name is in ``taken`` or bound twice.
    ``taken`` is updated in place with every name used.
    """
    if isinstance(f, (In, Eq)):
        return f
    if isinstance(f, Not):
        return Not(standardize_apart(f.body, taken), f.span)
    if isinstance(f, (And, Or)):
        left = standardize_apart(f.left, taken)
        return type(f)(left, standardize_apart(f.right, taken), f.span)
    var, body = f.var, f.body
    if var in taken:
        var = fresh_name(f.var, taken)
        body = substitute(body, {f.var: Var(var)})
    taken.add(var)
    return type(f)(var, f.bound, standardize_apart(body, taken), f.span)


def fresh_name(base: str, taken: Set[str]) -> str:
    stem = base.rstrip("'")
    n = 1
    while f"{stem}_{n}" in taken:
        n += 1
    return f"{stem}_{n}"
