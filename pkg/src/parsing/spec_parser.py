"""
spec_parser.py
==============
Parser for ``.spec`` files: an ASCII rendering of the kernel language plus
``sig`` / ``pred`` / ``fact`` declarations.

Operator precedence (high → low):
    ~ ^   .   e[x]   ->   &   -   +   in = != not in   not   and   implies   or   all/some

Usage:
    from src.parsing.spec_parser import parse_spec
    spec = parse_spec(open("specs/gradebook.spec").read(), file="gradebook.spec")
"""

from functools import lru_cache
from typing import Dict, Optional, Set

from lark import Lark, Token, Transformer, Tree, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from src.kernel.errors import ParseError, SourceSpan
from src.kernel.kernel_ast import (
    And, Closure, ColumnItem, Converse, Diff, Eq, Exists, Expr, Fact, FieldDecl, Forall,
    Formula, In, Intersect, Join, Not, NoneExpr, Or, Param, Predicate, Product, RelName,
    Signature, Spec, Union, Var, conjoin, formula_exprs, fresh_name, iter_exprs,
)

spec_grammar = r"""
    start: _decl*

    _decl: sig_decl | pred_decl | fact_decl

    // Signatures
    sig_decl: STATE? "sig" NAME "{" [field_decl ("," field_decl)*] "}"
    field_decl: NAME ":" col_item ("->" col_item)*
    col_item: mult? NAME
    !mult: "set" | "lone"

    // Predicates and facts
    pred_decl: "pred" NAME "(" [param_group ("," param_group)*] ")" block
    param_group: NAME ("," NAME)* ":" NAME
    fact_decl: "fact" NAME? block

    block: "{" formula+ "}"

    // Formulas
    ?formula: quant | or_f

    quant: qkind decl_group ("," decl_group)* _quant_body
    !qkind: "all" | "some"
    decl_group: NAME ("," NAME)* ":" expr
    _quant_body: "|" formula | block

    ?or_f: or_f ("or" | "||") implies_f -> f_or
         | implies_f

    ?implies_f: and_f ("implies" | "=>") implies_f -> f_implies
              | and_f

    ?and_f: and_f ("and" | "&&") not_f -> f_and
          | not_f

    ?not_f: ("not" | "!") not_f -> f_not
          | cmp

    ?cmp: expr "in" expr -> f_in
        | expr "not" "in" expr -> f_not_in
        | expr "=" expr -> f_eq
        | expr "!=" expr -> f_neq
        | "(" formula ")"

    // Expressions
    ?expr: union

    ?union: union "+" diff -> e_union
          | diff

    ?diff: diff "-" inter -> e_diff
         | inter

    ?inter: inter "&" product -> e_intersect
          | product

    ?product: product "->" box -> e_product
            | box

    ?box: box "[" expr "]" -> e_box
        | join

    ?join: join "." unary -> e_join
         | unary

    ?unary: "~" unary -> e_converse
          | "^" unary -> e_closure
          | atom

    ?atom: NAME -> e_name
         | "none" -> e_none
         | "(" expr ")"

    STATE: "state"
    NAME: /[A-Za-z_][A-Za-z0-9_]*'*/

    COMMENT: /\/\/[^\n]*/ | /\/\*(.|\n)*?\*\//

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""


def _span(meta, file: str) -> Optional[SourceSpan]:
    if getattr(meta, "empty", True):
        return None
    return SourceSpan(file, meta.start_pos, meta.end_pos, meta.line, meta.column)


@v_args(meta=True, inline=True)
class SpecTransformer(Transformer):
    """Builds kernel_ast values; every identifier is a RelName until scopes are resolved."""

    def __init__(self, file: str):
        super().__init__()
        self.file = file

    # ── expressions ──────────────────────────────────────────────
    def e_name(self, meta, name: Token) -> Expr:
        return RelName(str(name), span=_span(meta, self.file))

    def e_none(self, meta) -> Expr:
        return NoneExpr(span=_span(meta, self.file))

    def e_union(self, meta, a, b):
        return Union(a, b, span=_span(meta, self.file))

    def e_diff(self, meta, a, b):
        return Diff(a, b, span=_span(meta, self.file))

    def e_intersect(self, meta, a, b):
        return Intersect(a, b, span=_span(meta, self.file))

    def e_product(self, meta, a, b):
        return Product(a, b, span=_span(meta, self.file))

    def e_join(self, meta, a, b):
        return Join(a, b, span=_span(meta, self.file))

    def e_box(self, meta, a, b):
        # e2[e1] is e1.e2
        return Join(b, a, span=_span(meta, self.file))

    def e_converse(self, meta, a):
        return Converse(a, span=_span(meta, self.file))

    def e_closure(self, meta, a):
        return Closure(a, span=_span(meta, self.file))

    # ── formulas ─────────────────────────────────────────────────
    def f_in(self, meta, a, b):
        return In(a, b, span=_span(meta, self.file))

    def f_not_in(self, meta, a, b):
        span = _span(meta, self.file)
        return Not(In(a, b, span=span), span=span)

    def f_eq(self, meta, a, b):
        return Eq(a, b, span=_span(meta, self.file))

    def f_neq(self, meta, a, b):
        span = _span(meta, self.file)
        return Not(Eq(a, b, span=span), span=span)

    def f_not(self, meta, f):
        return Not(f, span=_span(meta, self.file))

    def f_and(self, meta, a, b):
        return And(a, b, span=_span(meta, self.file))

    def f_or(self, meta, a, b):
        return Or(a, b, span=_span(meta, self.file))

    def f_implies(self, meta, a, b):
        span = _span(meta, self.file)
        return Or(Not(a, span=span), b, span=span)

    def block(self, meta, *formulas):
        return conjoin(list(formulas))

    def decl_group(self, meta, *items):
        *names, bound = items
        return [(str(n), bound) for n in names]

    def qkind(self, meta, tok: Token) -> str:
        return str(tok)

    def quant(self, meta, kind: str, *items):
        *groups, body = items
        ctor = Forall if kind == "all" else Exists
        span = _span(meta, self.file)
        decls = [d for g in groups for d in g]
        for name, bound in reversed(decls):
            body = ctor(name, bound, body, span=span)
        return body

    # ── declarations ─────────────────────────────────────────────
    def mult(self, meta, tok: Token) -> str:
        return str(tok)

    def col_item(self, meta, *items):
        if len(items) == 2:
            return ColumnItem(str(items[1]), items[0])
        return ColumnItem(str(items[0]))

    def field_decl(self, meta, name, *items):
        return FieldDecl(str(name), tuple(items), span=_span(meta, self.file))

    def sig_decl(self, meta, *items):
        marked = isinstance(items[0], Token) and items[0].type == "STATE"
        if marked:
            items = items[1:]
        name, *fields = items
        fields = [f for f in fields if f is not None]
        return Signature(str(name), tuple(fields), marked, span=_span(meta, self.file))

    def param_group(self, meta, *items):
        *names, type_name = items
        span = _span(meta, self.file)
        return [Param(str(n), str(type_name), span=span) for n in names]

    def pred_decl(self, meta, name, *items):
        *groups, body = items
        params = tuple(p for g in groups if g is not None for p in g)
        return Predicate(str(name), params, body, span=_span(meta, self.file))

    def fact_decl(self, meta, *items):
        if len(items) == 2:
            name, body = str(items[0]), items[1]
        else:
            name, body = "", items[0]
        return Fact(name, body, span=_span(meta, self.file))

    def start(self, meta, *decls):
        return list(decls)


# ══════════════════════════════════════════════════════════════════
# SCOPE RESOLUTION + α-RENAMING
# ══════════════════════════════════════════════════════════════════

def _resolve_expr(e: Expr, scope: Dict[str, str]) -> Expr:
    if isinstance(e, RelName):
        if e.name in scope:
            return Var(scope[e.name], span=e.span)
        return e
    if isinstance(e, Var):
        return Var(scope.get(e.name, e.name), span=e.span)
    if isinstance(e, (Union, Intersect, Diff, Join, Product)):
        return type(e)(_resolve_expr(e.left, scope), _resolve_expr(e.right, scope), span=e.span)
    if isinstance(e, (Converse, Closure)):
        return type(e)(_resolve_expr(e.expr, scope), span=e.span)
    return e


def _resolve(f: Formula, scope: Dict[str, str], bound_names: Set[str], avoid: Set[str]) -> Formula:
    """Turn bound identifiers into Vars, renaming binders that reuse a name."""
    if isinstance(f, (In, Eq)):
        return type(f)(_resolve_expr(f.left, scope), _resolve_expr(f.right, scope), span=f.span)
    if isinstance(f, Not):
        return Not(_resolve(f.body, scope, bound_names, avoid), span=f.span)
    if isinstance(f, (And, Or)):
        left = _resolve(f.left, scope, bound_names, avoid)
        return type(f)(left, _resolve(f.right, scope, bound_names, avoid), span=f.span)
    bound = _resolve_expr(f.bound, scope)
    name = f.var
    if name in bound_names:
        name = fresh_name(f.var, bound_names | avoid)
    bound_names.add(name)
    avoid.add(name)
    inner = dict(scope)
    inner[f.var] = name
    return type(f)(name, bound, _resolve(f.body, inner, bound_names, avoid), span=f.span)


def _identifiers(f: Formula) -> Set[str]:
    return {
        x.name
        for e in formula_exprs(f)
        for x in iter_exprs(e)
        if isinstance(x, (RelName, Var))
    }


def _resolve_decl(decl, relation_names: Set[str]):
    """Resolve one declaration; a binder is renamed only if it clashes with a
    relation, a parameter or an earlier binder of the same declaration."""
    if isinstance(decl, Predicate):
        bound_names = {p.name for p in decl.params} | relation_names
        avoid = _identifiers(decl.body) | bound_names
        scope = {p.name: p.name for p in decl.params}
        body = _resolve(decl.body, scope, bound_names, avoid)
        return Predicate(decl.name, decl.params, body, span=decl.span)
    if isinstance(decl, Fact):
        bound_names = set(relation_names)
        avoid = _identifiers(decl.body) | bound_names
        return Fact(decl.name, _resolve(decl.body, {}, bound_names, avoid), span=decl.span)
    return decl


# ══════════════════════════════════════════════════════════════════
# ENTRY POINTS
# ══════════════════════════════════════════════════════════════════

@lru_cache(maxsize=None)
def spec_parser() -> Lark:
    return Lark(spec_grammar, start="start", parser="lalr", propagate_positions=True)


def _parse_error(exc: UnexpectedInput, text: str, file: str) -> ParseError:
    pos = getattr(exc, "pos_in_stream", None) or 0
    span = SourceSpan(file, pos, pos, getattr(exc, "line", 0) or 0, getattr(exc, "column", 0) or 0)
    if isinstance(exc, UnexpectedToken):
        message = f"unexpected token {exc.token!r}; expected one of {sorted(exc.expected)}"
    elif isinstance(exc, UnexpectedCharacters):
        message = f"unexpected character {text[pos:pos + 1]!r}"
    elif isinstance(exc, UnexpectedEOF):
        message = "unexpected end of input"
    else:
        message = str(exc)
    return ParseError(message, span)


def parse_spec(text: str, file: str = "<spec>") -> Spec:
    """
    Parse specification text into an (unchecked) Spec.

    Raises ParseError with a SourceSpan on syntax errors; duplicate
    declarations and typing problems are left to ``check_spec``.
    """
    if not text.strip():
        return Spec(file=file)
    try:
        tree: Tree = spec_parser().parse(text)
    except UnexpectedInput as exc:
        raise _parse_error(exc, text, file) from None
    decls = SpecTransformer(file).transform(tree)

    relation_names: Set[str] = set()
    for d in decls:
        if isinstance(d, Signature):
            relation_names.add(d.name)
            relation_names.update(f.name for f in d.fields)
    decls = [_resolve_decl(d, relation_names) for d in decls]

    signatures = tuple(d for d in decls if isinstance(d, Signature))
    marked = [s.name for s in signatures if s.state_marked]
    return Spec(
        signatures=signatures,
        predicates=tuple(d for d in decls if isinstance(d, Predicate)),
        facts=tuple(d for d in decls if isinstance(d, Fact)),
        state_sig=marked[0] if marked else None,
        file=file,
    )


def parse_spec_file(path: str) -> Spec:
    with open(path, "r", encoding="utf-8") as f:
        return parse_spec(f.read(), file=path)


def load_spec(path: str) -> Spec:
    """Parse and type-check a ``.spec`` file."""
    from src.kernel.type_checker import check_spec

    return check_spec(parse_spec_file(path))
