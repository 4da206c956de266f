"""
renderer.py
===========
Pretty-printer for kernel ASTs: ``parse_spec(render(spec))`` is structurally
equal to ``spec``. Parentheses are emitted only where precedence needs them.
Also renders normalized predicates for ``dump-normal``.
"""

from typing import Dict, List, Optional, Tuple

from src.kernel.kernel_ast import (
    And, Closure, Converse, Diff, Eq, Exists, Expr, Fact, Forall, Formula, In, Intersect,
    Join, Not, NoneExpr, Or, Predicate, Product, RelName, Signature, Spec, Tag, Union, Var,
)

# ── expression precedence (higher binds tighter) ───────────────────
_EXPR_PREC = {Union: 1, Diff: 2, Intersect: 3, Product: 4, Join: 6}
_EXPR_OP = {Union: " + ", Diff: " - ", Intersect: " & ", Product: " -> ", Join: "."}
_UNARY_PREC = 7
_ATOM_PREC = 8

# ── formula precedence ────────────────────────────────────────────
_QUANT, _OR, _AND, _NOT, _CMP = 0, 1, 3, 4, 5

StateNames = Optional[Tuple[str, str]]


def _expr_prec(e: Expr) -> int:
    if isinstance(e, (Converse, Closure)):
        return _UNARY_PREC
    return _EXPR_PREC.get(type(e), _ATOM_PREC)


def render_expr(e: Expr, state_names: StateNames = None) -> str:
    """``state_names`` = (pre, post) renders tagged State fields as ``s.f`` / ``s'.f``."""
    if isinstance(e, RelName):
        if state_names and e.tag in (Tag.PRE, Tag.POST):
            root = state_names[0] if e.tag == Tag.PRE else state_names[1]
            return f"{root}.{e.name}"
        return e.name
    if isinstance(e, Var):
        return e.name
    if isinstance(e, NoneExpr):
        return "none"
    if isinstance(e, (Converse, Closure)):
        op = "~" if isinstance(e, Converse) else "^"
        return op + _wrap_expr(e.expr, _UNARY_PREC, state_names)
    prec = _EXPR_PREC[type(e)]
    left = _wrap_expr(e.left, prec, state_names)
    right_min = _UNARY_PREC if isinstance(e, Join) else prec + 1
    right = _wrap_expr(e.right, right_min, state_names)
    return left + _EXPR_OP[type(e)] + right


def _wrap_expr(e: Expr, min_prec: int, state_names: StateNames) -> str:
    text = render_expr(e, state_names)
    if _expr_prec(e) < min_prec:
        return f"({text})"
    # a tagged field renders as a join: keep it atomic under unary operators
    if state_names and isinstance(e, RelName) and e.tag in (Tag.PRE, Tag.POST) \
            and min_prec > _EXPR_PREC[Join]:
        return f"({text})"
    return text


def _formula_prec(f: Formula) -> int:
    if isinstance(f, (Forall, Exists)):
        return _QUANT
    if isinstance(f, Or):
        return _OR
    if isinstance(f, And):
        return _AND
    if isinstance(f, Not) and not isinstance(f.body, (In, Eq)):
        return _NOT
    return _CMP


def render_formula(f: Formula, state_names: StateNames = None) -> str:
    r = lambda x: render_expr(x, state_names)  # noqa: E731
    if isinstance(f, In):
        return f"{r(f.left)} in {r(f.right)}"
    if isinstance(f, Eq):
        return f"{r(f.left)} = {r(f.right)}"
    if isinstance(f, Not):
        if isinstance(f.body, In):
            return f"{r(f.body.left)} not in {r(f.body.right)}"
        if isinstance(f.body, Eq):
            return f"{r(f.body.left)} != {r(f.body.right)}"
        return "not " + _wrap_formula(f.body, _NOT, state_names)
    if isinstance(f, Or):
        return (_wrap_formula(f.left, _OR, state_names) + " or "
                + _wrap_formula(f.right, _OR + 1, state_names))
    if isinstance(f, And):
        return (_wrap_formula(f.left, _AND, state_names) + " and "
                + _wrap_formula(f.right, _AND + 1, state_names))
    kw = "all" if isinstance(f, Forall) else "some"
    return f"{kw} {f.var}: {r(f.bound)} | {render_formula(f.body, state_names)}"


def _wrap_formula(f: Formula, min_prec: int, state_names: StateNames) -> str:
    text = render_formula(f, state_names)
    return f"({text})" if _formula_prec(f) < min_prec else text


def _block(body: Formula, indent: str = "  ") -> str:
    lines: List[Formula] = []
    while isinstance(body, And):
        lines.append(body.right)
        body = body.left
    lines.append(body)
    return "{\n" + "".join(f"{indent}{render_formula(x)}\n" for x in reversed(lines)) + "}"


def render_signature(sig: Signature) -> str:
    fields = []
    for fd in sig.fields:
        items = " -> ".join(
            f"{it.multiplicity} {it.name}" if it.multiplicity else it.name for it in fd.items
        )
        fields.append(f"  {fd.name}: {items}")
    head = ("state " if sig.state_marked else "") + f"sig {sig.name}"
    if not fields:
        return head + " {}"
    return head + " {\n" + ",\n".join(fields) + "\n}"


def render_predicate(p: Predicate) -> str:
    groups: List[Tuple[List[str], str]] = []
    for prm in p.params:
        if groups and groups[-1][1] == prm.type:
            groups[-1][0].append(prm.name)
        else:
            groups.append(([prm.name], prm.type))
    params = ", ".join(f"{', '.join(names)}: {t}" for names, t in groups)
    return f"pred {p.name}({params}) " + _block(p.body)


def render_fact(fact: Fact) -> str:
    name = f" {fact.name}" if fact.name else ""
    return f"fact{name} " + _block(fact.body)


def render(x) -> str:
    """Render a Spec, Formula or Expr in concrete syntax."""
    if isinstance(x, Spec):
        parts = [render_signature(s) for s in x.signatures]
        parts += [render_predicate(p) for p in x.predicates]
        parts += [render_fact(f) for f in x.facts]
        return "\n\n".join(parts) + ("\n" if parts else "")
    if isinstance(x, (In, Eq, Not, And, Or, Forall, Exists)):
        return render_formula(x)
    return render_expr(x)


# ══════════════════════════════════════════════════════════════════
# NORMAL FORM
# ══════════════════════════════════════════════════════════════════

def render_special(lit, state_names: StateNames) -> str:
    from src.normalization.special_form import Polarity

    if len(lit.exprs) == 1:
        inner = render_expr(lit.exprs[0], state_names)
    else:
        inner = " & ".join(_wrap_expr(e, _EXPR_PREC[Intersect] + 1, state_names) for e in lit.exprs)
    op = "=" if lit.polarity == Polarity.EMPTY else "!="
    return f"({inner}) {op} none"


def render_normal(np) -> str:
    """dump-normal text: one line per clause, Skolem relations listed first."""
    names = (np.pre_param, np.post_param)
    types: Dict[str, str] = dict(np.universals)
    lines = [f"pred {np.name}"]
    for decl in np.skolem_decls:
        lines.append(f"  skolem {decl.name}: {' -> '.join(decl.cols)}")
    for clause in np.matrix:
        body = " or ".join(render_special(lit, names) for lit in clause.literals)
        if clause.scope:
            scope = ", ".join(f"{v}: {types[v]}" for v in clause.scope)
            body = f"all {scope} | {body}"
        lines.append(f"  {body}")
    return "\n".join(lines)
