"""
type_checker.py
===============
Well-formedness and typing for parsed specifications.

``check_spec`` returns a copy of the Spec in which every Expr carries its
column-type sequence, State fields and immutable relations are tagged, field
declarations are flattened, and the multiplicity / dependent-type facts are
generated into ``Spec.derived_facts``. Every problem found is collected into a
single TypeErrorReport (raised as ``SpecTypeError``).
"""

import logging
from dataclasses import replace
from typing import Dict, List, Optional, Set, Tuple

from src.kernel.errors import SourceSpan, SpecTypeError, Violation
from src.kernel.kernel_ast import (
    And, Closure, Cols, Converse, Diff, Eq, Exists, Expr, Fact, FieldDecl,
    Forall, Formula, In, Intersect, Join, Not, NoneExpr, Or, Predicate, Product,
    RelName, Spec, Tag, Union, Var, free_vars,
)

logger = logging.getLogger("specdb.kernel")


class _Bad(Exception):
    def __init__(self, message: str, span: Optional[SourceSpan]):
        super().__init__(message)
        self.violation = Violation(message, span)


class _Scope:
    """Typing context for one predicate body or fact."""

    def __init__(self, spec: Spec, env: Dict[str, str], in_fact: bool):
        self.spec = spec
        self.env = dict(env)
        self.in_fact = in_fact
        self.state_vars: List[str] = []

    @property
    def state(self) -> Optional[str]:
        return self.spec.state_sig


# ══════════════════════════════════════════════════════════════════
# EXPRESSION TYPING
# ══════════════════════════════════════════════════════════════════

def type_of(e: Expr, spec: Spec, env: Optional[Dict[str, str]] = None) -> Cols:
    """
    Column-type sequence of ``e`` under ``env`` (variable → signature name).
    Raises SpecTypeError on unresolvable names or illegal operator use.
    """
    scope = _Scope(spec, env or {}, in_fact=True)
    try:
        return _annotate(e, scope, expected=None, state_ok=True).cols
    except _Bad as bad:
        raise SpecTypeError([bad.violation])


def _annotate(e: Expr, sc: _Scope, expected: Optional[Cols], state_ok: bool = False) -> Expr:
    spec = sc.spec
    if isinstance(e, Var):
        if e.name not in sc.env:
            raise _Bad(f"unknown variable '{e.name}'", e.span)
        t = sc.env[e.name]
        if t == sc.state and not state_ok:
            raise _Bad(
                f"State variable '{e.name}' may only be used as '{e.name}.<field>'", e.span
            )
        return replace(e, cols=(t,))

    if isinstance(e, RelName):
        cols = spec.relation_cols(e.name)
        if cols is None:
            raise _Bad(f"unknown relation or signature '{e.name}'", e.span)
        if e.name == sc.state and not state_ok:
            raise _Bad(f"the State signature '{e.name}' cannot be used as a relation here", e.span)
        if spec.is_state_field(e.name):
            if not state_ok:
                raise _Bad(
                    f"State field '{e.name}' must be accessed through a State variable", e.span
                )
            # tags PRE/POST are assigned by the normalizer; keep them if already set
            tag = e.tag if e.tag in (Tag.PRE, Tag.POST) else Tag.UNRESOLVED
            return replace(e, tag=tag, cols=cols)
        return replace(e, tag=Tag.IMMUTABLE, cols=cols)

    if isinstance(e, NoneExpr):
        if expected is None:
            raise _Bad("cannot infer the type of none", e.span)
        return replace(e, cols=tuple(expected))

    if isinstance(e, (Union, Intersect, Diff)):
        if isinstance(e.left, NoneExpr):
            right = _annotate(e.right, sc, expected)
            left = _annotate(e.left, sc, right.cols)
        else:
            left = _annotate(e.left, sc, expected)
            right = _annotate(e.right, sc, left.cols)
        if left.cols != right.cols:
            raise _Bad(
                f"operands of '{_OP_SYMBOL[type(e)]}' have different types "
                f"{_fmt(left.cols)} and {_fmt(right.cols)}", e.span,
            )
        return replace(e, left=left, right=right, cols=left.cols)

    if isinstance(e, Join):
        state_join = (
            isinstance(e.left, Var)
            and sc.env.get(e.left.name) == sc.state
            and isinstance(e.right, RelName)
            and spec.is_state_field(e.right.name)
        )
        left = _annotate(e.left, sc, None, state_ok=state_join)
        right = _annotate(e.right, sc, None, state_ok=state_join)
        if left.cols[-1] != right.cols[0]:
            raise _Bad(
                f"cannot join {_fmt(left.cols)} with {_fmt(right.cols)}: "
                f"'{left.cols[-1]}' does not match '{right.cols[0]}'", e.span,
            )
        cols = left.cols[:-1] + right.cols[1:]
        if not cols:
            raise _Bad("join of two unary expressions has arity 0", e.span)
        return replace(e, left=left, right=right, cols=cols)

    if isinstance(e, Product):
        left = _annotate(e.left, sc, None)
        right = _annotate(e.right, sc, None)
        return replace(e, left=left, right=right, cols=left.cols + right.cols)

    if isinstance(e, Converse):
        inner = _annotate(e.expr, sc, tuple(reversed(expected)) if expected else None)
        if len(inner.cols) != 2:
            raise _Bad(f"converse needs a binary relation, got {_fmt(inner.cols)}", e.span)
        return replace(e, expr=inner, cols=(inner.cols[1], inner.cols[0]))

    if isinstance(e, Closure):
        inner = _annotate(e.expr, sc, expected)
        if len(inner.cols) != 2 or inner.cols[0] != inner.cols[1]:
            raise _Bad(
                f"closure needs a homogeneous binary relation, got {_fmt(inner.cols)}", e.span
            )
        return replace(e, expr=inner, cols=inner.cols)

    raise _Bad(f"not an expression: {e!r}", None)


_OP_SYMBOL = {Union: "+", Intersect: "&", Diff: "-"}


def _fmt(cols: Optional[Cols]) -> str:
    return "->".join(cols) if cols else "?"


# ══════════════════════════════════════════════════════════════════
# FORMULA CHECKING
# ══════════════════════════════════════════════════════════════════

def _check_formula(f: Formula, sc: _Scope, out: List[Violation], positive: bool = True) -> Formula:
    try:
        if isinstance(f, (In, Eq)):
            if isinstance(f.left, NoneExpr):
                right = _annotate(f.right, sc, None)
                left = _annotate(f.left, sc, right.cols)
            else:
                left = _annotate(f.left, sc, None)
                right = _annotate(f.right, sc, left.cols)
            if left.cols != right.cols:
                op = "in" if isinstance(f, In) else "="
                raise _Bad(
                    f"sides of '{op}' have different types {_fmt(left.cols)} and {_fmt(right.cols)}",
                    f.span,
                )
            return replace(f, left=left, right=right)
    except _Bad as bad:
        out.append(bad.violation)
        return f

    if isinstance(f, Not):
        return replace(f, body=_check_formula(f.body, sc, out, not positive))
    if isinstance(f, (And, Or)):
        return replace(
            f,
            left=_check_formula(f.left, sc, out, positive),
            right=_check_formula(f.right, sc, out, positive),
        )
    if isinstance(f, (Forall, Exists)):
        return _check_quantifier(f, sc, out, positive)
    out.append(Violation(f"not a formula: {f!r}", None))
    return f


def _check_quantifier(f, sc: _Scope, out: List[Violation], positive: bool):
    if f.var in sc.env:
        out.append(Violation(f"variable '{f.var}' shadows an enclosing declaration", f.span))
        return f
    state_bound = isinstance(f.bound, RelName) and f.bound.name == sc.state and sc.state is not None
    try:
        bound = _annotate(f.bound, sc, None, state_ok=state_bound and sc.in_fact)
        if len(bound.cols) != 1:
            raise _Bad(f"quantifier bound for '{f.var}' must be unary, got {_fmt(bound.cols)}", f.span)
    except _Bad as bad:
        out.append(bad.violation)
        return f
    var_type = bound.cols[0]
    if var_type == sc.state:
        if not sc.in_fact:
            out.append(Violation(
                f"predicate bodies may not quantify over the State signature ('{f.var}')", f.span))
        else:
            universal = isinstance(f, Forall) == positive
            if not universal:
                out.append(Violation(
                    f"State variable '{f.var}' of a fact must be universally quantified", f.span))
            elif not state_bound:
                out.append(Violation(
                    f"State variable '{f.var}' must range over the whole signature '{sc.state}'",
                    f.span))
            sc.state_vars.append(f.var)
    sc.env[f.var] = var_type
    body = _check_formula(f.body, sc, out, positive)
    del sc.env[f.var]
    return replace(f, bound=bound, body=body)


# ══════════════════════════════════════════════════════════════════
# DECLARATIONS
# ══════════════════════════════════════════════════════════════════

def _infer_state_sig(raw: Spec, out: List[Violation]) -> Optional[str]:
    marked = [s for s in raw.signatures if s.state_marked]
    if len(marked) > 1:
        out.append(Violation(
            f"more than one State signature: {', '.join(s.name for s in marked)}", marked[1].span))
    if marked:
        return marked[0].name
    candidates: List[str] = []
    for p in raw.predicates:
        for prm in p.params:
            if prm.name.endswith("'") and prm.type not in candidates:
                candidates.append(prm.type)
    if len(candidates) > 1:
        out.append(Violation(
            f"predicates disagree on the State signature: {', '.join(candidates)}", None))
    return candidates[0] if candidates else None


def _resolve_fields(raw: Spec, state: Optional[str], out: List[Violation]):
    """Flatten field types; return new signatures plus per-field item layouts."""
    sig_names = set(raw.sig_names())
    layouts: Dict[str, List[Tuple[int, int, Optional[str]]]] = {}
    signatures = []
    for sig in raw.signatures:
        resolved: Dict[str, FieldDecl] = {}
        new_fields = []
        for fd in sig.fields:
            cols: List[str] = [sig.name]
            layout: List[Tuple[int, int, Optional[str]]] = []
            ok = True
            for pos, item in enumerate(fd.items):
                if item.multiplicity == "lone" and pos != len(fd.items) - 1:
                    out.append(Violation(
                        f"'lone' is only supported on the last column of field '{fd.name}'", fd.span))
                    ok = False
                if item.name in sig_names:
                    layout.append((len(cols), len(cols) + 1, None))
                    cols.append(item.name)
                elif item.name in resolved:
                    dep = resolved[item.name].cols[1:]
                    layout.append((len(cols), len(cols) + len(dep), item.name))
                    cols.extend(dep)
                else:
                    out.append(Violation(
                        f"unknown type '{item.name}' in field '{fd.name}' of sig '{sig.name}'",
                        fd.span))
                    ok = False
            if ok and state is not None and state in cols[1:]:
                out.append(Violation(
                    f"field '{fd.name}' mentions the State signature '{state}' outside its "
                    f"first column", fd.span))
            mult = "lone" if fd.items and fd.items[-1].multiplicity == "lone" else "set"
            new_fd = replace(fd, cols=tuple(cols) if ok else None, multiplicity=mult)
            if ok:
                resolved[fd.name] = new_fd
                layouts[fd.name] = layout
            new_fields.append(new_fd)
        signatures.append(replace(sig, fields=tuple(new_fields)))
    return tuple(signatures), layouts


def _check_names(raw: Spec, out: List[Violation]) -> None:
    seen: Dict[str, str] = {}

    def claim(name: str, kind: str, span):
        if name in seen:
            out.append(Violation(f"duplicate name '{name}' ({seen[name]} and {kind})", span))
        else:
            seen[name] = kind

    for sig in raw.signatures:
        claim(sig.name, "signature", sig.span)
        for fd in sig.fields:
            claim(fd.name, "field", fd.span)
    for p in raw.predicates:
        claim(p.name, "predicate", p.span)


def _derived_facts(spec: Spec, layouts) -> Tuple[Fact, ...]:
    """Domain restrictions of dependent field types and 'lone' uniqueness, as facts."""
    facts: List[Fact] = []
    for sig in spec.signatures:
        this = Var("this")
        for fd in sig.fields:
            if fd.cols is None:
                continue
            own = Join(this, RelName(fd.name))
            for start, end, dep in layouts.get(fd.name, []):
                if dep is None:
                    continue
                e = own
                for col in fd.cols[1:start]:
                    e = Join(RelName(col), e)
                for col in reversed(fd.cols[end:]):
                    e = Join(e, RelName(col))
                body = In(e, Join(this, RelName(dep)))
                facts.append(Fact(f"{sig.name}.{fd.name}#domain",
                                  Forall("this", RelName(sig.name), body)))
            if fd.multiplicity == "lone":
                facts.append(Fact(f"{sig.name}.{fd.name}#lone", _lone_fact(sig.name, fd)))
    return tuple(facts)


def _lone_fact(sig: str, fd: FieldDecl) -> Formula:
    prefix = fd.cols[1:-1]
    last = fd.cols[-1]
    term: Expr = Join(Var("this"), RelName(fd.name))
    names = [f"x{i + 1}" for i in range(len(prefix))]
    for name in names:
        term = Join(Var(name), term)
    body: Formula = Or(
        Not(And(In(Var("y1"), term), In(Var("y2"), term))),
        Eq(Var("y1"), Var("y2")),
    )
    body = Forall("y1", RelName(last), Forall("y2", RelName(last), body))
    for name, col in reversed(list(zip(names, prefix))):
        body = Forall(name, RelName(col), body)
    return Forall("this", RelName(sig), body)


def _check_predicate(p: Predicate, spec: Spec, out: List[Violation]) -> Predicate:
    state = spec.state_sig
    names: Set[str] = set()
    for prm in p.params:
        if prm.name in names:
            out.append(Violation(f"duplicate parameter '{prm.name}' in '{p.name}'", prm.span))
        names.add(prm.name)
        if spec.sig(prm.type) is None:
            out.append(Violation(f"unknown type '{prm.type}' for parameter '{prm.name}'", prm.span))
    state_params = [prm for prm in p.params if prm.type == state]
    primed = [prm for prm in state_params if prm.name.endswith("'")]
    if len(state_params) != 2 or len(primed) != 1:
        out.append(Violation(
            f"predicate '{p.name}' needs exactly two {state} parameters, one of them primed",
            p.span))
    env = {prm.name: prm.type for prm in p.params}
    extra = free_vars(p.body) - set(env)
    if extra:
        out.append(Violation(
            f"free variables {sorted(extra)} in predicate '{p.name}'", p.span))
        return p
    sc = _Scope(spec, env, in_fact=False)
    return replace(p, body=_check_formula(p.body, sc, out))


def _check_fact(fact: Fact, spec: Spec, out: List[Violation]) -> Fact:
    extra = free_vars(fact.body)
    if extra:
        out.append(Violation(f"fact '{fact.name}' is not closed: free {sorted(extra)}", fact.span))
        return fact
    sc = _Scope(spec, {}, in_fact=True)
    body = _check_formula(fact.body, sc, out)
    if len(sc.state_vars) > 1:
        out.append(Violation(
            f"fact '{fact.name}' has {len(sc.state_vars)} State variables "
            f"({', '.join(sc.state_vars)}); at most one is allowed", fact.span))
    return replace(fact, body=body)


def check_spec(raw: Spec) -> Spec:
    """
    Type-check a parsed specification.

    Returns the annotated Spec or raises SpecTypeError listing every violation.
    Idempotent: check_spec(check_spec(s)) == check_spec(s).
    """
    out: List[Violation] = []
    _check_names(raw, out)
    state = _infer_state_sig(raw, out)
    if state is not None and raw.sig(state) is None:
        out.append(Violation(f"State signature '{state}' is not declared", None))
        state = None
    signatures, layouts = _resolve_fields(raw, state, out)
    spec = replace(raw, signatures=signatures, state_sig=state, derived_facts=())

    predicates = tuple(_check_predicate(p, spec, out) for p in spec.predicates)
    facts = tuple(_check_fact(f, spec, out) for f in spec.facts)
    derived = tuple(_check_fact(f, spec, out) for f in _derived_facts(spec, layouts))

    if out:
        raise SpecTypeError(out)
    checked = replace(spec, predicates=predicates, facts=facts, derived_facts=derived)
    logger.debug(
        f"Checked spec {raw.file}: {len(signatures)} sigs, {len(predicates)} preds, "
        f"{len(facts)} facts (+{len(derived)} derived)"
    )
    return checked


def summarize(spec: Spec) -> Dict[str, object]:
    """Signature / predicate summary printed by the ``check`` subcommand."""
    return {
        "state_sig": spec.state_sig,
        "signatures": {
            s.name: {f.name: " -> ".join(f.cols or ()) + (" (lone)" if f.multiplicity == "lone" else "")
                     for f in s.fields}
            for s in spec.signatures
        },
        "predicates": {
            p.name: ", ".join(f"{prm.name}: {prm.type}" for prm in p.params)
            for p in spec.predicates
        },
        "facts": [f.name for f in spec.facts],
        "derived_facts": [f.name for f in spec.derived_facts],
    }
