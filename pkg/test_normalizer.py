import random

import pytest

from src.kernel.kernel_ast import (
    Closure, Converse, Diff, Eq, In, Not, NoneExpr, Or, RelName, Tag, Union, Var, expr_children,
)
from src.kernel.type_checker import check_spec
from src.normalization.normalizer import SKOLEM_PREFIX, nnf, normalize_predicate, normalize_spec
from src.normalization.special_form import Polarity, is_true
from src.oracle.corpus import SIGNATURES, fill, generate_cases
from src.oracle.oracle import full_env, matrix_holds, satisfies
from src.parsing.renderer import render_normal
from src.parsing.spec_parser import parse_spec
from src.store.instance import Kind


def normalized(body: str, facts: str = ""):
    spec = check_spec(parse_spec(SIGNATURES + f"pred Step(s, s': St, x: A, y: B) {{ {body} }}\n" + facts))
    return normalize_predicate(spec.predicate("Step"), spec.all_facts())


def literals(np):
    return [lit for clause in np.matrix for lit in clause.literals]


def operands_are_special(np) -> bool:
    """No union outside closure, no none, converse only on names and variables."""
    for lit in literals(np):
        stack = list(lit.exprs)
        while stack:
            x = stack.pop()
            if isinstance(x, (NoneExpr, Union)):
                return False
            if isinstance(x, Closure):
                continue
            if isinstance(x, Converse) and not isinstance(x.expr, (RelName, Var)):
                return False
            stack.extend(expr_children(x))
    return True


# ── basic formulas ──────────────────────────────────────────────────

def test_point_membership_is_one_empty_difference():
    np = normalized("x in s'.u")
    assert len(np.matrix) == 1
    (lit,) = np.matrix[0].literals
    assert lit.polarity == Polarity.EMPTY
    assert isinstance(lit.exprs[0], Diff)
    assert lit.exprs[0].right == RelName("u", Tag.POST)


def test_point_non_membership_is_empty_intersection():
    np = normalized("x not in s'.u")
    assert len(np.matrix) == 1
    (lit,) = np.matrix[0].literals
    assert lit.polarity == Polarity.EMPTY
    assert lit.exprs == (Var("x"), RelName("u", Tag.POST))


def test_set_non_membership_is_nonempty():
    np = normalized("s.u not in s'.u")
    (lit,) = np.matrix[0].literals
    assert lit.polarity == Polarity.NONEMPTY


def test_equality_splits_into_both_inclusions():
    np = normalized("s'.u = s.u + x")
    # u' - u - x, u - u', x - u'
    assert len(np.matrix) == 3
    assert all(lit.polarity == Polarity.EMPTY for lit in literals(np))


def test_disjunction_is_one_clause():
    np = normalized("x in s'.u or x in s.u")
    assert len(np.matrix) == 1
    assert len(np.matrix[0].literals) == 2


def test_none_is_eliminated():
    assert is_true(normalized("none in s.u").matrix[0].literals[0])
    np = normalized("x in none")
    assert literals(np)[0].exprs == (Var("x"),)


def test_converse_pushed_to_names():
    np = normalized("~(s'.h + s.h) in s.h")
    assert len(np.matrix) == 2
    for lit in literals(np):
        diff = lit.exprs[0]
        assert isinstance(diff, Diff) and isinstance(diff.left, Converse)
        assert isinstance(diff.left.expr, RelName)


def test_union_under_closure_stays():
    np = normalized("^(s'.h + s.h) in s.h")
    assert len(np.matrix) == 1
    closure = literals(np)[0].exprs[0].left
    assert isinstance(closure, Closure) and isinstance(closure.expr, Union)


def test_operands_are_special_on_corpus():
    for case in generate_cases(30, seed=7, closure=True, quantifiers="any"):
        np = normalize_predicate(case.spec.predicate(case.pred), case.spec.all_facts())
        assert operands_are_special(np), case.text


# ── quantifiers, Skolem relations, facts ───────────────────────────

def test_universal_scope():
    np = normalized("all a: A | a in s'.u")
    assert np.universals == (("a", "A"),)
    assert np.matrix[0].scope == ("a",)


def test_bounded_universal_moves_bound_into_body():
    np = normalized("all a: s.u | a in s'.u")
    assert len(np.matrix[0].literals) == 2


def test_existential_gets_skolem_relation():
    np = normalized("some b: B | x -> b in s'.r")
    assert [d.name for d in np.skolem_decls] == [SKOLEM_PREFIX + "b"]
    assert np.skolem_decls[0].cols == ("B",)
    # non-emptiness, the body, and the at-most-one constraint over two fresh universals
    assert any(len(c.scope) == 2 for c in np.matrix)


def test_existential_under_universal_is_a_function():
    np = normalized("all a: A | some b: B | a -> b in s'.r")
    assert np.skolem_decls[0].cols == ("A", "B")


def test_facts_are_primed():
    without = normalized("x in s'.u")
    with_fact = normalized("x in s'.u", "fact KeyedUsed { all t: St | t.r in t.u -> B }")
    assert len(with_fact.matrix) > len(without.matrix)
    reads = [e.left for lit in literals(with_fact) for e in lit.exprs
             if isinstance(e, Diff) and isinstance(e.left, RelName) and e.left.name == "r"]
    assert reads and all(r.tag == Tag.POST for r in reads)


def test_nnf_of_negated_equality():
    f = nnf(Not(Eq(Var("x"), Var("y"))))
    assert isinstance(f, Or)
    assert isinstance(f.left, Not) and isinstance(f.left.body, In)


# ── gradebook ───────────────────────────────────────────────────────

def test_enroll_without_facts(gradebook):
    np = normalize_predicate(gradebook.predicate("Enroll"), [])
    assert (np.pre_param, np.post_param) == ("c", "c'")
    assert np.skolem_decls == ()
    # roster' - roster - sNew, roster - roster', sNew - roster', sNew.work'
    assert len(np.matrix) == 4


def test_normalize_spec_covers_every_predicate(gradebook):
    assert set(normalize_spec(gradebook)) == {"Enroll", "Drop", "SubmitForPair", "AssignGrade"}


def test_render_normal(gradebook):
    text = render_normal(normalize_predicate(gradebook.predicate("Drop"), []))
    assert text.splitlines()[0] == "pred Drop"
    assert "(s & c'.roster) = none" in text


# ── equivalence with the reference evaluator ───────────────────────

@pytest.mark.parametrize("quantifiers", ["none", "any"])
def test_matrix_agrees_with_body(quantifiers):
    for case in generate_cases(15, seed=11, quantifiers=quantifiers, facts=False, sizes=(2, 2)):
        p = case.spec.predicate(case.pred)
        np = normalize_predicate(p, [])
        if np.skolem_decls:
            continue
        env = full_env(case.spec, p, case.instance, case.env)
        rng = random.Random(case.seed)
        posts = [case.instance]
        for density in (0.2, 0.5, 0.8):
            post = case.instance.copy()
            fill(post, rng, density)
            for name, d in post.schema.items():
                if d.kind == Kind.FIELD:
                    post.relations[name] = set(case.instance.relations[name])
            posts.append(post)
        assert any(post != case.instance for post in posts[1:])
        for post in posts:
            assert satisfies(p.body, case.instance, post, env) == \
                matrix_holds(np, case.instance, post, case.env), case.text
