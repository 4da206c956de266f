"""
corpus.py
=========
Seeded random test corpus for the oracle suite: specifications over one fixed
signature family, small instances, environments.

Signature family (every generated spec starts with it):
    sig B {}
    sig A { k: set B }                       immutable field
    state sig St { u: set A, r: A -> B, h: A -> A }

Universes hold at most 2 A atoms and 3 B atoms, so there are never more than
12 mutable tuple slots and the brute-force oracle stays at 4 096 candidates.

Usage:
    from src.oracle.corpus import generate_cases
    cases = generate_cases(200, seed=42)
"""

import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from faker import Faker

from src.kernel.kernel_ast import Spec
from src.kernel.type_checker import check_spec
from src.parsing.spec_parser import parse_spec
from src.store.instance import Atom, Instance, Kind

# ── deterministic seed ──────────────────────────────────────────────
SEED = 42
PRED = "Step"

SIGNATURES = """\
sig B {}
sig A { k: set B }
state sig St {
  u: set A,
  r: A -> B,
  h: A -> A
}
"""

FACTS = [
    "fact KeyedUsed { all t: St | t.r in t.u -> B }",
    "fact LinksUsed { all t: St | t.h in t.u -> t.u }",
    "fact NoSelfKey { all t: St, a: A | a.(t.r) & a.k = none }",
]

# common update shapes, mixed into random bodies so that many are satisfiable
TEMPLATES = [
    "s'.u = s.u + x",
    "s'.u = s.u - x",
    "x -> y in s'.r",
    "x -> y not in s'.r",
    "s'.r in s.r",
    "s.h in s'.h",
    "s'.h = s.h",
    "x in s'.u",
]

# (A, B) universe sizes with at most 12 mutable slots
SIZES = [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)]


@dataclass
class Case:
    seed: int
    text: str
    spec: Spec
    instance: Instance
    env: Dict[str, Atom]
    closure: bool
    pred: str = PRED


# ══════════════════════════════════════════════════════════════════════
# 1. RANDOM SPECIFICATIONS
# ══════════════════════════════════════════════════════════════════════

_LEAVES = {
    "A": ["A", "s.u", "s'.u"],
    "B": ["B"],
    "AB": ["s.r", "s'.r", "k"],
    "AA": ["s.h", "s'.h"],
    "BA": [],
}


class BodyGenerator:
    """Typed random expressions and formulas in concrete syntax."""

    def __init__(self, rng: random.Random, closure: bool = True, quantifiers: str = "all"):
        self.rng = rng
        self.closure = closure
        # "none", "all" (universal only) or "any"
        self.quantifiers = quantifiers
        self.scope: List[Tuple[str, str]] = [("x", "A"), ("y", "B")]
        self.counter = 0

    def _leaf(self, t: str) -> Optional[str]:
        options = _LEAVES[t] + [v for v, vt in self.scope if vt == t]
        return self.rng.choice(options) if options else None

    def expr(self, t: str, depth: int = 2) -> str:
        rng = self.rng
        leaf = self._leaf(t)
        if leaf is not None and (depth <= 0 or rng.random() < 0.35):
            return leaf
        depth -= 1
        shapes = ["same"] * 3
        if t == "A":
            shapes += ["join_A_AA", "join_B_BA"]
        elif t == "B":
            shapes += ["join_A_AB"] * 2
        elif t == "AB":
            shapes += ["product", "join_AA_AB"]
        elif t == "AA":
            shapes += ["converse", "join_AB_BA", "product"] + (["closure"] if self.closure else [])
        elif t == "BA":
            shapes = ["converse", "converse", "product"]
        shape = rng.choice(shapes)

        if shape == "same":
            op = rng.choice(["+", "-", "&"])
            right = "none" if rng.random() < 0.05 else self.expr(t, depth)
            return f"({self.expr(t, depth)} {op} {right})"
        if shape == "product":
            return f"({self.expr(t[0], depth)} -> {self.expr(t[1], depth)})"
        if shape == "converse":
            return f"~({self.expr(t[::-1], depth)})"
        if shape == "closure":
            return f"^({self.expr('AA', depth)})"
        _, left, right = shape.split("_")
        return f"({self.expr(left, depth)}).({self.expr(right, depth)})"

    def atom(self) -> str:
        rng = self.rng
        if rng.random() < 0.3:
            return rng.choice(TEMPLATES)
        t = rng.choice(["A", "A", "B", "AB", "AB", "AA"])
        left = self.expr(t)
        if rng.random() < 0.08:
            return f"{left} {rng.choice(['in', '='])} none"
        op = rng.choice(["in", "in", "=", "not in", "!="])
        return f"{left} {op} {self.expr(t)}"

    def formula(self, depth: int = 2) -> str:
        rng = self.rng
        if depth <= 0 or rng.random() < 0.4:
            return self.atom()
        kinds = ["and", "or", "not", "implies"]
        if self.quantifiers != "none":
            kinds += ["quant", "quant"]
        kind = rng.choice(kinds)
        if kind == "not":
            return f"not ({self.formula(depth - 1)})"
        if kind == "quant":
            return self.quantified(depth - 1)
        return f"({self.formula(depth - 1)} {kind} {self.formula(depth - 1)})"

    def quantified(self, depth: int, kind: Optional[str] = None) -> str:
        rng = self.rng
        if kind is None:
            kind = rng.choice(["all", "some"]) if self.quantifiers == "any" else "all"
        self.counter += 1
        var, t = f"z{self.counter}", rng.choice(["A", "B"])
        bound = t if rng.random() < 0.6 else self.expr(t, 1)
        self.scope.append((var, t))
        body = self.formula(depth)
        self.scope.pop()
        return f"({kind} {var}: {bound} | {body})"


def random_spec_text(rng: random.Random, closure: bool = True, quantifiers: str = "all",
                     facts: bool = True, existential: bool = False) -> str:
    gen = BodyGenerator(rng, closure=closure, quantifiers=quantifiers)
    lines = [gen.formula() for _ in range(rng.randint(1, 3))]
    if existential:
        lines.append(gen.quantified(1, kind="some"))
    chosen = [f for f in FACTS if facts and rng.random() < 0.3]
    body = "\n".join(f"  {line}" for line in lines)
    parts = [SIGNATURES, f"pred {PRED}(s, s': St, x: A, y: B) {{\n{body}\n}}"] + chosen
    return "\n".join(parts) + "\n"


# ══════════════════════════════════════════════════════════════════════
# 2. RANDOM INSTANCES
# ══════════════════════════════════════════════════════════════════════

def _labels(fake: Faker, make, n: int) -> List[str]:
    out: List[str] = []
    while len(out) < n:
        label = make(fake)
        out.append(label if label not in out else f"{label}{len(out)}")
    return out


def random_instance(spec: Spec, rng: random.Random, fake: Faker,
                    sizes: Optional[Tuple[int, int]] = None, density: float = 0.4) -> Instance:
    n_a, n_b = sizes or rng.choice(SIZES)
    inst = Instance.initial(spec)
    for label in _labels(fake, lambda f: f.first_name(), n_a):
        inst.create_atom("A", label)
    for label in _labels(fake, lambda f: f.color_name(), n_b):
        inst.create_atom("B", label)
    fill(inst, rng, density)
    return inst


def fill(inst: Instance, rng: random.Random, density: float = 0.4) -> None:
    """Random contents for every stored relation of ``inst`` (State fields on its State atom)."""
    state = inst.state_atom
    for name in sorted(inst.relations):
        decl = inst.schema[name]
        in_state = decl.kind == Kind.STATE_FIELD
        cols = decl.cols[1:] if in_state else decl.cols
        rows: List[tuple] = [()]
        for col in cols:
            rows = [t + (a,) for t in rows for a in inst.atoms(col)]
        prefix = (state,) if in_state else ()
        inst.relations[name] = {prefix + t for t in rows if rng.random() < density}


# ══════════════════════════════════════════════════════════════════════
# 3. CASES
# ══════════════════════════════════════════════════════════════════════

def random_case(seed: int, closure: bool = True, quantifiers: str = "all", facts: bool = True,
                existential: bool = False, sizes: Optional[Tuple[int, int]] = None) -> Case:
    rng = random.Random(seed)
    Faker.seed(seed)
    fake = Faker()
    text = random_spec_text(rng, closure=closure, quantifiers=quantifiers, facts=facts,
                            existential=existential)
    spec = check_spec(parse_spec(text, file=f"<corpus {seed}>"))
    inst = random_instance(spec, rng, fake, sizes)
    env = {"x": rng.choice(inst.atoms("A")), "y": rng.choice(inst.atoms("B"))}
    return Case(seed, text, spec, inst, env, closure)


def generate_cases(count: int, seed: int = SEED, **kwargs) -> List[Case]:
    """``count`` cases with per-case seeds drawn from ``seed``."""
    master = random.Random(seed)
    return [random_case(master.randrange(2 ** 31), **kwargs) for _ in range(count)]


# ══════════════════════════════════════════════════════════════════════
# 4. THE TWO-COURSE GRADEBOOK MODEL
# ══════════════════════════════════════════════════════════════════════

def two_course_model(spec: Spec) -> Tuple[Instance, Dict[str, Atom]]:
    """
    The gradebook model with two courses c0 and c1, read as one instance:
    Harry is enrolled in both, Meg in c1, Harry's hwk1 in c1 graded A-.
    """
    inst = Instance.empty(spec)
    atoms: Dict[str, Atom] = {}
    for sig, labels in [("Student", ["Harry", "Meg"]), ("Submission", ["hwk1"]),
                        ("Grade", ["A", "A-", "B+", "B"]), ("Course", ["c0", "c1"])]:
        for label in labels:
            atoms[label] = inst.create_atom(sig, label)
    a = atoms
    inst.relations["roster"] = {(a["c0"], a["Harry"]), (a["c1"], a["Harry"]), (a["c1"], a["Meg"])}
    inst.relations["work"] = {(a["c1"], a["Harry"], a["hwk1"])}
    inst.relations["gradebook"] = {(a["c1"], a["Harry"], a["hwk1"], a["A-"])}
    return inst, atoms


def course_slice(model: Instance, spec: Spec, course: str) -> Instance:
    """One course of the two-course model as a single-State-atom instance."""
    keep = model.atom_by_label(course, spec.state_sig)
    universe = {sig: [x for x in atoms if sig != spec.state_sig or x == keep]
                for sig, atoms in model.universe.items()}
    relations = {name: {t for t in tuples if t[0] == keep} for name, tuples in model.relations.items()}
    return Instance(model.schema, spec.state_sig, universe, relations)
