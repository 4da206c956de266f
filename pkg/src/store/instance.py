"""
instance.py
===========
The relational instance: per-signature atom universes plus typed relations.

Signatures are not stored as relations; their value is read from the
universe. State fields keep their State column, so a PRE/POST read is the
projection onto the instance's single State atom.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

from src.kernel.errors import SchemaError
from src.kernel.kernel_ast import Cols, Spec

EMPTY_RELATION = "$empty"


@dataclass(frozen=True, order=True)
class Atom:
    id: int
    sig: str = field(compare=False)
    label: str = field(compare=False)

    def __str__(self) -> str:
        return self.label


Tuple_ = Tuple[Atom, ...]


class Kind(str, Enum):
    SIG = "sig"
    STATE_FIELD = "state_field"
    FIELD = "field"
    SKOLEM = "skolem"
    RESERVED = "reserved"


MUTABLE_KINDS = (Kind.STATE_FIELD, Kind.SKOLEM)


@dataclass(frozen=True)
class RelationDecl:
    name: str
    cols: Cols
    kind: Kind

    @property
    def mutable(self) -> bool:
        return self.kind in MUTABLE_KINDS

    @property
    def stored(self) -> bool:
        return self.kind in (Kind.STATE_FIELD, Kind.FIELD, Kind.SKOLEM)


def schema_of(spec: Spec) -> Dict[str, RelationDecl]:
    schema: Dict[str, RelationDecl] = {}
    for sig in spec.signatures:
        schema[sig.name] = RelationDecl(sig.name, (sig.name,), Kind.SIG)
        for fd in sig.fields:
            kind = Kind.STATE_FIELD if sig.name == spec.state_sig else Kind.FIELD
            schema[fd.name] = RelationDecl(fd.name, fd.cols, kind)
    if spec.state_sig is not None:
        schema[EMPTY_RELATION] = RelationDecl(EMPTY_RELATION, (spec.state_sig,), Kind.RESERVED)
    return schema


class Instance:
    """A database state. Committed instances are treated as values; work on ``copy()``."""

    def __init__(
        self,
        schema: Dict[str, RelationDecl],
        state_sig: Optional[str],
        universe: Optional[Dict[str, List[Atom]]] = None,
        relations: Optional[Dict[str, Set[Tuple_]]] = None,
    ):
        self.schema = dict(schema)
        self.state_sig = state_sig
        self.universe: Dict[str, List[Atom]] = {
            name: [] for name, d in schema.items() if d.kind == Kind.SIG
        }
        for sig, atoms in (universe or {}).items():
            self.universe[sig] = sorted(atoms)
        self.relations: Dict[str, Set[Tuple_]] = {
            name: set() for name, d in schema.items() if d.stored
        }
        for name, tuples in (relations or {}).items():
            self.relations[name] = set(tuples)

    # ── construction ─────────────────────────────────────────────
    @classmethod
    def empty(cls, spec: Spec) -> "Instance":
        return cls(schema_of(spec), spec.state_sig)

    @classmethod
    def initial(cls, spec: Spec) -> "Instance":
        """Fresh database: no atoms but the single State atom (labelled with the sig name)."""
        inst = cls.empty(spec)
        if spec.state_sig is not None:
            inst.create_atom(spec.state_sig, spec.state_sig)
        return inst

    def copy(self) -> "Instance":
        out = Instance.__new__(Instance)
        out.schema = dict(self.schema)
        out.state_sig = self.state_sig
        out.universe = {k: list(v) for k, v in self.universe.items()}
        out.relations = {k: set(v) for k, v in self.relations.items()}
        return out

    def __deepcopy__(self, memo):
        return self.copy()

    # ── atoms ────────────────────────────────────────────────────
    @property
    def next_id(self) -> int:
        ids = [a.id for atoms in self.universe.values() for a in atoms]
        return max(ids) + 1 if ids else 0

    def create_atom(self, sig: str, label: str) -> Atom:
        if sig not in self.universe:
            raise SchemaError(f"unknown signature '{sig}'")
        atom = Atom(self.next_id, sig, label)
        self.universe[sig].append(atom)
        return atom

    def relabel(self, atom: Atom, label: str) -> Atom:
        """Give ``atom`` a new label everywhere it occurs; ids and tuples keep their order."""
        renamed = Atom(atom.id, atom.sig, label)
        self.universe[atom.sig] = [renamed if a.id == atom.id else a for a in self.universe[atom.sig]]
        for name, tuples in self.relations.items():
            if any(atom in t for t in tuples):
                self.relations[name] = {
                    tuple(renamed if a.id == atom.id else a for a in t) for t in tuples
                }
        return renamed

    def atoms(self, sig: Optional[str] = None) -> List[Atom]:
        if sig is not None:
            return list(self.universe.get(sig, []))
        return sorted(a for atoms in self.universe.values() for a in atoms)

    def atom_by_label(self, label: str, sig: Optional[str] = None) -> Optional[Atom]:
        for a in self.atoms(sig):
            if a.label == label:
                return a
        return None

    @property
    def state_atom(self) -> Optional[Atom]:
        if self.state_sig is None:
            return None
        atoms = self.universe.get(self.state_sig, [])
        return atoms[0] if len(atoms) == 1 else None

    # ── relations ────────────────────────────────────────────────
    def add_relation(self, decl: RelationDecl) -> None:
        self.schema[decl.name] = decl
        if decl.stored:
            self.relations.setdefault(decl.name, set())

    def drop_relations(self, kind: Kind) -> None:
        for name in [n for n, d in self.schema.items() if d.kind == kind]:
            del self.schema[name]
            self.relations.pop(name, None)

    def value(self, name: str) -> Set[Tuple_]:
        """Full stored value (State column included); sigs read their universe."""
        decl = self.schema.get(name)
        if decl is None:
            raise SchemaError(f"unknown relation '{name}'")
        if decl.kind == Kind.SIG:
            return {(a,) for a in self.universe[name]}
        if decl.kind == Kind.RESERVED:
            return set()
        return self.relations[name]

    def state_value(self, name: str) -> Set[Tuple_]:
        """Projection of a State field onto the State atom."""
        state = self.state_atom
        return {t[1:] for t in self.relations[name] if t[0] == state}

    def tuples(self, name: str) -> List[Tuple_]:
        return sorted(self.value(name))

    def mutable_relations(self) -> List[str]:
        return sorted(n for n, d in self.schema.items() if d.mutable)

    def tuple_space(self, name: str) -> int:
        n = 1
        for col in self.schema[name].cols:
            n *= len(self.universe.get(col, []))
        return n

    def mutable_tuple_space(self) -> int:
        return sum(self.tuple_space(n) for n in self.mutable_relations())

    # ── checks ───────────────────────────────────────────────────
    def check_well_formed(self) -> None:
        """Single State atom, typed tuples, atoms present in the universe."""
        if self.state_sig is not None and len(self.universe.get(self.state_sig, [])) != 1:
            raise SchemaError(
                f"expected exactly one '{self.state_sig}' atom, found "
                f"{len(self.universe.get(self.state_sig, []))}"
            )
        from src.store.schema import validate_relation

        for name, tuples in self.relations.items():
            validate_relation(self.schema[name], tuples, self.universe)

    def same_universe(self, other: "Instance") -> bool:
        return self.universe == other.universe

    def structurally_equal(self, other: "Instance") -> bool:
        if self.universe != other.universe:
            return False
        if [(a.sig, a.label) for a in self.atoms()] != [(a.sig, a.label) for a in other.atoms()]:
            return False
        names = set(self.relations) | set(other.relations)
        return all(self.relations.get(n, set()) == other.relations.get(n, set()) for n in names)

    def __eq__(self, other) -> bool:
        return isinstance(other, Instance) and self.structurally_equal(other)

    __hash__ = None

    def __repr__(self) -> str:
        sizes = ", ".join(f"{k}={len(v)}" for k, v in sorted(self.relations.items()))
        return f"Instance(atoms={len(self.atoms())}, {sizes})"


# ══════════════════════════════════════════════════════════════════
# UPDATES
# ══════════════════════════════════════════════════════════════════

class Action(str, Enum):
    INSERT = "INS"
    DELETE = "DEL"


def apply(inst: Instance, rel: str, t: Tuple_, action: Action) -> Instance:
    """Set-semantics insert/delete on a copy; only mutable relations may change."""
    assert inst.schema[rel].mutable, f"'{rel}' is immutable"
    out = inst.copy()
    if action == Action.INSERT:
        out.relations[rel].add(t)
    else:
        out.relations[rel].discard(t)
    return out


def diff(pre: Instance, post: Instance) -> "UpdateLog":
    """Per-relation symmetric difference of two instances over one universe."""
    from src.store.update_log import UpdateLog

    if not pre.same_universe(post):
        raise SchemaError("cannot diff instances over different universes")
    log = UpdateLog()
    for name in sorted(set(pre.relations) | set(post.relations)):
        before = pre.relations.get(name, set())
        after = post.relations.get(name, set())
        for t in sorted(after - before):
            log.append(name, t, Action.INSERT)
        for t in sorted(before - after):
            log.append(name, t, Action.DELETE)
    return log


def replay(inst: Instance, log: Iterable) -> Instance:
    out = inst.copy()
    for rel, t, action in log:
        if action == Action.INSERT:
            out.relations.setdefault(rel, set()).add(t)
        else:
            out.relations.setdefault(rel, set()).discard(t)
    return out


def is_approximation(J: Instance, I: Instance, Iprime: Instance) -> bool:
    """True iff I - J ⊆ I - I' and J - I ⊆ I' - I on every relation."""
    names = set(I.relations) | set(J.relations) | set(Iprime.relations)
    for name in names:
        i = I.relations.get(name, set())
        j = J.relations.get(name, set())
        ip = Iprime.relations.get(name, set())
        if not (i - j) <= (i - ip) or not (j - i) <= (ip - i):
            return False
    return True
