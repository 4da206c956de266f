"""
snapshot.py
===========
Textual snapshot persistence.

Format (UTF-8):
    SPECDB 1
    atom <sig> <id> <label>          one per atom, id order
    rel <name>                       one block per stored relation
    <id>\t<id>...                    tuples, lexicographic
Lines starting with ``#`` are comments. Writes are atomic (temp file +
rename); reads parse and validate the whole file before returning.
"""

import os
import logging
import tempfile
from typing import Dict, List, Set

from src.kernel.errors import SchemaError
from src.kernel.kernel_ast import Spec
from src.store.instance import Atom, Instance, Kind, Tuple_, schema_of
from src.store.schema import validate_relation

HEADER = "SPECDB 1"

logger = logging.getLogger("specdb.store")


def render_snapshot(inst: Instance) -> str:
    lines = [HEADER]
    for atom in inst.atoms():
        lines.append(f"atom {atom.sig} {atom.id} {atom.label}")
    for name in sorted(inst.relations):
        if inst.schema[name].kind == Kind.SKOLEM:
            continue
        lines.append(f"rel {name}")
        for t in sorted(inst.relations[name]):
            lines.append("\t".join(str(a.id) for a in t))
    return "\n".join(lines) + "\n"


def snapshot_write(inst: Instance, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".snapshot-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(render_snapshot(inst))
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    logger.debug(f"💾 Snapshot saved → {path}")


def parse_snapshot(text: str, spec: Spec, where: str = "<snapshot>") -> Instance:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise SchemaError(f"{where}: missing '{HEADER}' header")
    schema = schema_of(spec)
    atoms: Dict[int, Atom] = {}
    relations: Dict[str, Set[Tuple_]] = {}
    current = None

    for no, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("atom "):
            if relations:
                raise SchemaError(f"{where}:{no}: atom line after the first relation")
            parts = line.split(" ", 3)
            if len(parts) < 3:
                raise SchemaError(f"{where}:{no}: malformed atom line")
            sig, label = parts[1], parts[3] if len(parts) == 4 else ""
            decl = schema.get(sig)
            if decl is None or decl.kind != Kind.SIG:
                raise SchemaError(f"{where}:{no}: unknown signature '{sig}'")
            try:
                atom_id = int(parts[2])
            except ValueError:
                raise SchemaError(f"{where}:{no}: bad atom id '{parts[2]}'") from None
            if atom_id in atoms:
                raise SchemaError(f"{where}:{no}: duplicate atom id {atom_id}")
            atoms[atom_id] = Atom(atom_id, sig, label)
        elif line.startswith("rel "):
            current = line[4:].strip()
            decl = schema.get(current)
            if decl is None or not decl.stored:
                raise SchemaError(f"{where}:{no}: unknown relation '{current}'")
            if current in relations:
                raise SchemaError(f"{where}:{no}: relation '{current}' listed twice")
            relations[current] = set()
        else:
            if current is None:
                raise SchemaError(f"{where}:{no}: tuple outside a relation block")
            try:
                t = tuple(atoms[int(x)] for x in line.split("\t"))
            except (KeyError, ValueError):
                raise SchemaError(f"{where}:{no}: bad tuple '{line}'") from None
            relations[current].add(t)

    universe: Dict[str, List[Atom]] = {}
    for atom in atoms.values():
        universe.setdefault(atom.sig, []).append(atom)
    missing = [n for n, d in schema.items() if d.stored and n not in relations]
    if missing:
        logger.warning(f"{where}: relations {missing} absent from snapshot, read as empty")

    inst = Instance(schema, spec.state_sig, universe, relations)
    for name, tuples in relations.items():
        validate_relation(schema[name], tuples, inst.universe)
    if spec.state_sig is not None and len(inst.universe[spec.state_sig]) != 1:
        raise SchemaError(
            f"{where}: expected exactly one '{spec.state_sig}' atom, found "
            f"{len(inst.universe[spec.state_sig])}"
        )
    return inst


def snapshot_read(path: str, spec: Spec) -> Instance:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise SchemaError(f"cannot read snapshot '{path}': {e}") from None
    return parse_snapshot(text, spec, where=path)
