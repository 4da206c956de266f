"""
command_parser.py
=================
One-line commands of the REPL and of batch session scripts.

    cs311 = CreateCourse("cs311");
    Enroll(cs311, pete);
    AssignGrade(cs311, pete, hwk1, "A")
    show gradebook
    snapshot data/db/backup.specdb
    quit

``;`` is optional, ``#`` and ``//`` start comments, blank lines give None.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple, Union

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError

from src.kernel.errors import ParseError, SourceSpan

CREATE_PREFIX = "Create"


@dataclass(frozen=True)
class Arg:
    """A call argument: a name bound by an earlier CreateAtom, or a quoted atom label."""

    value: str
    quoted: bool = False


@dataclass(frozen=True)
class CreateAtom:
    sig: str
    label: str
    binding: Optional[str] = None


@dataclass(frozen=True)
class InvokePredicate:
    name: str
    args: Tuple[Arg, ...] = ()


@dataclass(frozen=True)
class ShowRelation:
    name: str


@dataclass(frozen=True)
class Snapshot:
    path: str


@dataclass(frozen=True)
class Quit:
    pass


Command = Union[CreateAtom, InvokePredicate, ShowRelation, Snapshot, Quit]

command_grammar = r"""
    start: _command ";"?

    _command: binding | call | show | snapshot | quit

    binding: NAME "=" NAME "(" STRING ")"
    call: NAME "(" [arg ("," arg)*] ")"
    arg: NAME -> name_arg
       | STRING -> label_arg
    show: "show" NAME
    snapshot: "snapshot" PATH
    quit: "quit" | "exit"

    NAME: /[A-Za-z_][A-Za-z0-9_]*/
    PATH: /[^\s;]+/
    STRING: /"(\\.|[^"\\])*"/

    %import common.WS_INLINE
    %ignore WS_INLINE
"""


def _unquote(tok: Token) -> str:
    return bytes(str(tok)[1:-1], "utf-8").decode("unicode_escape")


@v_args(inline=True)
class CommandTransformer(Transformer):
    def name_arg(self, tok):
        return Arg(str(tok))

    def label_arg(self, tok):
        return Arg(_unquote(tok), quoted=True)

    def binding(self, target, factory, label):
        factory = str(factory)
        if not factory.startswith(CREATE_PREFIX) or factory == CREATE_PREFIX:
            raise ValueError(f"only Create<Sig>(...) results can be bound, not '{factory}'")
        return CreateAtom(factory[len(CREATE_PREFIX):], _unquote(label), str(target))

    def call(self, name, *args):
        name = str(name)
        args = tuple(a for a in args if a is not None)
        if name.startswith(CREATE_PREFIX) and name != CREATE_PREFIX:
            if len(args) != 1 or not args[0].quoted:
                raise ValueError(f"{name} takes exactly one quoted label")
            return CreateAtom(name[len(CREATE_PREFIX):], args[0].value)
        return InvokePredicate(name, args)

    def show(self, name):
        return ShowRelation(str(name))

    def snapshot(self, path):
        return Snapshot(str(path))

    def quit(self):
        return Quit()

    def start(self, command):
        return command


@lru_cache(maxsize=None)
def command_parser() -> Lark:
    return Lark(command_grammar, start="start", parser="lalr")


def _strip_comment(line: str) -> str:
    out, quoted, i = [], False, 0
    while i < len(line):
        ch = line[i]
        if ch == '"' and (i == 0 or line[i - 1] != "\\"):
            quoted = not quoted
        if not quoted and (ch == "#" or line.startswith("//", i)):
            break
        out.append(ch)
        i += 1
    return "".join(out).strip()


def parse_command(line: str, where: str = "<command>") -> Optional[Command]:
    """Parse one command line; returns None for blank or comment-only lines."""
    text = _strip_comment(line)
    if not text:
        return None
    try:
        return CommandTransformer().transform(command_parser().parse(text))
    except UnexpectedInput as exc:
        pos = getattr(exc, "pos_in_stream", None) or 0
        span = SourceSpan(where, pos, pos, 1, pos + 1)
        raise ParseError(f"malformed command near {text[pos:pos + 12]!r}", span) from None
    except VisitError as exc:
        if isinstance(exc.orig_exc, ValueError):
            raise ParseError(str(exc.orig_exc), SourceSpan(where, 0, len(text), 1, 1)) from None
        raise
