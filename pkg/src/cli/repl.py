"""
Interactive Session (REPL)
Reads commands line by line from a stream (stdin by default), executes
each one against the open session and prints its outcome. Errors and
rolled-back transactions are reported and the session continues.
"""

import logging
import sys
from typing import Iterator, Optional, TextIO

from src.cli.session import Session, execute_command
from src.kernel.errors import SpecDBError
from src.parsing.command_parser import parse_command

logger = logging.getLogger("specdb.session")

PROMPT = "specdb> "


def read_commands(stream: TextIO, prompt: Optional[str]) -> Iterator[str]:
    """Yield input lines until EOF, showing ``prompt`` before each when interactive."""
    while True:
        if prompt:
            sys.stdout.write(prompt)
            sys.stdout.flush()
        line = stream.readline()
        if not line:
            return
        yield line.rstrip("\n")


def run_repl(session: Session, stream: TextIO = None, out: TextIO = None) -> int:
    """Serve commands until ``quit`` or EOF; returns the number of failed commands."""
    stream = stream or sys.stdin
    out = out or sys.stdout
    prompt = PROMPT if stream.isatty() else None
    failures = 0
    logger.info(f"📡 Session open on {session.db_path} ({session.spec.file})")

    for n, line in enumerate(read_commands(stream, prompt), start=1):
        try:
            command = parse_command(line, where=f"<repl {n}>")
            if command is None:
                continue
            outcome = execute_command(session, command)
        except SpecDBError as e:
            failures += 1
            print(f"✗ {e}", file=sys.stderr)
            continue
        for text in outcome.lines:
            print(text, file=out)
        if outcome.failed:
            failures += 1
        if outcome.status == "quit":
            break

    logger.info(f"Session closed after {session.txn} commits")
    return failures
