"""
Session Script Runner
Reads a command script (one command per line, ``;`` optional, ``#``/``//``
comments) and executes it against one database, stopping at the first
failing command.

Exit codes:
    0  every command succeeded
    1  user error (parse error, unknown name, arity, lock held, ...)
    2  a transaction failed and was rolled back
"""

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from src.cli.session import Session, execute_command
from src.kernel.errors import SpecDBError
from src.parsing.command_parser import parse_command

logger = logging.getLogger("specdb.session")

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_TXN_FAILED = 2


@dataclass
class ScriptSummary:
    script: str
    exit_code: int = EXIT_OK
    commands: int = 0
    transactions: int = 0
    stopped_at: Optional[int] = None
    error: Optional[str] = None
    elapsed_s: float = 0.0
    output: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "script": self.script,
            "exit_code": self.exit_code,
            "commands": self.commands,
            "transactions": self.transactions,
            "stopped_at_line": self.stopped_at,
            "error": self.error,
            "elapsed_s": round(self.elapsed_s, 4),
        }


def read_script(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8") as f:
        return f.read().splitlines()


def run_script(session: Session, path: str, echo: Callable[[str], None] = print) -> ScriptSummary:
    """Execute every command of ``path``; the session keeps the last commit on failure."""
    summary = ScriptSummary(script=path)
    started = time.time()
    logger.info("=" * 60)
    logger.info(f"🚀 Running session script {path}")
    logger.info("=" * 60)

    for lineno, line in enumerate(read_script(path), start=1):
        try:
            command = parse_command(line, where=f"{path}:{lineno}")
            if command is None:
                continue
            summary.commands += 1
            outcome = execute_command(session, command)
        except SpecDBError as e:
            logger.error(f"✗ {path}:{lineno}: {e}")
            summary.exit_code, summary.stopped_at, summary.error = EXIT_USER_ERROR, lineno, str(e)
            break

        for out in outcome.lines:
            summary.output.append(out)
            echo(out)
        if outcome.result is not None:
            summary.transactions += 1
        if outcome.failed:
            logger.error(f"✗ {path}:{lineno}: {outcome.result.failure}")
            summary.exit_code, summary.stopped_at = EXIT_TXN_FAILED, lineno
            summary.error = str(outcome.result.failure)
            break
        if outcome.status == "quit":
            break

    summary.elapsed_s = time.time() - started
    status = "✅ complete" if summary.exit_code == EXIT_OK else f"❌ stopped at line {summary.stopped_at}"
    logger.info(f"{status}: {summary.commands} commands, {summary.transactions} transactions")

    os.makedirs(session.log_dir, exist_ok=True)
    with open(os.path.join(session.log_dir, "script_runs.jsonl"), "a", encoding="utf-8") as f:
        f.write(json.dumps(summary.to_dict()) + "\n")
    return summary
