"""
Store Schema Module
===================
Relation validation, lock handling and run logging for the store.
Used by snapshot.py, the executor session and the oracle suite.

Features:
  - Tuple arity / column-type / universe-membership checks
  - Exponential backoff retry (decorator) for lock acquisition
  - Exclusive ``<db>.lock`` files carrying the holder pid
  - Transaction journal (``--journal``) in the snapshot's textual style
  - Transaction logging (timestamp, predicate, status, counts) to JSONL
"""

import os
import time
import json
import logging
from datetime import datetime
from functools import wraps
from typing import Any, Dict, Iterable, List, Optional

from src.kernel.errors import SchemaError, SessionError
from src.store.instance import Atom, RelationDecl, Tuple_

ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
LOG_DIR = os.path.join(ROOT_DIR, "data", "logs")

logger = logging.getLogger("specdb.store")


# ══════════════════════════════════════════════════════════════════
# RETRY LOGIC: exponential backoff decorator
# ══════════════════════════════════════════════════════════════════

def retry_with_backoff(max_retries: int = 3, base_delay: float = 1.0, retry_on=(Exception,)):
    """Decorator that retries a function with exponential backoff."""

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            for attempt in range(1, max_retries + 1):
                try:
                    return func(*args, **kwargs)
                except retry_on as e:
                    if attempt == max_retries:
                        logger.error(f"All {max_retries} attempts failed: {e}")
                        raise
                    delay = base_delay * (2 ** (attempt - 1))
                    logger.warning(
                        f"Attempt {attempt}/{max_retries} failed: {e}. "
                        f"Retrying in {delay:.1f}s..."
                    )
                    time.sleep(delay)

        return wrapper

    return decorator


# ══════════════════════════════════════════════════════════════════
# RELATION VALIDATION
# ══════════════════════════════════════════════════════════════════

def validate_relation(
    decl: RelationDecl,
    tuples: Iterable[Tuple_],
    universe: Dict[str, List[Atom]],
) -> None:
    """
    Validate a relation value against its declaration.

    - Every tuple has the declared arity
    - Every atom has the declared column type
    - Every atom exists in the universe

    Raises SchemaError naming the first offending tuple.
    """
    members = {sig: set(atoms) for sig, atoms in universe.items()}
    for t in sorted(tuples):
        if len(t) != len(decl.cols):
            raise SchemaError(
                f"relation '{decl.name}': tuple {_show(t)} has arity {len(t)}, "
                f"expected {len(decl.cols)}"
            )
        for pos, (atom, col) in enumerate(zip(t, decl.cols)):
            if atom.sig != col:
                raise SchemaError(
                    f"relation '{decl.name}': column {pos} of {_show(t)} is a {atom.sig}, "
                    f"expected {col}"
                )
            if atom not in members.get(col, ()):
                raise SchemaError(
                    f"relation '{decl.name}': atom {atom.id} ({atom.label}) is not in the universe"
                )


def _show(t: Tuple_) -> str:
    return "(" + ", ".join(a.label for a in t) + ")"


# ══════════════════════════════════════════════════════════════════
# LOCKING: one writer per database
# ══════════════════════════════════════════════════════════════════

class LockHeld(Exception):
    pass


def lock_path(db_path: str) -> str:
    return db_path + ".lock"


def acquire_lock(db_path: str, retries: int = 3, base_delay: float = 0.1) -> str:
    """Create ``<db>.lock`` exclusively, retrying with backoff; SessionError if still held.

    A lock whose holder pid no longer runs is reclaimed with a warning.
    """

    @retry_with_backoff(max_retries=max(retries, 1), base_delay=base_delay, retry_on=(LockHeld,))
    def _take() -> str:
        path = lock_path(db_path)
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            pid = _holder_pid(path)
            if pid is not None and not _alive(pid):
                logger.warning(f"⚠️ Reclaiming stale lock {path} (pid {pid} is gone)")
                release_lock(db_path)
                return _take()
            raise LockHeld(f"database '{db_path}' is locked by {_holder(pid)}")
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        return path

    try:
        path = _take()
    except LockHeld as e:
        raise SessionError(str(e)) from None
    logger.debug(f"Lock acquired → {path}")
    return path


def release_lock(db_path: str) -> None:
    try:
        os.remove(lock_path(db_path))
    except FileNotFoundError:
        pass


def _holder_pid(path: str) -> Optional[int]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return int(f.read().strip())
    except (OSError, ValueError):
        return None


def _alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        pass
    return True


def _holder(pid: Optional[int]) -> str:
    return f"pid {pid}" if pid is not None else "another session"


# ══════════════════════════════════════════════════════════════════
# JOURNAL + TRANSACTION LOGGING
# ══════════════════════════════════════════════════════════════════

def journal_append(path: str, txn: int, header: str, log) -> None:
    """Append one committed transaction: ``txn <n> <header>``, its INS/DEL lines, a blank line."""
    lines = [f"txn {txn} {header}"] + log.lines() + [""]
    with open(path, "a", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def log_transaction(
    predicate: str,
    args: List[str],
    status: str,
    updates: int = 0,
    rounds: int = 0,
    choice_points: int = 0,
    elapsed: float = 0.0,
    error: Optional[str] = None,
    log_dir: str = LOG_DIR,
) -> Dict[str, Any]:
    """Log a transaction summary to console, return dict, and append to JSONL log."""
    summary = {
        "timestamp": datetime.now().isoformat(),
        "predicate": predicate,
        "args": args,
        "status": status,
        "updates": updates,
        "rounds": rounds,
        "choice_points": choice_points,
        "elapsed_s": round(elapsed, 4),
        "error": error,
    }

    os.makedirs(log_dir, exist_ok=True)
    with open(os.path.join(log_dir, "transactions.jsonl"), "a", encoding="utf-8") as f:
        f.write(json.dumps(summary) + "\n")

    logger.info(
        f"{predicate}({', '.join(args)}): {status} -- {updates} updates, "
        f"{rounds} rounds, {choice_points} choice points"
    )
    return summary
