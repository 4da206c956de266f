"""
search.py
=========
Backtracking machinery shared by the executor procedures.

Every procedure is a generator that yields once per way it can succeed and,
when resumed after its last success, has undone its own updates. ``choose``
is the only source of nondeterminism; each call with more than one
alternative opens a choice point on the trail.
"""

import random
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, TypeVar

from src.kernel.errors import BudgetExceeded
from src.store.instance import Action, Instance, Tuple_
from src.store.update_log import UpdateLog

T = TypeVar("T")


@dataclass
class ChoicePoint:
    site: int
    remaining: int
    log_len: int


class SearchState:
    def __init__(
        self,
        pre: Instance,
        post: Instance,
        max_choices: int,
        trace: bool = False,
        seed: Optional[int] = None,
        debug_checks: bool = False,
    ):
        self.pre = pre
        self.post = post
        self.log = UpdateLog()
        self.trail: List[ChoicePoint] = []
        self.max_choices = max_choices
        self.choices = 0
        self.sites = 0
        self.tracing = trace
        self.trace: List[str] = []
        self.rng = random.Random(seed) if seed is not None else None
        self.debug_checks = debug_checks

    # ── trace ────────────────────────────────────────────────────
    def emit(self, line: str) -> None:
        if self.tracing:
            self.trace.append(line)

    # ── choice points ────────────────────────────────────────────
    def choose(self, alternatives: Sequence[T]) -> Iterator[T]:
        """Yield each alternative in turn; the caller undoes its work before resuming."""
        alts = list(alternatives)
        if not alts:
            return
        if self.rng is not None and len(alts) > 1:
            self.rng.shuffle(alts)
        if len(alts) == 1:
            self._spend()
            yield alts[0]
            return

        self.sites += 1
        point = ChoicePoint(self.sites, len(alts), len(self.log))
        self.trail.append(point)
        before = self._fingerprint() if self.debug_checks else None
        try:
            for k, alt in enumerate(alts, start=1):
                if k > 1:
                    self.emit(f"BACKTRACK site={point.site}")
                    if before is not None:
                        assert self._fingerprint() == before, f"undo mismatch at site {point.site}"
                self._spend()
                point.remaining = len(alts) - k
                self.emit(f"CHOOSE site={point.site} alt={k}/{len(alts)}")
                yield alt
            self.emit(f"BACKTRACK site={point.site}")
        finally:
            if self.trail and self.trail[-1] is point:
                self.trail.pop()

    def _spend(self) -> None:
        self.choices += 1
        if self.choices > self.max_choices:
            raise BudgetExceeded("choice", self.max_choices)

    def _fingerprint(self):
        return len(self.log), {k: frozenset(v) for k, v in self.post.relations.items()}

    # ── primitive updates ────────────────────────────────────────
    def insert(self, rel: str, t: Tuple_) -> Iterator[None]:
        """Add ``t`` to mutable ``rel`` unless it was deleted earlier in this transaction."""
        stored = self.post.relations[rel]
        if t in stored:
            yield
            return
        if self.log.conflicts(rel, t, Action.INSERT):
            return
        mark = len(self.log)
        stored.add(t)
        self.log.append(rel, t, Action.INSERT)
        self.emit(f"INS {rel} {_show(t)}")
        yield
        self.undo_to(mark)

    def delete(self, rel: str, t: Tuple_) -> Iterator[None]:
        """Remove ``t`` from mutable ``rel`` unless it was inserted earlier in this transaction."""
        stored = self.post.relations[rel]
        if t not in stored:
            yield
            return
        if self.log.conflicts(rel, t, Action.DELETE):
            return
        mark = len(self.log)
        stored.discard(t)
        self.log.append(rel, t, Action.DELETE)
        self.emit(f"DEL {rel} {_show(t)}")
        yield
        self.undo_to(mark)

    def undo_to(self, mark: int) -> None:
        for rel, t, action in self.log.truncate(mark):
            if action == Action.INSERT:
                self.post.relations[rel].discard(t)
            else:
                self.post.relations[rel].add(t)


def _show(t: Tuple_) -> str:
    return "(" + ", ".join(a.label for a in t) + ")"
