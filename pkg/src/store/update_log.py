"""
update_log.py
=============
The ordered record of effective inserts/deletes made by one transaction.

A (relation, tuple) pair never appears with both actions; ``conflicts``
answers the executor's "previously inserted / previously deleted" test.
"""

from typing import Dict, Iterator, List, Tuple

from src.store.instance import Action, Tuple_

Entry = Tuple[str, Tuple_, Action]


class UpdateLog:
    def __init__(self, entries: List[Entry] = None):
        self.entries: List[Entry] = []
        self._index: Dict[Tuple[str, Tuple_], Action] = {}
        for rel, t, action in entries or []:
            self.append(rel, t, action)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Entry]:
        return iter(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, UpdateLog) and self.entries == other.entries

    def conflicts(self, rel: str, t: Tuple_, action: Action) -> bool:
        recorded = self._index.get((rel, t))
        return recorded is not None and recorded != action

    def append(self, rel: str, t: Tuple_, action: Action) -> None:
        if self.conflicts(rel, t, action):
            raise ValueError(f"conflicting {action.value} of {rel}{_ids(t)}")
        self.entries.append((rel, t, action))
        self._index[(rel, t)] = action

    def truncate(self, length: int) -> List[Entry]:
        """Drop entries past ``length``; returns them newest first."""
        dropped = self.entries[length:]
        del self.entries[length:]
        for rel, t, _ in dropped:
            self._index.pop((rel, t), None)
        return list(reversed(dropped))

    def key(self) -> frozenset:
        return frozenset(self.entries)

    def lines(self) -> List[str]:
        return [f"{action.value} {rel}\t{_ids(t)}" for rel, t, action in self.entries]


def _ids(t: Tuple_) -> str:
    return "\t".join(str(a.id) for a in t)
