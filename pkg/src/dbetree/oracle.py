"""Reference ordered set used as ground truth."""
from __future__ import annotations

from sortedcontainers import SortedList

from .core import ContractError, DELETE, INSERT


class Oracle:
    def __init__(self, keys=()):
        self._s = SortedList(set(keys))

    def __len__(self):
        return len(self._s)

    def __contains__(self, key):
        return key in self._s

    def insert(self, key):
        if key in self._s:
            raise ContractError(f"insert of present key {key}")
        self._s.add(key)

    def delete(self, key):
        if key not in self._s:
            raise ContractError(f"delete of absent key {key}")
        self._s.remove(key)

    def apply_update(self, key, kind):
        (self.insert if kind == INSERT else self.delete)(key)

    def predecessor(self, key):
        i = self._s.bisect_right(key)
        return self._s[i - 1] if i else None

    def member(self, key) -> bool:
        return key in self._s

    def range_report(self, a, b):
        if a > b:
            raise ContractError(f"empty range [{a}, {b}]")
        return list(self._s.irange(a, b))

    def contents(self):
        return list(self._s)

    def key_at(self, i):
        return self._s[i]


__all__ = ["Oracle", "INSERT", "DELETE"]
