"""Updates, update buffers and internal nodes.

Keys are unsigned 64-bit integers.  An update is ``(key, kind)`` with
``kind`` ``+1`` for an insertion and ``-1`` for a deletion, so the signed sum
of all updates stored for a key equals its membership indicator.

Routing is left-closed: child ``i`` of a node owns ``[pivots[i-1], pivots[i])``.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from typing import NamedTuple

INSERT = 1
DELETE = -1
KEY_MAX = (1 << 64) - 1


class ContractError(ValueError):
    """An operation was called outside its precondition."""


class IntegrityError(RuntimeError):
    """A structural invariant was found broken."""


class Update(NamedTuple):
    key: int
    kind: int

    @property
    def is_insert(self) -> bool:
        return self.kind == INSERT


class UpdateBuffer:
    """Key-sorted updates with at most one update per key.

    Adding an update whose key is already present annihilates the pair when
    the kinds differ; an equal kind replaces (idempotent re-apply).
    """

    __slots__ = ("keys", "kinds")

    def __init__(self, keys=None, kinds=None):
        self.keys: list[int] = keys if keys is not None else []
        self.kinds: list[int] = kinds if kinds is not None else []

    def __len__(self):
        return len(self.keys)

    def __iter__(self):
        return map(Update, self.keys, self.kinds)

    def __repr__(self):
        body = ", ".join(f"{'+' if t > 0 else '-'}{k}" for k, t in zip(self.keys, self.kinds))
        return f"UpdateBuffer([{body}])"

    def __eq__(self, other):
        return (isinstance(other, UpdateBuffer) and self.keys == other.keys
                and self.kinds == other.kinds)

    def copy(self) -> "UpdateBuffer":
        return UpdateBuffer(list(self.keys), list(self.kinds))

    def add(self, key: int, kind: int) -> int:
        """Merge one update; returns the change in net insertions (always ``kind``
        unless an equal-kind duplicate was absorbed, then 0)."""
        keys = self.keys
        i = bisect_left(keys, key)
        if i < len(keys) and keys[i] == key:
            if self.kinds[i] == kind:
                return 0
            del keys[i]
            del self.kinds[i]
            return kind
        keys.insert(i, key)
        self.kinds.insert(i, kind)
        return kind

    def merge(self, keys, kinds) -> int:
        net = 0
        for k, t in zip(keys, kinds):
            net += self.add(k, t)
        return net

    def net(self) -> int:
        return sum(self.kinds)

    def count_between(self, lo, hi) -> int:
        """Number of updates with ``lo <= key < hi`` (``None`` = unbounded)."""
        a = 0 if lo is None else bisect_left(self.keys, lo)
        b = len(self.keys) if hi is None else bisect_left(self.keys, hi)
        return b - a

    def slice_between(self, lo, hi):
        a = 0 if lo is None else bisect_left(self.keys, lo)
        b = len(self.keys) if hi is None else bisect_left(self.keys, hi)
        return self.keys[a:b], self.kinds[a:b]

    def take_between(self, lo, hi, limit=None):
        """Remove and return up to ``limit`` smallest updates in ``[lo, hi)``."""
        a = 0 if lo is None else bisect_left(self.keys, lo)
        b = len(self.keys) if hi is None else bisect_left(self.keys, hi)
        if limit is not None:
            b = min(b, a + limit)
        keys, kinds = self.keys[a:b], self.kinds[a:b]
        del self.keys[a:b]
        del self.kinds[a:b]
        return keys, kinds

    def route_counts(self, pivots) -> list[int]:
        """Updates per child for a node with the given pivots."""
        cuts = [0] + [bisect_left(self.keys, p) for p in pivots] + [len(self.keys)]
        return [cuts[i + 1] - cuts[i] for i in range(len(cuts) - 1)]

    def split_at(self, pivot) -> "UpdateBuffer":
        """Keep keys < pivot, return a new buffer with keys >= pivot."""
        i = bisect_left(self.keys, pivot)
        right = UpdateBuffer(self.keys[i:], self.kinds[i:])
        del self.keys[i:]
        del self.kinds[i:]
        return right

    def extend_right(self, other: "UpdateBuffer"):
        if other.keys and self.keys and other.keys[0] <= self.keys[-1]:
            raise ContractError("extend_right needs strictly larger keys")
        self.keys.extend(other.keys)
        self.kinds.extend(other.kinds)


def route_key(pivots, key) -> int:
    """Index of the child whose interval ``[pivots[i-1], pivots[i])`` holds key."""
    return bisect_right(pivots, key)


def child_bounds(pivots, i, lo=None, hi=None):
    """Key interval of child ``i`` given the node's own interval ``[lo, hi)``."""
    return (pivots[i - 1] if i > 0 else lo,
            pivots[i] if i < len(pivots) else hi)


class InternalNode:
    """One block: pivots, child block ids, update buffer and per-child
    extreme leaf sizes (from which ``aux_max``/``aux_min`` derive)."""

    __slots__ = ("bid", "level", "pivots", "children", "buffer",
                 "child_max", "child_min", "merged")
    is_leaf = False

    def __init__(self, bid, level, pivots=None, children=None, buffer=None,
                 child_max=None, child_min=None):
        self.bid = bid
        self.level = level            # 1: children are leaves
        self.pivots: list[int] = pivots or []
        self.children: list[int] = children or []
        self.buffer = buffer if buffer is not None else UpdateBuffer()
        self.child_max: list[int] = child_max or [0] * len(self.children)
        self.child_min: list[int] = child_min or [0] * len(self.children)
        self.merged = False           # buffer came from combining two siblings

    def __repr__(self):
        return (f"InternalNode(bid={self.bid}, level={self.level}, "
                f"pivots={self.pivots}, children={self.children}, buf={len(self.buffer)})")

    @property
    def aux_max(self):
        cm = self.child_max
        best = max(cm)
        return cm.index(best), best

    @property
    def aux_min(self):
        cm = self.child_min
        best = min(cm)
        return cm.index(best), best

    def is_overfull(self, cap: int) -> bool:
        return len(self.buffer) > cap

    def route(self, key) -> int:
        return bisect_right(self.pivots, key)

    def set_child_aux(self, i, mx, mn):
        self.child_max[i] = mx
        self.child_min[i] = mn


def select_flush_child(node: InternalNode, cap: int):
    """Child receiving the most buffered updates, as ``(index, count)``.

    Ties go to the smallest index.  Requires ``len(node.buffer) > cap``.
    """
    if len(node.buffer) <= cap:
        raise ContractError(
            f"select_flush_child on a buffer of {len(node.buffer)} <= cap {cap}")
    counts = node.buffer.route_counts(node.pivots)
    best = max(counts)
    return counts.index(best), best


def take_for_child(node: InternalNode, i: int, limit: int):
    lo, hi = child_bounds(node.pivots, i)
    return node.buffer.take_between(lo, hi, limit)


def split_internal(node: InternalNode, right_bid: int):
    """Split ``node`` at its median child.  ``node`` keeps the left half;
    returns ``(right_node, separator)``."""
    n = len(node.children)
    if n < 2:
        raise ContractError("cannot split a node with fewer than two children")
    mid = (n + 1) // 2
    sep = node.pivots[mid - 1]
    right = InternalNode(
        right_bid, node.level,
        pivots=node.pivots[mid:], children=node.children[mid:],
        buffer=node.buffer.split_at(sep),
        child_max=node.child_max[mid:], child_min=node.child_min[mid:])
    del node.pivots[mid - 1:]
    del node.children[mid:]
    del node.child_max[mid:]
    del node.child_min[mid:]
    right.merged = node.merged
    return right, sep


def merge_internal(left: InternalNode, right: InternalNode, sep):
    """Append ``right`` (the adjacent right sibling, separated by ``sep``)
    into ``left``.  The combined buffer may exceed the cap; it is flagged."""
    if left.level != right.level:
        raise ContractError("merge of nodes at different levels")
    if left.pivots and left.pivots[-1] >= sep:
        raise ContractError("merge with a non-adjacent sibling")
    if right.pivots and right.pivots[0] < sep:
        raise ContractError("merge with a non-adjacent sibling")
    left.pivots.append(sep)
    left.pivots.extend(right.pivots)
    left.children.extend(right.children)
    left.child_max.extend(right.child_max)
    left.child_min.extend(right.child_min)
    left.buffer.extend_right(right.buffer)
    left.merged = True
