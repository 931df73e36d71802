"""The classic amortized B^epsilon-tree, kept as a measurement baseline.

Internal nodes have up to ``max(4, floor(B**epsilon))`` children and a buffer
of up to ``B`` updates; leaves hold between ``B/4`` and ``B`` keys in one
block.  A full buffer sends every update routed to its busiest child one
level down, and whatever that overflows or unbalances is fixed on the spot,
so a single update can set off a long cascade.  Queries push the updates on
their search path into the leaf first.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
import math

from .core import DELETE, INSERT, ContractError, UpdateBuffer, child_bounds
from .pager import Pager


class ANode:
    __slots__ = ("bid", "is_leaf", "keys", "pivots", "children", "buffer")

    def __init__(self, bid, is_leaf, keys=None, pivots=None, children=None, buffer=None):
        self.bid = bid
        self.is_leaf = is_leaf
        self.keys: list[int] = keys if keys is not None else []
        self.pivots: list[int] = pivots if pivots is not None else []
        self.children: list[int] = children if children is not None else []
        self.buffer = buffer if buffer is not None else UpdateBuffer()

    def route(self, key):
        return bisect_right(self.pivots, key)


class AmortizedTree:
    def __init__(self, B=256, epsilon=0.5, cache_blocks=None, pager=None, logBN=3):
        if B < 16:
            raise ContractError("B must be at least 16")
        self.B = B
        self.fanout_max = max(4, int(math.floor(B ** epsilon + 1e-9)))
        self.fanout_min = max(2, self.fanout_max // 2)
        self.leaf_max = B
        self.leaf_min = B // 4
        self.pager = pager or Pager(cache_blocks or 4 * logBN + 8)
        self.events = {"flush": 0, "leaf_split": 0, "leaf_merge": 0,
                       "node_split": 0, "node_merge": 0, "cascade_depth": 0}
        leaf = self._new(True)
        root = self._new(False, children=[leaf.bid])
        self.pager.pin(root.bid)
        self.root_bid = root.bid
        self.n_live = 0

    # -- block helpers ----------------------------------------------------

    def _new(self, is_leaf, **kw):
        bid = self.pager.alloc(None)
        node = ANode(bid, is_leaf, **kw)
        self.pager.put(bid, node)
        return node

    def _get(self, bid, write=True) -> ANode:
        return self.pager.access(bid, write)

    @property
    def root(self) -> ANode:
        return self.pager.peek(self.root_bid)

    # -- updates ----------------------------------------------------------

    def insert(self, key):
        self.apply_update(key, INSERT)

    def delete(self, key):
        self.apply_update(key, DELETE)

    def apply_update(self, key, kind):
        root = self._get(self.root_bid)
        root.buffer.add(key, kind)
        self.n_live += kind
        if len(root.buffer) > self.B:
            self._flush(root, 1)
        self._fix_root()

    def _flush(self, node, depth):
        """Empty ``node``'s buffer below ``B`` by whole-child flushes."""
        self.events["cascade_depth"] = max(self.events["cascade_depth"], depth)
        while len(node.buffer) > self.B:
            counts = node.buffer.route_counts(node.pivots)
            i = counts.index(max(counts))
            self._move_down(node, i, depth)
            self._rebalance(node, i, depth)

    def _move_down(self, node, i, depth):
        lo, hi = child_bounds(node.pivots, i)
        keys, kinds = node.buffer.take_between(lo, hi)
        self._get(node.bid)
        child = self._get(node.children[i])
        self.events["flush"] += 1
        if child.is_leaf:
            _apply_to_leaf(child, keys, kinds)
        else:
            child.buffer.merge(keys, kinds)
            if len(child.buffer) > self.B:
                self._flush(child, depth + 1)

    def _rebalance(self, node, i, depth):
        """Split or merge child ``i`` of ``node`` if it left its size range."""
        child = self._get(node.children[i])
        if child.is_leaf:
            if len(child.keys) > self.leaf_max:
                self._split_child(node, i)
                self.events["leaf_split"] += 1
            elif len(child.keys) < self.leaf_min and len(node.children) > 1:
                self._merge_child(node, i, depth)
                self.events["leaf_merge"] += 1
        else:
            if len(child.children) > self.fanout_max:
                self._split_child(node, i)
                self.events["node_split"] += 1
            elif len(child.children) < self.fanout_min and len(node.children) > 1:
                self._merge_child(node, i, depth)
                self.events["node_merge"] += 1

    def _split_child(self, node, i):
        child = self._get(node.children[i])
        if child.is_leaf:
            h = len(child.keys) // 2
            sep = child.keys[h]
            right = self._new(True, keys=child.keys[h:])
            del child.keys[h:]
        else:
            n = len(child.children)
            mid = (n + 1) // 2
            sep = child.pivots[mid - 1]
            right = self._new(False, pivots=child.pivots[mid:], children=child.children[mid:],
                              buffer=child.buffer.split_at(sep))
            del child.pivots[mid - 1:]
            del child.children[mid:]
        self._get(node.bid)
        node.pivots.insert(i, sep)
        node.children.insert(i + 1, right.bid)

    def _merge_child(self, node, i, depth):
        j = i + 1 if i + 1 < len(node.children) else i - 1
        a, b = min(i, j), max(i, j)
        left, right = self._get(node.children[a]), self._get(node.children[b])
        sep = node.pivots[a]
        if left.is_leaf:
            left.keys.extend(right.keys)
        else:
            left.pivots.append(sep)
            left.pivots.extend(right.pivots)
            left.children.extend(right.children)
            left.buffer.extend_right(right.buffer)
        del node.pivots[a]
        del node.children[b]
        self.pager.free(right.bid)
        too_big = (len(left.keys) > self.leaf_max if left.is_leaf
                   else len(left.children) > self.fanout_max)
        if too_big:
            self._split_child(node, a)
        if not left.is_leaf and len(left.buffer) > self.B:
            # the merged buffer overflows: this is where cascades come from
            self._flush(left, depth + 1)
            for k in range(len(node.children) - 1, -1, -1):
                if k < len(node.children):
                    self._rebalance(node, k, depth)

    def _fix_root(self):
        root = self.root
        if len(root.children) > self.fanout_max:
            top = self._new(False, children=[root.bid])
            self._split_child(top, 0)
            self.pager.pin(top.bid)
            self.pager.unpin(root.bid)
            self.root_bid = top.bid
            self.events["node_split"] += 1
        elif len(root.children) == 1:
            child = self._get(root.children[0])
            if not child.is_leaf:
                child.buffer.merge(root.buffer.keys, root.buffer.kinds)
                self.pager.pin(child.bid)
                self.pager.unpin(root.bid)
                self.pager.free(root.bid)
                self.root_bid = child.bid
                if len(child.buffer) > self.B:
                    self._flush(child, 1)
                self._fix_root()

    # -- queries (these push updates down and may restructure) -----------

    def _push(self, node, key, depth=1):
        i = node.route(key)
        self._move_down(node, i, depth)
        child = self._get(node.children[i])
        if not child.is_leaf:
            self._push(child, key, depth + 1)
        self._rebalance(node, node.route(key), depth)

    def _leaf_for(self, key):
        # restructuring after a push can move buffered updates for this leaf
        # onto the new search path, so push until the path is clean
        while True:
            self._push(self._get(self.root_bid), key)
            self._fix_root()
            node = self._get(self.root_bid, write=False)
            path = []
            lo = hi = None
            while not node.is_leaf:
                path.append(node)
                i = node.route(key)
                lo, hi = child_bounds(node.pivots, i, lo, hi)
                node = self._get(node.children[i], write=False)
            if not any(n.buffer.slice_between(lo, hi)[0] for n in path):
                return node, lo, hi

    def predecessor(self, key):
        while True:
            leaf, lo, _ = self._leaf_for(key)
            i = bisect_right(leaf.keys, key)
            if i:
                return leaf.keys[i - 1]
            if not lo:
                return None
            key = lo - 1

    def member(self, key) -> bool:
        return self.predecessor(key) == key

    def range_report(self, a, b):
        if a > b:
            raise ContractError(f"empty range [{a}, {b}]")
        out = []
        key = a
        while True:
            leaf, _, hi = self._leaf_for(key)
            out.extend(leaf.keys[bisect_left(leaf.keys, a):bisect_right(leaf.keys, b)])
            if hi is None or hi > b:
                return out
            key = hi

    # -- inspection (no I/O) -------------------------------------------------

    def contents(self):
        net = {}
        stack = [self.root_bid]
        while stack:
            n = self.pager.peek(stack.pop())
            for k, t in zip(n.buffer.keys, n.buffer.kinds):
                net[k] = net.get(k, 0) + t
            if n.is_leaf:
                for k in n.keys:
                    net[k] = net.get(k, 0) + 1
            else:
                stack.extend(n.children)
        return sorted(k for k, v in net.items() if v == 1)

    def height(self):
        h, n = 0, self.root
        while not n.is_leaf:
            n = self.pager.peek(n.children[0])
            h += 1
        return h


def _apply_to_leaf(leaf, keys, kinds):
    cur = leaf.keys
    drop = {k for k, t in zip(keys, kinds) if t < 0}
    if drop:
        cur = [k for k in cur if k not in drop]
    adds = [k for k, t in zip(keys, kinds) if t > 0]
    if adds:
        cur = sorted(set(cur).union(adds))
    leaf.keys = cur
