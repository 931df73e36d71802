"""The split/merge maintenance cycle as a resumable generator.

One cycle is a split phase followed by a merge phase.  A phase descends to
the globally largest (split) or smallest (merge) leaf using the per-child
extreme sizes kept in every internal node, splits or merges it when it has
left the size band, then walks back to the root fixing fanout, flushing any
node whose buffer overflowed because of a merge, and draining the root.

The generator yields :data:`~dbetree.pager.IO` after every block transfer and
:data:`QUIESCENT` at the end of each phase.  All structural changes happen
between yields, so readers can use the tree at any yield.

Loop labels (``l3`` ... ``l24``) name the loops of the published pseudocode;
:attr:`Maintenance.loop_max` keeps the largest iteration count seen for each.
"""
from __future__ import annotations

from collections import Counter

from .core import (IntegrityError, InternalNode, merge_internal, select_flush_child,
                   split_internal, take_for_child)
from .pager import IO


class _Quiescent:
    __slots__ = ()

    def __repr__(self):
        return "QUIESCENT"


QUIESCENT = _Quiescent()

# loops bounded by the height and by the flush count of one overfull buffer
HEIGHT_LOOPS = ("l3", "l5", "l11", "l19")
FLUSH_LOOPS = ("l9", "l18")
WALK_LOOPS = ("l16", "l24")
LOOPS = HEIGHT_LOOPS + FLUSH_LOOPS + WALK_LOOPS


class Maintenance:
    def __init__(self, tree, root_drain_only=False):
        self.tree = tree
        self.p = tree.p
        self.phase = "split"
        self.cycles = 0
        self.work_done = 0
        self.loop_max = dict.fromkeys(LOOPS, 0)
        self.loop_violations: list[tuple[str, int]] = []
        self.events = Counter()
        self.arrivals = 0             # user updates pushed into the root so far
        self.arrival_max = 0          # most arrivals during one l5 iteration
        self.cursor: list[str] = []
        self.listeners = []
        self.quiescent_hooks = []
        self.root_drain_only = root_drain_only
        self.park = False             # stop at the next phase boundary
        self.parked = False
        self._gen = self._run()
        self._at_boundary = True

    # -- driver ------------------------------------------------------------

    def resume(self) -> bool:
        """Advance until one block transfer happened (``True``) or a whole
        cycle ran without any (``False``)."""
        ends = 0
        need = 2 if self._at_boundary else 3
        for tok in self._gen:
            if tok is IO:
                self._at_boundary = False
                if self.listeners:
                    rec = self.record()
                    for fn in self.listeners:
                        fn(rec)
                return True
            ends += 1
            self._at_boundary = True
            if ends >= need:
                return False
        raise IntegrityError("maintenance cycle terminated")

    def record(self) -> dict:
        t = self.tree
        return {"phase": self.phase, "depth": len(self.cursor),
                "where": self.cursor[-1] if self.cursor else "",
                "reads": t.pager.reads, "writes": t.pager.writes,
                "root_buffer": len(t.root.buffer)}

    def bounds(self) -> dict:
        h = self.p.max_height
        d = self.p.drain_loop_cap
        out = {name: h for name in HEIGHT_LOOPS + WALK_LOOPS}
        out.update({name: d for name in FLUSH_LOOPS})
        return out

    def _loop(self, name, n):
        if n > self.loop_max[name]:
            self.loop_max[name] = n
            limit = self.bounds()[name]
            if n > limit:
                self.loop_violations.append((name, n))

    def _arrived(self, n):
        if n > self.arrival_max:
            self.arrival_max = n
            if n > self.p.buffer_cap:
                self.loop_violations.append(("arrivals", n))

    def _run(self):
        while True:
            for split in (True, False):
                self.phase = "split" if split else "merge"
                if self.root_drain_only:
                    yield from self._drain_root()
                else:
                    yield from self._phase(split)
                if not split:
                    self.cycles += 1
                for hook in self.quiescent_hooks:
                    hook(self.tree)
                yield QUIESCENT
                while self.park:
                    self.parked = True
                    yield QUIESCENT

    # -- one phase ---------------------------------------------------------

    def _phase(self, split):
        t, io, tau = self.tree, self.tree.io, self.p.tau
        self.cursor.append("l3")
        path = [t.root_bid]
        node = t.root
        while node.level > 1:
            i = node.aux_max[0] if split else node.aux_min[0]
            bid = node.children[i]
            yield from io.touch(bid)
            path.append(bid)
            node = t.node(bid)
        self._loop("l3", len(path))
        self.cursor.pop()
        i, size = node.aux_max if split else node.aux_min
        leaf_bid = node.children[i]

        changed = False
        if split and size >= 4 * tau:
            yield from self._split_leaf(path, leaf_bid, None)
            changed = True
        elif not split and size < 2 * tau and len(node.children) > 1:
            yield from self._merge_leaf(path, leaf_bid)
            changed = True
        if changed:
            self.work_done += 1
            yield from self._upward(path)
        else:
            yield from self._drain_root()

    def _split_leaf(self, path, leaf_bid, min_size):
        t = self.tree
        par = t.node(path[-1])
        leaf = t.node(leaf_bid)

        def commit(right, sep):
            i = par.children.index(leaf.bid)
            par.pivots.insert(i, sep)
            par.children.insert(i + 1, right.bid)
            par.child_max.insert(i + 1, right.net_size)
            par.child_min.insert(i + 1, right.net_size)
            par.child_max[i] = par.child_min[i] = leaf.net_size

        yield from t.leaves.split(leaf, min_size, extra=[par.bid], on_commit=commit)
        self.events["leaf_split"] += 1

    def _merge_leaf(self, path, leaf_bid):
        t = self.tree
        par = t.node(path[-1])
        i = par.children.index(leaf_bid)
        cands = [j for j in (i - 1, i + 1) if 0 <= j < len(par.children)]
        j = min(cands, key=lambda j: (par.child_max[j], j))
        a, b = min(i, j), max(i, j)
        left, right = t.node(par.children[a]), t.node(par.children[b])

        def commit():
            del par.pivots[a]
            del par.children[b]
            del par.child_max[b]
            del par.child_min[b]
            par.child_max[a] = par.child_min[a] = left.net_size

        yield from t.leaves.merge(left, right, par.pivots[a], extra=[par.bid],
                                  on_commit=commit)
        self.events["leaf_merge"] += 1
        if left.net_size > 5 * self.p.tau:
            yield from self._split_leaf(path, left.bid, 0)
            self.events["leaf_resplit"] += 1

    # -- upward propagation ------------------------------------------------

    def _upward(self, path):
        t, io = self.tree, self.tree.io
        self.cursor.append("l5")
        k = len(path) - 1
        child = None
        iters = 0
        while k >= 0:
            iters += 1
            mark = self.arrivals
            yield from io.touch(path[k], write=True)
            n1 = t.node(path[k])
            if child is not None and child in n1.children:
                c = t.node(child)
                n1.set_child_aux(n1.children.index(child), c.aux_max[1], c.aux_min[1])
            k, over = yield from self._restructure(path, k)
            for prefix in over:
                yield from self._flush_overfull(prefix)
            yield from self._drain_root()
            child = path[k] if k < len(path) else None
            k -= 1
            self._arrived(self.arrivals - mark)
        self._loop("l5", iters)
        self.cursor.pop()

    def _restructure(self, path, k):
        """Fix the fanout of ``path[k]``.  Returns the (possibly shifted)
        position of the node in ``path`` and the root paths of the non-root
        nodes left overfull by the change."""
        t, io, p = self.tree, self.tree.io, self.p
        n1 = t.node(path[k])
        cap = p.buffer_cap
        is_root = k == 0
        nch = len(n1.children)

        if nch > p.fanout_max:
            new_bid = yield from io.alloc(None)
            top = (yield from io.alloc(None)) if is_root else path[k - 1]
            yield from io.touch_all([n1.bid, new_bid, top], write=True)
            right, sep = split_internal(n1, new_bid)
            io.assign(new_bid, right)
            if is_root:
                io.assign(top, InternalNode(
                    top, n1.level + 1, pivots=[sep], children=[n1.bid, new_bid],
                    child_max=[n1.aux_max[1], right.aux_max[1]],
                    child_min=[n1.aux_min[1], right.aux_min[1]]))
                t.set_root(top)
                path.insert(0, top)
                k += 1
            else:
                par = t.node(top)
                i = par.children.index(n1.bid)
                par.pivots.insert(i, sep)
                par.children.insert(i + 1, new_bid)
                par.child_max.insert(i + 1, right.aux_max[1])
                par.child_min.insert(i + 1, right.aux_min[1])
                par.set_child_aux(i, n1.aux_max[1], n1.aux_min[1])
            self.events["internal_split"] += 1
            over = [path[:k] + [x.bid] for x in (n1, right) if x.is_overfull(cap)]
            return k, over

        if not is_root and nch < p.fanout_min:
            par = t.node(path[k - 1])
            if len(par.children) < 2:
                return k, []
            i = par.children.index(n1.bid)
            j = i + 1 if i + 1 < len(par.children) else i - 1
            a, b = min(i, j), max(i, j)
            a_bid, b_bid = par.children[a], par.children[b]
            yield from io.touch_all([par.bid, a_bid, b_bid], write=True)
            left, right = t.node(a_bid), t.node(b_bid)
            merge_internal(left, right, par.pivots[a])
            del par.pivots[a]
            del par.children[b]
            del par.child_max[b]
            del par.child_min[b]
            nodes = [left]
            if len(left.children) > p.fanout_max:
                # reuse the absorbed sibling's block for the upper half
                right, sep = split_internal(left, b_bid)
                io.assign(b_bid, right)
                par.pivots.insert(a, sep)
                par.children.insert(a + 1, b_bid)
                par.child_max.insert(a + 1, right.aux_max[1])
                par.child_min.insert(a + 1, right.aux_min[1])
                nodes.append(right)
                self.events["internal_remerge_split"] += 1
            else:
                io.free(b_bid)
            par.set_child_aux(a, left.aux_max[1], left.aux_min[1])
            path[k] = a_bid
            del path[k + 1:]
            self.events["internal_merge"] += 1
            over = []
            for x in nodes:
                if x.is_overfull(cap):
                    over.append(path[:k] + [x.bid])
                else:
                    x.merged = False
            return k, over

        if is_root and nch == 1 and n1.level > 1:
            c_bid = n1.children[0]
            yield from io.touch_all([n1.bid, c_bid], write=True)
            child = t.node(c_bid)
            # the root's updates are newer than the child's
            child.buffer.merge(n1.buffer.keys, n1.buffer.kinds)
            t.set_root(c_bid)
            io.free(n1.bid)
            del path[0]
            self.events["root_collapse"] += 1
            return 0, []

        return k, []

    # -- flushing ----------------------------------------------------------

    def _flush_overfull(self, prefix):
        """Flush a non-root node that overflowed after a merge or split until
        its buffer is back within the cap."""
        node = self.tree.node(prefix[-1])
        self.cursor.append("l9")
        iters = 0
        while node.is_overfull(self.p.buffer_cap):
            iters += 1
            yield from self._flush_path(list(prefix), "l11", "l16")
        node.merged = False
        self._loop("l9", iters)
        self.cursor.pop()

    def _drain_root(self):
        t = self.tree
        self.cursor.append("l18")
        iters = 0
        while t.root.is_overfull(self.p.buffer_cap):
            iters += 1
            yield from self._flush_path([t.root_bid], "l19", "l24")
        self._loop("l18", iters)
        self.cursor.pop()

    def _flush_path(self, path, lname, wname):
        """Push one flush quantum down from ``path[-1]``, continuing into each
        child that becomes overfull, then refresh the extreme sizes upward if
        a leaf was reached."""
        t, io, p = self.tree, self.tree.io, self.p
        cap, q = p.buffer_cap, p.flush_quantum
        self.cursor.append(lname)
        steps = 0
        while True:
            n3 = t.node(path[-1])
            if not n3.is_overfull(cap):
                break
            steps += 1
            i, _ = select_flush_child(n3, cap)
            c_bid = n3.children[i]
            if n3.level == 1:
                leaf = t.node(c_bid)
                yield from t.leaves.bulk_insert(
                    leaf, lambda: take_for_child(n3, i, q), extra=[n3.bid])
                self.events["flush_leaf"] += 1
                self.work_done += 1
                self._loop(lname, steps)
                self.cursor.pop()
                yield from self._aux_walk(path, leaf, wname)
                return
            yield from io.touch_all([n3.bid, c_bid], write=True)
            keys, kinds = take_for_child(n3, i, q)
            t.node(c_bid).buffer.merge(keys, kinds)
            self.events["flush_internal"] += 1
            self.work_done += 1
            path.append(c_bid)
        self._loop(lname, steps)
        self.cursor.pop()

    def _aux_walk(self, path, leaf, name):
        """Propagate a leaf's new size to its ancestors' extreme-size entries,
        stopping early once an entry is already correct."""
        t, io = self.tree, self.tree.io
        self.cursor.append(name)
        child, mx, mn = leaf.bid, leaf.net_size, leaf.net_size
        steps = 0
        for bid in reversed(path):
            steps += 1
            yield from io.touch(bid, write=True)
            node = t.node(bid)
            i = node.children.index(child)
            if node.child_max[i] == mx and node.child_min[i] == mn:
                break
            node.set_child_aux(i, mx, mn)
            child, mx, mn = bid, node.aux_max[1], node.aux_min[1]
        self._loop(name, steps)
        self.cursor.pop()
