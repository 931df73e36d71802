"""Leaves as two-level micro-trees.

A leaf is a *micro-root* (header blocks holding a key-sorted update buffer and
the routing table of its micro-leaves) over an ordered run of *micro-leaves*,
each a sorted array of inserted keys spread over ``ceil(n/B)`` blocks.
Deletions live only in the micro-root buffer; when flushed into a micro-leaf
they annihilate the matching insertion, so micro-leaves never hold deletions.

Every mutating operation here is a generator driven through
:class:`dbetree.pager.StepIO`: it yields once per block transfer and applies
each structural change atomically between yields, so the leaf is consistent
whenever control is handed back to the caller.
"""
from __future__ import annotations

from array import array
from bisect import bisect_left, bisect_right

from .core import ContractError, IntegrityError, UpdateBuffer, child_bounds


class MicroLeaf:
    __slots__ = ("keys", "blocks")

    def __init__(self, keys, blocks):
        self.keys: array = keys
        self.blocks: list[int] = blocks

    def __len__(self):
        return len(self.keys)

    def __repr__(self):
        return f"MicroLeaf(n={len(self.keys)}, blocks={self.blocks})"


class Leaf:
    __slots__ = ("blocks", "buffer", "mls", "ml_pivots", "net_size")
    is_leaf = True

    def __init__(self, blocks):
        self.blocks: list[int] = blocks
        self.buffer = UpdateBuffer()
        self.mls: list[MicroLeaf] = []
        self.ml_pivots: list[int] = []
        self.net_size = 0

    @property
    def bid(self):
        return self.blocks[0]

    def __repr__(self):
        return (f"Leaf(bid={self.bid}, net={self.net_size}, mr={len(self.buffer)}, "
                f"mls={[len(m) for m in self.mls]})")

    def header_span(self, B) -> int:
        """Header blocks actually occupied (buffer plus routing table)."""
        used = -(-(len(self.buffer) + 3 * len(self.mls)) // B)
        return max(1, min(used, len(self.blocks)))

    def header_used(self, B) -> list[int]:
        return self.blocks[:self.header_span(B)]

    def header_upto(self, B, add_buf=0, add_mls=0) -> list[int]:
        """Header blocks needed if the buffer and routing table grow."""
        used = -(-(len(self.buffer) + add_buf + 3 * (len(self.mls) + add_mls)) // B)
        return self.blocks[:max(1, min(used, len(self.blocks)))]

    def ml_bounds(self, i):
        return child_bounds(self.ml_pivots, i)

    def recount(self) -> int:
        return sum(len(m.keys) for m in self.mls) + self.buffer.net()

    def live_keys(self, lo=None, hi=None) -> list[int]:
        """Net insertions with ``lo <= key < hi``; no I/O accounting."""
        out = []
        for m in self.mls:
            ks = m.keys
            a = 0 if lo is None else bisect_left(ks, lo)
            b = len(ks) if hi is None else bisect_left(ks, hi)
            out.extend(ks[a:b])
        return apply_buffer(out, *self.buffer.slice_between(lo, hi))


def apply_buffer(sorted_keys, keys, kinds) -> list[int]:
    """Adjust a sorted key list by buffered updates (insert adds, delete drops)."""
    if not keys:
        return list(sorted_keys)
    drop = {k for k, t in zip(keys, kinds) if t < 0}
    out = [k for k in sorted_keys if k not in drop] if drop else list(sorted_keys)
    adds = [k for k, t in zip(keys, kinds) if t > 0]
    if adds:
        out.extend(adds)
        out.sort()
    return out


def _blocks_for(n, B):
    return max(1, -(-n // B))


class LeafStore:
    """Leaf operations bound to a :class:`StepIO` and parameter set."""

    def __init__(self, io, params):
        self.io = io
        self.p = params
        self.B = params.B
        self.stats = {"microflush": 0, "ml_split": 0, "ml_merge": 0,
                      "leaf_split": 0, "leaf_merge": 0}

    # -- allocation ----------------------------------------------------

    def new_leaf(self):
        blocks = []
        leaf = Leaf(blocks)
        for _ in range(self.p.leaf_header_blocks):
            bid = yield from self.io.alloc(leaf)
            blocks.append(bid)
        return leaf

    def free_leaf(self, leaf):
        for m in leaf.mls:
            for b in m.blocks:
                self.io.free(b)
        for b in leaf.blocks:
            self.io.free(b)

    def _rewrite(self, leaf, start, n_old, key_lists, mutate=None, pivots=None):
        """Replace ``leaf.mls[start:start+n_old]`` by micro-leaves holding
        ``key_lists`` (each sorted, consecutive), reusing blocks.

        The run's outer boundaries are kept; its inner pivots become
        ``pivots`` (default: first key of each list after the first).
        ``mutate`` runs inside the same atomic section.
        """
        io, B = self.io, self.B
        old = leaf.mls[start:start + n_old]
        pool = [b for m in old for b in m.blocks]
        need = sum(_blocks_for(len(ks), B) for ks in key_lists)
        fresh = []
        while len(pool) + len(fresh) < need:
            bid = yield from io.alloc(None)
            fresh.append(bid)
        avail = pool + fresh
        used, spare = avail[:need], avail[need:]
        hdr = leaf.header_upto(B, add_mls=max(0, len(key_lists) - n_old))
        yield from io.touch_all(hdr + used, write=True)

        new_mls, pos = [], 0
        for ks in key_lists:
            k = _blocks_for(len(ks), B)
            m = MicroLeaf(ks if isinstance(ks, array) else array("Q", ks), used[pos:pos + k])
            pos += k
            for b in m.blocks:
                io.assign(b, m)
            new_mls.append(m)
        if pivots is None:
            pivots = [ks[0] for ks in key_lists[1:]]
        if n_old == 0 and start > 0:
            # appended after the last micro-leaf: the first new run needs a pivot
            leaf.ml_pivots[start - 1:start - 1] = [key_lists[0][0]] + list(pivots)
        else:
            leaf.ml_pivots[start:start + max(n_old - 1, 0)] = pivots
        leaf.mls[start:start + n_old] = new_mls
        if mutate is not None:
            mutate()
        for b in spare:
            io.free(b)
        self._mark(leaf)

    def _mark(self, leaf):
        for b in leaf.header_used(self.B):
            self.io.assign(b, leaf)

    # -- micro-flush ---------------------------------------------------

    def microflush(self, leaf):
        """Move every buffered update routed to the fullest micro-leaf into it.

        Returns the number of updates that left the buffer.
        """
        p, B = self.p, self.B
        if not leaf.mls:
            yield from self._rewrite(leaf, 0, 0, [array("Q")])
        counts = leaf.buffer.route_counts(leaf.ml_pivots)
        best = max(counts)
        if best == 0:
            return 0
        i = counts.index(best)
        ml = leaf.mls[i]
        yield from self.io.touch_all(ml.blocks)
        lo, hi = leaf.ml_bounds(i)
        keys, kinds = leaf.buffer.slice_between(lo, hi)
        present = ml.keys
        ins = [k for k, t in zip(keys, kinds) if t > 0]
        dels = [k for k, t in zip(keys, kinds) if t < 0]
        matched = set()
        if dels:
            pset = set(present)
            matched = {k for k in dels if k in pset}
        merged = [k for k in present if k not in matched] if matched else list(present)
        if ins:
            merged.extend(ins)
            merged = sorted(set(merged))
        kept = [k for k in dels if k not in matched]
        moved = len(keys) - len(kept)
        if moved == 0:
            return 0

        def mutate():
            a = bisect_left(leaf.buffer.keys, lo) if lo is not None else 0
            b = bisect_left(leaf.buffer.keys, hi) if hi is not None else len(leaf.buffer.keys)
            del leaf.buffer.keys[a:b]
            del leaf.buffer.kinds[a:b]
            for k in kept:
                leaf.buffer.add(k, -1)

        cap = p.microleaf_cap
        if len(merged) > cap:
            parts = -(-len(merged) // cap)
            size = -(-len(merged) // parts)
            lists = [merged[j:j + size] for j in range(0, len(merged), size)]
            self.stats["ml_split"] += 1
        else:
            lists = [merged]
        yield from self._rewrite(leaf, i, 1, lists, mutate)
        self.stats["microflush"] += 1
        # underfull micro-leaf: fold into a neighbour
        for j in range(i, i + len(lists)):
            if len(leaf.mls) > 1 and len(leaf.mls[j].keys) < cap // 4:
                yield from self._merge_ml(leaf, j)
                break
        return moved

    def _merge_ml(self, leaf, j):
        cap = self.p.microleaf_cap
        if j + 1 < len(leaf.mls) and (j == 0 or len(leaf.mls[j + 1]) <= len(leaf.mls[j - 1])):
            a = j
        else:
            a = j - 1
        left, right = leaf.mls[a], leaf.mls[a + 1]
        yield from self.io.touch_all(left.blocks + right.blocks)
        merged = array("Q", left.keys)
        merged.extend(right.keys)
        if len(merged) > cap:
            h = len(merged) // 2
            lists = [merged[:h], merged[h:]]
        else:
            lists = [merged]
        if not merged:
            # both empty: drop one, keep an empty micro-leaf in place
            lists = [merged]
        self.stats["ml_merge"] += 1
        yield from self._rewrite(leaf, a, 2, lists)

    def drain(self, leaf):
        """Micro-flush until the buffer is back within its cap."""
        cap = self.p.microroot_buffer_cap
        while len(leaf.buffer) > cap:
            moved = yield from self.microflush(leaf)
            if not moved:
                break

    # -- public operations ----------------------------------------------

    def bulk_insert(self, leaf, take, extra=()):
        """Add at most ``flush_quantum`` key-sorted updates to ``leaf``.

        ``take()`` is called inside the atomic section and returns
        ``(keys, kinds)``; it typically removes them from the parent buffer
        whose block ids are passed in ``extra``.
        """
        yield from self.io.touch_all(
            list(extra) + leaf.header_upto(self.B, add_buf=self.p.flush_quantum), write=True)
        keys, kinds = take()
        if len(keys) > self.p.flush_quantum:
            raise ContractError(f"bulk_insert of {len(keys)} > flush quantum")
        if any(keys[i] >= keys[i + 1] for i in range(len(keys) - 1)):
            raise ContractError("bulk_insert needs strictly key-sorted updates")
        leaf.net_size += leaf.buffer.merge(keys, kinds)
        self._mark(leaf)
        yield from self.drain(leaf)
        return len(keys)

    def append_keys(self, leaf, keys):
        """Append sorted insertions larger than every key in the leaf's
        micro-leaves, filling the last micro-leaf before opening new ones."""
        if not keys:
            return
        cap = self.p.microleaf_cap
        if leaf.mls and len(leaf.mls[-1]) < cap:
            last = leaf.mls[-1]
            if last.keys and last.keys[-1] >= keys[0]:
                raise ContractError("append_keys needs keys above the leaf's content")
            yield from self.io.touch_all(last.blocks)
            run = array("Q", last.keys)
            start, n_old = len(leaf.mls) - 1, 1
        else:
            run = array("Q")
            start, n_old = len(leaf.mls), 0
        run.extend(keys)
        lists = [run[j:j + cap] for j in range(0, len(run), cap)]

        def grow():
            leaf.net_size += len(keys)

        yield from self._rewrite(leaf, start, n_old, lists, grow)

    def split(self, leaf, min_size=None, extra=(), on_commit=None):
        """Split ``leaf`` at the median of its net content.

        ``leaf`` keeps the lower half.  Returns ``(right_leaf, separator)``.
        ``on_commit(right, sep)`` runs in the atomic section that makes the
        new leaf hold its content; blocks it touches go in ``extra``.
        """
        p, B, io = self.p, self.B, self.io
        net = leaf.net_size
        if min_size is None:
            min_size = 4 * p.tau
        if net < min_size or net < 2:
            raise ContractError(f"leaf split needs net size >= {max(min_size, 2)}, has {net}")
        target = net // 2
        yield from io.touch_all(leaf.header_used(B))

        if not leaf.mls:
            stream = leaf.live_keys()
            sep = stream[target]
            right = yield from self.new_leaf()
            span = leaf.header_span(B)
            yield from io.touch_all(list(extra) + leaf.header_used(B)
                                    + right.blocks[:span], write=True)
            right.buffer = leaf.buffer.split_at(sep)
            right.net_size = right.buffer.net()
            leaf.net_size -= right.net_size
            self._mark(leaf)
            self._mark(right)
            if on_commit is not None:
                on_commit(right, sep)
            self.stats["leaf_split"] += 1
            return right, sep

        cum = 0
        for i, ml in enumerate(leaf.mls):
            lo, hi = leaf.ml_bounds(i)
            seg = len(ml.keys) + sum(leaf.buffer.slice_between(lo, hi)[1])
            if cum + seg > target:
                break
            cum += seg
        need = target - cum
        lo, hi = leaf.ml_bounds(i)
        yield from io.touch_all(ml.blocks)
        stream = apply_buffer(ml.keys, *leaf.buffer.slice_between(lo, hi))
        if need < len(stream):
            sep = stream[need]
            cut = bisect_left(ml.keys, sep)
            if cut == 0:
                split_at, cut = i, None
            elif cut == len(ml.keys):
                split_at, cut = i + 1, None
        else:
            sep, split_at, cut = hi, i + 1, None
        if sep is None:
            raise IntegrityError("leaf split found no separator")

        right = yield from self.new_leaf()
        if cut is not None:
            yield from self._rewrite(leaf, i, 1, [ml.keys[:cut], ml.keys[cut:]],
                                     pivots=[sep])
            split_at = i + 1
        span = leaf.header_span(B)
        yield from io.touch_all(list(extra) + leaf.header_used(B)
                                + right.blocks[:span], write=True)
        right.mls = leaf.mls[split_at:]
        right.ml_pivots = leaf.ml_pivots[split_at:]
        del leaf.mls[split_at:]
        del leaf.ml_pivots[max(split_at - 1, 0):]
        right.buffer = leaf.buffer.split_at(sep)
        right.net_size = right.recount()
        leaf.net_size = net - right.net_size
        self._mark(leaf)
        self._mark(right)
        if on_commit is not None:
            on_commit(right, sep)
        self.stats["leaf_split"] += 1
        # undersized edge micro-leaves left by the physical split
        for lf, j in ((leaf, len(leaf.mls) - 1), (right, 0)):
            if len(lf.mls) > 1 and len(lf.mls[j].keys) < p.microleaf_cap // 4:
                yield from self._merge_ml(lf, j)
        return right, sep

    def merge(self, left, right, sep, extra=(), on_commit=None):
        """Absorb the adjacent right leaf ``right`` into ``left`` and drain the
        combined buffer back under its cap.  ``right``'s header blocks are
        released; ``on_commit()`` runs in the atomic section of the absorb."""
        B, io = self.B, self.io
        span = left.header_span(B) + right.header_span(B)
        yield from io.touch_all(list(extra) + left.blocks[:span]
                                + right.header_used(B), write=True)
        if left.buffer.keys and left.buffer.keys[-1] >= sep:
            raise ContractError("leaf merge with a non-adjacent sibling")
        if right.buffer.keys and right.buffer.keys[0] < sep:
            raise ContractError("leaf merge with a non-adjacent sibling")
        if left.mls and right.mls:
            left.ml_pivots = left.ml_pivots + [sep] + right.ml_pivots
        elif right.mls:
            left.ml_pivots = list(right.ml_pivots)
        left.mls = left.mls + right.mls
        left.buffer.extend_right(right.buffer)
        left.net_size += right.net_size
        self._mark(left)
        if on_commit is not None:
            on_commit()
        for b in right.blocks:
            io.free(b)
        self.stats["leaf_merge"] += 1
        yield from self.drain(left)
        return left

    # -- reads (plain pager accesses, used by queries) -------------------

    def collect(self, pager, leaf, a, b) -> list[int]:
        """Net insertions of ``leaf`` in the closed range ``[a, b]``."""
        if a > b:
            raise ContractError(f"empty range [{a}, {b}]")
        B = self.B
        for bid in leaf.header_used(B):
            pager.access(bid)
        out = []
        i0 = bisect_right(leaf.ml_pivots, a)
        for i in range(i0, len(leaf.mls)):
            lo, _ = leaf.ml_bounds(i)
            if lo is not None and lo > b:
                break
            ks = leaf.mls[i].keys
            x = bisect_left(ks, a)
            y = bisect_right(ks, b)
            if y > x:
                for blk in range(x // B, (y - 1) // B + 1):
                    pager.access(leaf.mls[i].blocks[blk])
                out.extend(ks[x:y])
        keys, kinds = leaf.buffer.slice_between(a, b + 1)
        return apply_buffer(out, keys, kinds)
