"""Background rebuilding when the key count drifts far from the size the
tree's parameters were derived for.

A :class:`Rebuild` copies the live keys of the current tree, in key order and
a bounded batch per round, into a fresh tree whose leaf-size unit is derived
from the present size.  The copy is appended at the right edge of the new
tree, packed to three quarters of the new unit per leaf.  Updates arriving
meanwhile go to the old tree and, when their key lies in the already-copied
prefix, to the new tree as well.  When the scan is done the caller swaps the
trees.
"""
from __future__ import annotations

from bisect import bisect_left
from collections import Counter

from .core import KEY_MAX, ContractError, IntegrityError, child_bounds
from .pager import IO
from .tree import BepsTree


def should_rebuild(N0: int, N_live: int) -> bool:
    """``N_live >= N0**2 / 2`` or ``N_live <= 1.5 * sqrt(N0)``, exactly."""
    if N0 < 1:
        raise ContractError(f"N0 must be positive, got {N0}")
    return 2 * N_live >= N0 * N0 or 4 * N_live * N_live <= 9 * N0


def rebuild_capacity(B: int, N_live: int) -> int:
    return max(B, N_live)


class Rebuild:
    """Resumable copy of ``old`` into a new tree with parameters ``params``.

    :meth:`resume` advances by one block transfer like the maintenance
    cursor.  ``v_max`` is the largest key of the copied prefix; every key
    ``<= v_max`` is either in the new tree or arrives there through
    :meth:`mirror`.
    """

    def __init__(self, old: BepsTree, params):
        self.old = old
        self.p = params
        self.new: BepsTree | None = None
        self.v_max = -1
        self.lo = 0                   # next key to scan, None once done
        self.copied = 0
        self.rounds = 0
        self.retries = 0
        self.mirrored = 0
        self.done = False
        self._gen = self._run()

    def mirror(self, key, kind):
        if key <= self.v_max:
            self.new.push(key, kind)
            self.mirrored += 1

    def resume(self) -> bool:
        if self.done:
            return self.new.maint.resume()
        for tok in self._gen:
            if tok is IO:
                return True
        self.done = True
        return False

    def progress(self) -> dict:
        return {"rounds": self.rounds, "copied": self.copied, "v_max": self.v_max,
                "mirrored": self.mirrored, "retries": self.retries, "done": self.done}

    # -- the copy ------------------------------------------------------------

    def _run(self):
        old = self.old
        new = BepsTree(self.p, pager=old.pager, root_drain_only=True, build=False)
        new.band_relaxed = True
        yield from new.bootstrap()
        self.new = new
        target = 3 * self.p.tau // 4
        leaf = new.node(new.root.children[0])
        while self.lo is not None:
            keys = yield from self._scan_round()
            if keys:
                if leaf.net_size >= target:
                    leaf = yield from self._open_leaf(keys[0])
                yield from new.leaves.append_keys(leaf, keys)
                yield from new.maint._aux_walk(self._spine(), leaf, "l16")
                self.copied += len(keys)
            self.rounds += 1
            yield from new.maint._drain_root()
        spine = self._spine()
        par = new.node(spine[-1])
        if len(par.children) > 1 and leaf.net_size < self.p.tau // 4:
            # fold a short last leaf into its left neighbour
            yield from new.maint._merge_leaf(spine, leaf.bid)
            yield from new.maint._upward(spine)
        yield from new.maint._drain_root()

    def _spine(self):
        """Block ids from the new root down the rightmost edge to level 1."""
        t = self.new
        out = [t.root_bid]
        node = t.root
        while node.level > 1:
            out.append(node.children[-1])
            node = t.node(out[-1])
        return out

    def _open_leaf(self, sep):
        t = self.new
        leaf = yield from t.leaves.new_leaf()
        spine = self._spine()
        yield from t.io.touch(spine[-1], write=True)
        par = t.node(spine[-1])
        par.pivots.append(sep)
        par.children.append(leaf.bid)
        par.child_max.append(0)
        par.child_min.append(0)
        k = len(spine) - 1
        while k >= 0:
            yield from t.io.touch(spine[k], write=True)
            k, over = yield from t.maint._restructure(spine, k)
            for prefix in over:
                yield from t.maint._flush_overfull(prefix)
            k -= 1
        return leaf

    def _plan(self, key):
        """Blocks a round starting at ``key`` reads, from the current shape of
        the old tree (no transfers)."""
        old, B = self.old, self.p.B
        node = old.root
        path = [node]
        lo = hi = None
        while True:
            i = node.route(key)
            lo, hi = child_bounds(node.pivots, i, lo, hi)
            child = old.node(node.children[i])
            if child.is_leaf:
                break
            path.append(child)
            node = child
        leaf = child
        end = hi
        dels = sum(1 for n in path + [leaf]
                   for t in n.buffer.slice_between(key, hi)[1] if t < 0)
        need = self.old.p.buffer_cap + dels
        blocks = [n.bid for n in path] + leaf.header_used(B)
        i = min(bisect_left(leaf.ml_pivots, key + 1), max(len(leaf.mls) - 1, 0))
        if not leaf.mls:
            return blocks, path, leaf, hi, end
        # micro-leaf keys from `key` on until `need` of them are covered
        while i < len(leaf.mls) and need > 0:
            ks = leaf.mls[i].keys
            x = bisect_left(ks, key)
            y = min(len(ks), x + need)
            if y > x:
                blocks.extend(leaf.mls[i].blocks[x // B:(y - 1) // B + 1])
                need -= y - x
                if need <= 0:
                    if y < len(ks):
                        end = ks[y]
                    elif i < len(leaf.ml_pivots):
                        end = leaf.ml_pivots[i]
            i += 1
        return blocks, path, leaf, hi, end

    def _scan_round(self):
        """Next batch of live keys of the old tree from ``self.lo`` on.

        Sets ``v_max`` and advances ``lo`` in the same atomic step that reads
        the old tree, so later updates to those keys are mirrored.
        """
        pager, io = self.old.pager, self.old.io
        cap = self.old.p.buffer_cap
        while True:
            blocks, *_ = self._plan(self.lo)
            ok = True
            for bid in blocks:
                if not pager.is_allocated(bid):
                    ok = False
                    break
                if not pager.is_cached(bid):
                    yield from io.touch(bid)
            if ok:
                blocks2, path, leaf, hi, end = self._plan(self.lo)
                if blocks2 == blocks and all(pager.is_cached(b) for b in blocks):
                    break
            self.retries += 1
            if self.retries > 1_000_000:
                raise IntegrityError("rebuild scan cannot make progress")

        lo = self.lo
        net = Counter()
        for m in leaf.mls:
            ks = m.keys
            x = bisect_left(ks, lo)
            y = len(ks) if end is None else bisect_left(ks, end)
            for k in ks[x:y]:
                net[k] += 1
        for n in path + [leaf]:
            keys, kinds = n.buffer.slice_between(lo, end)
            for k, t in zip(keys, kinds):
                net[k] += t
        live = sorted(k for k, v in net.items() if v == 1)
        if len(live) >= cap and (end != hi or len(live) > cap):
            live = live[:cap]
            nxt = live[-1] + 1
        else:
            # the rest of this leaf is in the window
            if end != hi:
                raise IntegrityError("rebuild window ended early")
            nxt = hi
        self.v_max = KEY_MAX if nxt is None else nxt - 1
        self.lo = nxt
        return live
