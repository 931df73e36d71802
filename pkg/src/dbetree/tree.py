"""The buffered tree itself: root handling, node access and structural walks.

:class:`BepsTree` owns the nodes and leaves of one tree on a pager and the
:class:`~dbetree.maintenance.Maintenance` cursor that restructures it.  It
does not pace anything; :class:`dbetree.dictionary.DeamortizedTree` decides
when maintenance runs.
"""
from __future__ import annotations

from array import array

from .core import ContractError, InternalNode, IntegrityError
from .leaf import Leaf, LeafStore, MicroLeaf
from .maintenance import Maintenance
from .pager import IO, Pager, StepIO


def drive(gen):
    """Run a resumable operation to completion and return its result."""
    try:
        while True:
            next(gen)
    except StopIteration as stop:
        return stop.value


class BepsTree:
    def __init__(self, params, pager: Pager | None = None, cache_blocks=None,
                 root_drain_only=False, build=True):
        self.p = params
        if pager is None:
            pager = Pager(cache_blocks or params.default_cache_blocks)
        self.pager = pager
        self.io = StepIO(pager)
        self.leaves = LeafStore(self.io, params)
        self.root_bid = None
        self.root_high_water = 0
        # a freshly rebuilt tree starts with leaves in [tau/4, 7tau/4]; the
        # band is relaxed to [tau/4, 5tau] until maintenance has merged them
        self.band_relaxed = False
        self.maint = Maintenance(self, root_drain_only=root_drain_only)
        if build:
            drive(self.bootstrap())

    def bootstrap(self):
        """Create the initial root over one empty leaf (resumable)."""
        leaf = yield from self.leaves.new_leaf()
        bid = yield from self.io.alloc(None)
        self.io.assign(bid, InternalNode(bid, 1, children=[leaf.bid],
                                         child_max=[0], child_min=[0]))
        self.pager.pin(bid)
        self.root_bid = bid

    @classmethod
    def from_sorted(cls, params, keys, pager: Pager | None = None, cache_blocks=None):
        """Build a quiescent tree over strictly ascending ``keys`` directly.

        Leaves are packed to ``3 tau`` keys, micro-leaves to three quarters of
        their cap, and nodes are grouped to at most three quarters of the
        fanout bound.  Transfers spent building are not counted: the cache is
        emptied and the pager's counters are reset afterwards.
        """
        t = cls(params, pager, cache_blocks, build=False)
        pg, p, B = t.pager, params, params.B
        keys = array("Q", keys)
        if any(keys[i] >= keys[i + 1] for i in range(len(keys) - 1)):
            raise ContractError("from_sorted needs strictly ascending keys")
        n = len(keys)
        nleaves = max(1, round(n / (3 * p.tau)))
        ml_fill = max(1, 3 * p.microleaf_cap // 4)
        items = []                    # (bid, first key, max leaf, min leaf)
        for j in range(nleaves):
            a, b = n * j // nleaves, n * (j + 1) // nleaves
            leaf = Leaf([])
            for _ in range(p.leaf_header_blocks):
                leaf.blocks.append(pg.alloc(leaf))
            for s in range(a, b, ml_fill):
                chunk = keys[s:min(b, s + ml_fill)]
                ml = MicroLeaf(chunk, [])
                for _ in range(max(1, -(-len(chunk) // B))):
                    ml.blocks.append(pg.alloc(ml))
                if leaf.mls:
                    leaf.ml_pivots.append(chunk[0])
                leaf.mls.append(ml)
            leaf.net_size = b - a
            items.append((leaf.bid, keys[a] if b > a else 0, b - a, b - a))
        level = 1
        per = max(p.fanout_min, 3 * p.fanout_max // 4)
        while True:
            if len(items) <= p.fanout_max:
                groups = [items]
            else:
                g = -(-len(items) // per)
                if len(items) // g < p.fanout_min:
                    g = -(-len(items) // p.fanout_max)
                groups = [items[len(items) * i // g:len(items) * (i + 1) // g] for i in range(g)]
            up = []
            for grp in groups:
                bid = pg.alloc(None)
                node = InternalNode(bid, level, pivots=[it[1] for it in grp[1:]],
                                    children=[it[0] for it in grp],
                                    child_max=[it[2] for it in grp],
                                    child_min=[it[3] for it in grp])
                pg._store[bid] = node
                up.append((bid, grp[0][1], node.aux_max[1], node.aux_min[1]))
            if len(up) == 1:
                break
            items = up
            level += 1
        t.root_bid = up[0][0]
        pg.pin(t.root_bid)
        pg.drop_cache()
        pg.stats.reads = pg.stats.writes = 0
        return t

    # -- node access ---------------------------------------------------

    def node(self, bid):
        """Payload of a block, no I/O accounting (caller already touched it)."""
        return self.pager.peek(bid)

    @property
    def root(self) -> InternalNode:
        return self.pager.peek(self.root_bid)

    @property
    def height(self) -> int:
        """Edges from the root to the leaves."""
        return self.root.level

    def set_root(self, bid):
        self.pager.pin(bid)
        self.pager.unpin(self.root_bid)
        self.root_bid = bid

    # -- updates ---------------------------------------------------------

    def push(self, key, kind) -> int:
        """Add one update to the pinned root buffer (no transfer).

        Returns the change in net insertions held by the tree.
        """
        root = self.pager.access(self.root_bid, write=True)
        delta = root.buffer.add(key, kind)
        self.maint.arrivals += 1
        n = len(root.buffer)
        if n > self.root_high_water:
            self.root_high_water = n
        return delta

    def settle(self, max_cycles=10_000):
        """Run maintenance, unpaced, until a full cycle does nothing."""
        m = self.maint
        for _ in range(max_cycles):
            before = m.work_done
            while m.resume():
                pass
            if m.work_done == before and not self.root.is_overfull(self.p.buffer_cap):
                return
        raise IntegrityError("maintenance did not settle")

    # -- walks (no I/O accounting) ---------------------------------------

    def iter_nodes(self):
        """Yield ``(node, depth, lo, hi)`` for every internal node and leaf,
        pre-order, where ``[lo, hi)`` is the node's key interval."""
        stack = [(self.root_bid, 0, None, None)]
        while stack:
            bid, depth, lo, hi = stack.pop()
            node = self.pager.peek(bid)
            yield node, depth, lo, hi
            if not node.is_leaf:
                n = len(node.children)
                for i in range(n - 1, -1, -1):
                    clo = node.pivots[i - 1] if i > 0 else lo
                    chi = node.pivots[i] if i < n - 1 else hi
                    stack.append((node.children[i], depth + 1, clo, chi))

    def iter_leaves(self):
        for node, _, lo, hi in self.iter_nodes():
            if node.is_leaf:
                yield node, lo, hi

    def leaf_sizes(self) -> list[int]:
        return [lf.net_size for lf, _, _ in self.iter_leaves()]

    def contents(self) -> list[int]:
        """The logical key set, computed from raw block payloads."""
        net: dict[int, int] = {}
        for node, _, _, _ in self.iter_nodes():
            if node.is_leaf:
                for m in node.mls:
                    for k in m.keys:
                        net[k] = net.get(k, 0) + 1
            for k, t in zip(node.buffer.keys, node.buffer.kinds):
                net[k] = net.get(k, 0) + t
        bad = [k for k, v in net.items() if v not in (0, 1)]
        if bad:
            raise IntegrityError(f"signed counts outside {{0,1}} for keys {bad[:5]}")
        return sorted(k for k, v in net.items() if v == 1)

    def block_ids(self) -> list[int]:
        """Every block the tree occupies."""
        out = []
        for node, _, _, _ in self.iter_nodes():
            if node.is_leaf:
                out.extend(node.blocks)
                for m in node.mls:
                    out.extend(m.blocks)
            else:
                out.append(node.bid)
        return out

    def free_all(self):
        """Release every block of the tree (after a rebuild switchover)."""
        self.pager.unpin(self.root_bid)
        for bid in self.block_ids():
            self.pager.free(bid)

    def stats(self) -> dict:
        sizes = self.leaf_sizes()
        cap = self.p.buffer_cap
        over = [len(n.buffer) for n, _, _, _ in self.iter_nodes()
                if not n.is_leaf and len(n.buffer) > cap]
        return {"height": self.height, "leaves": len(sizes),
                "min_leaf": min(sizes), "max_leaf": max(sizes),
                "root_buffer": len(self.root.buffer), "overfull": len(over),
                "blocks": len(self.block_ids())}


__all__ = ["BepsTree", "drive", "IO"]
