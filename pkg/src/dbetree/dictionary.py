"""The user-facing ordered set with worst-case paced maintenance."""
from __future__ import annotations

from .core import DELETE, INSERT
from .pager import Pager
from .params import derive_params
from .query import member, predecessor, range_report
from .rebuild import Rebuild, rebuild_capacity, should_rebuild
from .tree import BepsTree


class OpBudgetMeter:
    """Block transfers attributed to each update call."""

    def __init__(self, k_io: int = 1):
        self.k_io = k_io
        self.ios_since_last_yield = 0
        self.max_ios_between_yields = 0
        self.max_normal = 0
        self.max_rebuild = 0
        self.ops = 0
        self.total = 0
        self.over_budget = 0

    def record(self, ios: int, limit: int, rebuilding: bool):
        self.ios_since_last_yield = ios
        self.ops += 1
        self.total += ios
        if ios > self.max_ios_between_yields:
            self.max_ios_between_yields = ios
        if rebuilding:
            self.max_rebuild = max(self.max_rebuild, ios)
        else:
            self.max_normal = max(self.max_normal, ios)
        if ios > limit:
            self.over_budget += 1

    def as_dict(self) -> dict:
        return {"k_io": self.k_io, "ops": self.ops, "total": self.total,
                "max": self.max_ios_between_yields, "max_normal": self.max_normal,
                "max_rebuild": self.max_rebuild, "over_budget": self.over_budget}


class DeamortizedTree:
    """Ordered set of unsigned 64-bit keys.

    Every update lands in the pinned root buffer; after each batch of
    ``update_batch`` updates the maintenance cursor runs until it has spent
    one block transfer (``ios_per_update`` transfers per update when the
    batch formula floors out).  While a rebuild runs, the copy gets the same
    allowance again.

    ``keys``, if given, must be strictly increasing; the tree is then bulk
    loaded from them instead of starting empty.
    """

    def __init__(self, B=256, epsilon=0.5, N_cap=1 << 20, *, params=None,
                 cache_blocks=None, k_io=1, c_i=4, c_h=8, c_M=4, rebuild=True,
                 backing=None, keys=None):
        if params is None:
            params = derive_params(B, epsilon, N_cap, c_i=c_i, c_h=c_h, c_M=c_M)
        self.params = params
        self.pager = Pager(cache_blocks or params.default_cache_blocks, backing=backing)
        if keys is None:
            self.tree = BepsTree(params, self.pager)
        else:
            self.tree = BepsTree.from_sorted(params, keys, self.pager)
        self.meter = OpBudgetMeter(k_io)
        self.n_live = 0 if keys is None else len(keys)
        self.N0 = params.N_cap
        self.shrink_armed = False
        self.rebuild_enabled = rebuild
        self.rebuild: Rebuild | None = None
        self.history: list[dict] = []
        self._owed = 0

    # -- updates ------------------------------------------------------------

    def insert(self, key):
        self.apply_update(key, INSERT)

    def delete(self, key):
        self.apply_update(key, DELETE)

    def apply_update(self, key, kind):
        pager = self.pager
        before = pager.total
        tree = self.tree
        p = tree.p
        tree.push(key, kind)
        self.n_live += kind
        rb = self.rebuild
        if rb is not None:
            rb.mirror(key, kind)
        if p.low_rate:
            steps = p.ios_per_update
        else:
            self._owed += 1
            steps = 0
            if self._owed >= p.update_batch:
                self._owed = 0
                steps = 1
        for _ in range(steps):
            if not tree.maint.resume():
                break
        limit = p.ios_per_update if p.low_rate else self.meter.k_io
        if rb is not None:
            for _ in range(steps):
                if not rb.resume():
                    break
            limit *= 2
            if rb.done:
                tree.maint.park = True
                if tree.maint.parked:
                    self._switchover()
        self.meter.record(pager.total - before, limit, rb is not None)
        if self.rebuild is None and self.rebuild_enabled:
            self._check_trigger()

    def _check_trigger(self):
        n, N0 = self.n_live, self.N0
        if not self.shrink_armed and 4 * n * n > 9 * N0:
            self.shrink_armed = True
        if should_rebuild(N0, n) and (2 * n >= N0 * N0 or self.shrink_armed):
            self.start_rebuild()

    def start_rebuild(self):
        p = self.tree.p
        newp = p.with_capacity(rebuild_capacity(p.B, self.n_live))
        # both trees share the cache; keep room for the larger working set
        need = max(newp.default_cache_blocks, p.default_cache_blocks) + 2
        if self.pager.capacity < need:
            self.pager.capacity = need
        self.rebuild = Rebuild(self.tree, newp)
        self.history.append({"event": "start", "N0": self.N0, "n_live": self.n_live,
                             "tau_old": p.tau, "tau_new": newp.tau})

    def _switchover(self):
        rb = self.rebuild
        old, new = self.tree, rb.new
        freed = len(old.block_ids())
        sizes = new.leaf_sizes()
        old.free_all()
        new.maint.root_drain_only = False
        self.tree = new
        self.params = new.p
        self.N0 = max(1, self.n_live)
        self.shrink_armed = False
        self.rebuild = None
        self._owed = 0
        self.history.append({"event": "switchover", "N0": self.N0, "freed": freed,
                             "tau": new.p.tau, "leaf_min": min(sizes),
                             "leaf_max": max(sizes), "leaves": len(sizes),
                             **rb.progress()})

    def finish_rebuild(self):
        """Drive an active rebuild to its switchover without pacing (tests)."""
        while self.rebuild is not None:
            rb = self.rebuild
            rb.resume()
            if rb.done:
                self.tree.maint.park = True
                self.tree.maint.resume()
                if self.tree.maint.parked:
                    self._switchover()

    def settle(self):
        """Run maintenance unpaced until nothing is left to do (tests)."""
        self.finish_rebuild()
        self.tree.settle()

    # -- queries --------------------------------------------------------------

    def predecessor(self, key):
        return predecessor(self.tree, key)

    def member(self, key) -> bool:
        return member(self.tree, key)

    def range_report(self, a, b):
        return range_report(self.tree, a, b)

    def __contains__(self, key):
        return self.member(key)

    def __len__(self):
        return self.n_live

    def contents(self):
        return self.tree.contents()

    @property
    def maintenance(self):
        return self.tree.maint
