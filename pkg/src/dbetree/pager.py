"""Simulated two-level memory with exact block-transfer accounting.

The pager owns every block the structures allocate.  Payloads live in an
in-memory store; what is simulated is *residency*: a bounded LRU cache of
block ids.  A miss costs one read; evicting a dirty block costs one write.
Pinned blocks are never evicted.

With ``backing`` set, every write-back also encodes the payload into a
fixed-size page of a file, so after :meth:`Pager.flush` the file is a
complete image of the structure (see :mod:`dbetree.pagefile`).
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field


class PagerError(RuntimeError):
    pass


class BlockFault(PagerError):
    """Access to, or free of, a block that is not allocated."""


class PinExhausted(PagerError):
    """No evictable block is left, or pinning would fill the cache."""


class PinStateError(PagerError):
    """Unpin of an unpinned block, or free of a pinned one."""


SUPERBLOCK = 0


@dataclass
class IoStats:
    reads: int = 0
    writes: int = 0
    cache_capacity: int = 0
    pinned_blocks: set = field(default_factory=set)

    @property
    def total(self) -> int:
        return self.reads + self.writes


class Pager:
    def __init__(self, cache_blocks: int, backing=None, trace: bool = False):
        if cache_blocks < 2:
            raise ValueError("cache must hold at least two blocks")
        self._store: dict[int, object] = {}
        self._cache: OrderedDict[int, bool] = OrderedDict()  # bid -> dirty
        self._pinned: set[int] = set()
        self._next = SUPERBLOCK + 1
        self.capacity = cache_blocks
        self.stats = IoStats(cache_capacity=cache_blocks, pinned_blocks=self._pinned)
        self.backing = backing
        # (event, bid) tuples: 'r' miss read, 'w' dirty write-back, 'a' alloc,
        # 'f' free, 'h' hit, 'd' dirty mark on a hit
        self.trace: list | None = [] if trace else None

    # -- introspection -------------------------------------------------

    @property
    def reads(self) -> int:
        return self.stats.reads

    @property
    def writes(self) -> int:
        return self.stats.writes

    @property
    def total(self) -> int:
        return self.stats.reads + self.stats.writes

    def is_allocated(self, bid: int) -> bool:
        return bid in self._store

    def is_cached(self, bid: int) -> bool:
        return bid in self._cache

    def is_pinned(self, bid: int) -> bool:
        return bid in self._pinned

    def is_dirty(self, bid: int) -> bool:
        return self._cache.get(bid, False)

    def allocated(self) -> int:
        return len(self._store)

    def peek(self, bid: int):
        """Payload of ``bid`` without any I/O accounting (audits, tests)."""
        try:
            return self._store[bid]
        except KeyError:
            raise BlockFault(f"block {bid} is not allocated") from None

    def install(self, store: dict, next_bid: int):
        """Adopt decoded payloads (loading a page file); the cache starts cold."""
        if self._store:
            raise PagerError("install needs an empty pager")
        self._store = dict(store)
        self._next = max(next_bid, max(store, default=SUPERBLOCK) + 1)

    # -- eviction ------------------------------------------------------

    def _victim(self):
        for bid in self._cache:
            if bid not in self._pinned:
                return bid
        raise PinExhausted("every cached block is pinned")

    def victim_dirty(self) -> bool:
        """Would making room for one more block cost a write-back?"""
        if len(self._cache) < self.capacity:
            return False
        return self._cache[self._victim()]

    def _evict_one(self):
        bid = self._victim()
        dirty = self._cache.pop(bid)
        if dirty:
            self._write_back(bid)

    def _write_back(self, bid: int):
        self.stats.writes += 1
        if self.trace is not None:
            self.trace.append(("w", bid))
        if self.backing is not None:
            self.backing.write_page(bid, self._store[bid])

    def make_room(self):
        """Evict until one slot is free; returns the number of writes spent."""
        spent = 0
        while len(self._cache) >= self.capacity:
            before = self.stats.writes
            self._evict_one()
            spent += self.stats.writes - before
        return spent

    # -- core operations -----------------------------------------------

    def alloc(self, payload=None) -> int:
        """Allocate a fresh block; it enters the cache dirty (written on eviction)."""
        self.make_room()
        bid = self._next
        self._next += 1
        self._store[bid] = payload
        self._cache[bid] = True
        if self.trace is not None:
            self.trace.append(("a", bid))
        return bid

    def free(self, bid: int):
        if bid not in self._store:
            raise BlockFault(f"double free or unknown block {bid}")
        if bid in self._pinned:
            raise PinStateError(f"cannot free pinned block {bid}")
        del self._store[bid]
        self._cache.pop(bid, None)
        if self.trace is not None:
            self.trace.append(("f", bid))

    def access(self, bid: int, write: bool = False):
        """Bring ``bid`` into the cache and return its payload."""
        cache = self._cache
        if bid in cache:
            cache.move_to_end(bid)
            if write:
                cache[bid] = True
            if self.trace is not None:
                self.trace.append(("d" if write else "h", bid))
            return self._store[bid]
        if bid not in self._store:
            raise BlockFault(f"access to unallocated block {bid}")
        self.make_room()
        self.stats.reads += 1
        if self.trace is not None:
            self.trace.append(("r", bid))
            if write:
                self.trace.append(("d", bid))
        cache[bid] = write
        return self._store[bid]

    def put(self, bid: int, payload):
        """Replace the payload of a block (a write access)."""
        self.access(bid, write=True)
        self._store[bid] = payload

    def pin(self, bid: int):
        if bid in self._pinned:
            return
        if len(self._pinned) >= self.capacity - 1:
            raise PinExhausted(
                f"pinning {bid} would leave no evictable slot "
                f"({len(self._pinned)} of {self.capacity} pinned)")
        self.access(bid)
        self._pinned.add(bid)

    def unpin(self, bid: int):
        if bid not in self._pinned:
            raise PinStateError(f"block {bid} is not pinned")
        self._pinned.discard(bid)

    def flush(self):
        """Write back every dirty cached block; they stay resident, clean."""
        for bid, dirty in self._cache.items():
            if dirty:
                self._write_back(bid)
                self._cache[bid] = False
        if self.backing is not None:
            self.backing.sync()

    def drop_cache(self):
        """Write back and evict every unpinned block (cold-cache measurements)."""
        for bid in [b for b in self._cache if b not in self._pinned]:
            if self._cache.pop(bid):
                self._write_back(bid)


class IoEvent:
    """Token yielded by resumable operations after exactly one block transfer."""

    __slots__ = ()

    def __repr__(self):
        return "IO"


IO = IoEvent()


class StepIO:
    """Generator-side view of a pager: every helper yields :data:`IO` once per
    block transfer, so a caller can stop after each I/O.

    A miss that must first evict a dirty block yields twice (write-back, then
    read), keeping the one-transfer-per-yield contract.
    """

    def __init__(self, pager: Pager):
        self.pager = pager

    def touch(self, bid, write=False):
        p = self.pager
        while True:
            if p.is_cached(bid):
                p.access(bid, write)
                return
            if p.victim_dirty():
                # other clients may refill the cache while we are suspended,
                # so the check is repeated after every transfer
                p.make_room()
                yield IO
            else:
                p.access(bid, write)
                yield IO
                return

    def touch_all(self, bids, write=False):
        """Touch ``bids`` and guarantee they are all resident at the end, so the
        caller may mutate them without further transfers.

        Accesses made by other clients between yields can evict blocks touched
        earlier; those are re-fetched until one pass finds everything cached.
        """
        p = self.pager
        bids = list(dict.fromkeys(bids))
        room = p.capacity - sum(1 for b in p._pinned if b not in bids)
        if len(bids) > room:
            raise PinExhausted(
                f"working set of {len(bids)} blocks does not fit a cache of "
                f"{p.capacity} with {len(p._pinned)} pinned")
        while True:
            missing = False
            for bid in bids:
                if p.is_cached(bid):
                    p.access(bid, write)
                else:
                    missing = True
                    yield from self.touch(bid, write)
            if not missing:
                return

    def alloc(self, payload=None):
        p = self.pager
        while p.victim_dirty():
            p.make_room()
            yield IO
        return p.alloc(payload)

    def free(self, bid):
        self.pager.free(bid)

    def assign(self, bid, payload):
        """Set the payload of a resident block (marks it dirty, no transfer)."""
        p = self.pager
        if not p.is_cached(bid):
            raise PagerError(f"assign to non-resident block {bid}")
        p._cache[bid] = True
        p._store[bid] = payload
