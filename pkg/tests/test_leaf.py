import random
from array import array

import pytest

from dbetree.core import DELETE, INSERT, ContractError
from dbetree.dictionary import DeamortizedTree
from dbetree.leaf import LeafStore, MicroLeaf
from dbetree.pager import IO, Pager, StepIO
from dbetree.params import derive_params
from dbetree.tree import drive

# B=16, N=4096: tau=144, micro-leaf cap 48, micro-root cap 24, quantum 2
P = derive_params(16, 0.5, 4096)


class Rig:
    def __init__(self, p=P):
        self.p = p
        self.pager = Pager(256)
        self.io = StepIO(self.pager)
        self.store = LeafStore(self.io, p)

    def leaf(self):
        return drive(self.store.new_leaf())

    def stepped(self, gen):
        """Run ``gen`` checking that every yield follows exactly one transfer."""
        before = self.pager.total
        try:
            while True:
                tok = next(gen)
                assert tok is IO
                assert self.pager.total == before + 1
                before = self.pager.total
        except StopIteration as stop:
            assert self.pager.total == before
            return stop.value

    def add(self, leaf, keys, kinds):
        q = self.p.flush_quantum
        for j in range(0, len(keys), q):
            ks, ts = list(keys[j:j + q]), list(kinds[j:j + q])
            self.stepped(self.store.bulk_insert(leaf, lambda ks=ks, ts=ts: (ks, ts)))

    def loaded(self, keys):
        leaf = self.leaf()
        self.add(leaf, keys, [INSERT] * len(keys))
        self.stepped(self.store.drain(leaf))
        return leaf


def check_leaf(leaf, p, expected):
    assert leaf.live_keys() == sorted(expected)
    assert leaf.net_size == len(expected) == leaf.recount()
    for m in leaf.mls:
        ks = list(m.keys)
        assert ks == sorted(set(ks))
        assert len(ks) <= p.microleaf_cap
    if len(leaf.mls) > 1:
        assert all(len(m) >= p.microleaf_cap // 4 for m in leaf.mls)
    assert len(leaf.buffer) <= p.microroot_buffer_cap
    assert sum(1 for t in leaf.buffer.kinds if t < 0) <= p.microroot_buffer_cap


def test_insert_then_delete_annihilates():
    r = Rig()
    leaf = r.leaf()
    r.add(leaf, [5], [INSERT])
    r.add(leaf, [5], [DELETE])
    assert leaf.live_keys() == [] and leaf.net_size == 0
    assert len(leaf.buffer) == 0


def test_delete_reaching_micro_leaf_removes_insert():
    r = Rig()
    leaf = r.loaded(range(0, 200, 2))
    assert leaf.mls
    r.add(leaf, [10], [DELETE])
    r.stepped(r.store.drain(leaf))
    # force the buffered delete down
    while leaf.buffer.keys:
        r.stepped(r.store.microflush(leaf))
    assert 10 not in leaf.live_keys()
    assert all(10 not in m.keys for m in leaf.mls)


def test_full_microroot_flushes_at_least_a_quantum():
    r = Rig()
    p = P
    leaf = r.loaded(range(0, 10 * p.microleaf_cap, 5))
    # fill the micro-root to its cap without draining
    room = p.microroot_buffer_cap - len(leaf.buffer)
    extra = list(range(1, 10 * p.microleaf_cap, 5))[:room]
    leaf.net_size += leaf.buffer.merge(extra, [INSERT] * len(extra))
    assert len(leaf.buffer) == p.microroot_buffer_cap
    sizes = [len(m) for m in leaf.mls]
    n_before = len(leaf.buffer)
    more = [extra[-1] + 5 * (i + 1) for i in range(p.flush_quantum)]
    r.add(leaf, more, [INSERT] * len(more))
    moved_out = n_before + len(more) - len(leaf.buffer)
    assert moved_out >= p.flush_quantum
    assert sum(len(m) for m in leaf.mls) - sum(sizes) == moved_out
    assert len(leaf.buffer) <= p.microroot_buffer_cap


def test_unsorted_bulk_insert_rejected():
    r = Rig()
    leaf = r.leaf()
    with pytest.raises(ContractError):
        drive(r.store.bulk_insert(leaf, lambda: ([5, 3], [INSERT, INSERT])))


def test_unmatched_delete_retained():
    r = Rig()
    leaf = r.leaf()
    r.add(leaf, [9], [DELETE])
    assert leaf.buffer.keys == [9] and leaf.net_size == -1
    r.add(leaf, [9], [INSERT])
    assert len(leaf.buffer) == 0 and leaf.net_size == 0


def test_random_trace_against_oracle():
    r = Rig()
    rng = random.Random(11)
    leaf = r.leaf()
    live = set()
    pending = []
    for _ in range(10_000):
        if live and rng.random() < 0.4:
            k = rng.choice(sorted(live)) if len(live) < 64 else rng.sample(sorted(live), 1)[0]
            live.discard(k)
            pending.append((k, DELETE))
        else:
            k = rng.randrange(5000)
            if k in live or any(k == x for x, _ in pending):
                continue
            live.add(k)
            pending.append((k, INSERT))
        if len(pending) == P.flush_quantum or rng.random() < 0.3:
            pending.sort()
            keys = [k for k, _ in pending]
            if len(set(keys)) == len(keys):
                r.add(leaf, keys, [t for _, t in pending])
                pending = []
    for k, t in sorted(pending):
        r.add(leaf, [k], [t])
    r.stepped(r.store.drain(leaf))
    check_leaf(leaf, P, live)


def test_split_at_exactly_four_tau():
    r = Rig()
    tau = P.tau
    leaf = r.loaded(range(4 * tau))
    right, sep = r.stepped(r.store.split(leaf))
    assert abs(leaf.net_size - 2 * tau) <= 1 and abs(right.net_size - 2 * tau) <= 1
    assert leaf.net_size + right.net_size == 4 * tau
    assert max(leaf.live_keys()) < sep <= min(right.live_keys())


def test_split_below_threshold_rejected():
    r = Rig()
    leaf = r.loaded(range(100))
    with pytest.raises(ContractError):
        drive(r.store.split(leaf))


def test_split_of_single_micro_leaf():
    r = Rig()
    leaf = r.leaf()
    pg = r.pager
    keys = array("Q", range(0, 80, 2))
    ml = MicroLeaf(keys, [pg.alloc(None) for _ in range(-(-len(keys) // P.B))])
    leaf.mls = [ml]
    leaf.net_size = len(keys)
    right, sep = r.stepped(r.store.split(leaf, min_size=2))
    assert leaf.mls and right.mls
    assert list(leaf.mls[0].keys) + list(right.mls[0].keys) == list(keys)
    assert leaf.net_size == 20 == right.net_size


def test_split_random_leaf_preserves_content():
    r = Rig()
    rng = random.Random(2)
    keys = sorted(rng.sample(range(10 ** 6), 5 * P.tau))
    leaf = r.loaded(keys)
    dels = sorted(rng.sample(keys, P.microroot_buffer_cap // 2))
    r.add(leaf, dels, [DELETE] * len(dels))
    want = sorted(set(keys) - set(dels))
    right, sep = r.stepped(r.store.split(leaf))
    a, b = leaf.live_keys(), right.live_keys()
    assert a + b == want
    assert max(a) < sep <= min(b)
    check_leaf(leaf, P, a)
    check_leaf(right, P, b)


def test_merge_tau_and_tau():
    r = Rig()
    tau = P.tau
    left = r.loaded(range(tau))
    right = r.loaded(range(10_000, 10_000 + tau))
    out = r.stepped(r.store.merge(left, right, 10_000))
    assert out is left and left.net_size == 2 * tau
    check_leaf(left, P, list(range(tau)) + list(range(10_000, 10_000 + tau)))


def test_merge_non_adjacent_rejected():
    r = Rig()
    left = r.loaded(range(0, 100))
    right = r.loaded(range(50, 150))
    r.add(right, [60, 61], [INSERT, INSERT])       # keeps buffered keys below sep
    with pytest.raises(ContractError):
        drive(r.store.merge(left, right, 100))


def test_merge_random_pair_is_union():
    r = Rig()
    rng = random.Random(8)
    a = sorted(rng.sample(range(0, 50_000), 2 * P.tau))
    b = sorted(rng.sample(range(50_000, 100_000), 3 * P.tau))
    left, right = r.loaded(a), r.loaded(b)
    extra = [50_001 + 2 * i for i in range(P.microroot_buffer_cap) if 50_001 + 2 * i not in b]
    right.net_size += right.buffer.merge(extra, [INSERT] * len(extra))
    r.stepped(r.store.merge(left, right, 50_000))
    check_leaf(left, P, sorted(set(a) | set(b) | set(extra)))


def _settled(left_n, right_n):
    """Two bulk-loaded leaves of 3 tau; grow the right one to ``right_n``,
    then shrink the left one to ``left_n`` and settle."""
    tau = P.tau
    keys = list(range(0, 60 * tau, 10))[:6 * tau]
    d = DeamortizedTree(params=P, keys=keys)
    lo_leaf, hi_leaf = [lf.live_keys() for lf, _, _ in d.tree.iter_leaves()]
    for i in range(right_n - len(hi_leaf)):
        d.insert(hi_leaf[0] + 10 * i + 5)
    for k in lo_leaf[left_n:]:
        d.delete(k)
    d.settle()
    return d


def test_merge_below_two_tau_without_resplit():
    tau = P.tau
    d = _settled(2 * tau - 10, 3 * tau)
    m = d.tree.maint
    # the merge result (at most 5 tau) is not re-split inside the merge; a
    # later split phase may still split it because it holds at least 4 tau
    assert m.events["leaf_merge"] == 1 and m.events["leaf_resplit"] == 0
    assert all(tau <= s <= 5 * tau for s in d.tree.leaf_sizes())
    assert len(d) == 5 * tau - 10


def test_merge_with_big_sibling_resplits_evenly():
    tau = P.tau
    d = _settled(2 * tau - 10, 4 * tau - 1)
    m = d.tree.maint
    sizes = d.tree.leaf_sizes()
    assert m.events["leaf_merge"] >= 1 and m.events["leaf_resplit"] >= 1
    assert m.events["leaf_split"] == m.events["leaf_resplit"]
    assert len(sizes) == 2
    assert all(2 * tau - P.buffer_cap - 10 <= s <= 3 * tau for s in sizes)


def test_collect_cases():
    r = Rig()
    keys = list(range(0, 1000, 3))
    leaf = r.loaded(keys)
    r.add(leaf, [30], [DELETE])
    assert r.store.collect(r.pager, leaf, 2000, 3000) == []
    got = r.store.collect(r.pager, leaf, 0, 999)
    assert 30 not in got
    assert got == [k for k in keys if k != 30]
    assert r.store.collect(r.pager, leaf, 100, 200) == [k for k in keys if 100 <= k <= 200]
    with pytest.raises(ContractError):
        r.store.collect(r.pager, leaf, 5, 4)
