import random

import pytest

from dbetree import audit
from dbetree.core import INSERT
from dbetree.dictionary import DeamortizedTree
from dbetree.harness import gen_workload, replay
from dbetree.oracle import Oracle
from dbetree.pagefile import serialize
from dbetree.params import Params, derive_params
from dbetree.tree import BepsTree, drive

from conftest import apply, random_updates

SMALL = derive_params(16, 0.5, 4096)         # tau 144, cap 8, quantum 2


def spaced_tree(n_leaves, p=SMALL, spacing=10):
    keys = range(0, 3 * p.tau * n_leaves * spacing, spacing)
    return BepsTree.from_sorted(p, keys), list(keys)


def refresh_aux(tree):
    for node, _, _, _ in tree.iter_nodes():
        if not node.is_leaf:
            for i, c in enumerate(node.children):
                node.set_child_aux(i, *audit._extremes(tree, tree.node(c)))


def test_root_buffer_annihilation():
    d = DeamortizedTree(params=derive_params(256, 0.5, 1 << 20))
    d.insert(42)
    d.delete(42)
    assert len(d.tree.root.buffer) == 0 and len(d) == 0


def test_batch_minus_one_updates_cost_nothing():
    p = derive_params(4096, 0.5, 1 << 30)
    assert p.update_batch == 5
    d = DeamortizedTree(params=p)
    before = d.pager.total
    for k in range(p.update_batch - 1):
        d.insert(k)
    assert d.pager.total == before
    assert d.maintenance.arrivals == p.update_batch - 1


def test_random_updates_budget_and_content():
    p = derive_params(256, 0.5, 1 << 20)
    d = DeamortizedTree(params=p)
    o = Oracle()
    ops = random_updates(random.Random(1), 100_000)
    apply(d, ops)
    apply(o, ops)
    assert d.contents() == o.contents()
    assert d.meter.max_ios_between_yields <= d.meter.k_io == 1
    assert d.meter.over_budget == 0
    assert d.maintenance.arrival_max <= p.buffer_cap
    assert not d.maintenance.loop_violations


def test_tiny_cached_tree_cycles_without_io():
    t = BepsTree(SMALL)
    assert t.maint.resume() is False


def test_no_split_when_leaves_below_four_tau():
    t, _ = spaced_tree(4)
    drive(t.maint._phase(True))
    assert t.maint.events["leaf_split"] == 0
    assert len(t.leaf_sizes()) == 4


def test_split_phase_splits_leaf_at_four_tau():
    p = SMALL
    t, keys = spaced_tree(4)
    first = t.node(t.root.children[0]) if t.root.level == 1 else None
    assert first is not None and first.net_size == 3 * p.tau
    extra = [k + 5 for k in keys[:p.tau]]
    for j in range(0, len(extra), p.flush_quantum):
        chunk = extra[j:j + p.flush_quantum]
        drive(t.leaves.bulk_insert(first, lambda c=chunk: (c, [INSERT] * len(c))))
    refresh_aux(t)
    assert first.net_size == 4 * p.tau
    drive(t.maint._phase(True))
    sizes = t.leaf_sizes()
    assert len(sizes) == 5
    assert abs(sizes[0] - 2 * p.tau) <= 1 and abs(sizes[1] - 2 * p.tau) <= 1
    assert not audit.structure_violations(t)
    assert t.contents() == sorted(keys + extra)


def _fill(node, keys):
    node.buffer.merge(keys, [INSERT] * len(keys))


def test_overfull_merged_node_flush_count():
    p = SMALL
    t, keys = spaced_tree(24)
    assert t.height >= 2
    child_bid = t.root.children[0]
    node = t.node(child_bid)
    lo = keys[0]
    hi = node.pivots[-1] + 10 * p.tau
    new = [k + 3 for k in keys if lo <= k < hi][:2 * p.buffer_cap]
    _fill(node, new)
    node.merged = True
    drive(t.maint._flush_overfull([t.root_bid, child_bid]))
    assert t.maint.loop_max["l9"] == -(-p.buffer_cap // p.flush_quantum)
    assert len(node.buffer) <= p.buffer_cap and not node.merged
    assert t.contents() == sorted(keys + new)


def test_root_drain_count():
    p = SMALL
    t, keys = spaced_tree(24)
    new = [k + 7 for k in keys[::97]][:2 * p.buffer_cap]
    _fill(t.root, new)
    drive(t.maint._drain_root())
    assert t.maint.loop_max["l18"] == -(-p.buffer_cap // p.flush_quantum)
    assert len(t.root.buffer) <= p.buffer_cap
    assert t.contents() == sorted(keys + new)


def test_root_drain_noop_when_within_cap():
    t, _ = spaced_tree(4)
    before = t.pager.total
    drive(t.maint._drain_root())
    assert t.pager.total == before and t.maint.loop_max["l18"] == 0


def test_low_rate_budget():
    p = derive_params(16, 0.5, 1 << 20)
    assert p.low_rate and p.ios_per_update == 10
    d = DeamortizedTree(params=p)
    apply(d, random_updates(random.Random(4), 3000))
    assert d.meter.max_ios_between_yields <= p.ios_per_update
    assert d.meter.over_budget == 0


def test_low_rate_schedule_matches_batch_of_one(monkeypatch):
    p = derive_params(256, 0.5, 1 << 20)
    assert p.update_batch == 1 and -(-p.c_i * p.logBN // p.flush_quantum) == 1
    ops = random_updates(random.Random(9), 20_000)

    def run():
        # no rebuild: the rebuilt tree's parameters batch two updates per I/O
        d = DeamortizedTree(params=p, rebuild=False)
        apply(d, ops)
        return d.pager.reads, d.pager.writes, serialize(d.tree)

    normal = run()
    monkeypatch.setattr(Params, "low_rate", property(lambda self: True))
    assert p.low_rate
    assert run() == normal


def test_determinism_of_trace_and_image():
    p = derive_params(16, 0.5, 4096, c_i=8)
    ops = gen_workload("adversarial", 8000, seed=3)

    def run():
        d = DeamortizedTree(params=p)
        trace = []
        for code, *args in ops:
            before = d.pager.total
            if code == "I":
                d.insert(args[0])
            elif code == "D":
                d.delete(args[0])
            trace.append(d.pager.total - before)
        return trace, serialize(d.tree)

    assert run() == run()


def test_adversarial_quiescent_audits_small_block():
    p = derive_params(16, 0.5, 4096, c_i=8)
    rec = replay(gen_workload("adversarial", 20_000, seed=7), "deamo", p, audit_every=100)
    assert rec.exit_code == 0, (rec.violations[:3], rec.mismatches[:3])
    s = rec.summary
    assert s["events"].get("leaf_merge", 0) > 0
    assert s["arrival_max"] <= p.buffer_cap
    assert all(s["loop_max"][k] <= v for k, v in s["loop_bounds"].items())


def test_small_block_needs_more_maintenance():
    # at B=16 the default c_i=4 lets the root outrun maintenance
    ops = gen_workload("random", 6000, seed=2)
    ok = replay(ops, "deamo", derive_params(16, 0.5, 4096, c_i=8), audit_every=100)
    assert ok.exit_code == 0
    assert ok.summary["root_high_water"] <= 2 * 8
