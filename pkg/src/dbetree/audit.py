"""Invariant checks over a tree's raw block payloads (no I/O accounting).

Each checker returns a list of :class:`Violation`; an empty list means the
invariant holds.  ``census`` is the cheap subset meant to run at every
quiescent point; ``full_audit`` adds content-level checks.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import child_bounds


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.detail}"


def _in_interval(k, lo, hi):
    return (lo is None or k >= lo) and (hi is None or k < hi)


def leaf_size_violations(tree, exempt_single=True):
    """Leaves outside ``[tau, 5 tau]`` (``[tau/4, 5 tau]`` while the tree's
    band is relaxed after a rebuild; the first clean strict check ends it)."""
    p = tree.p
    out = []
    leaves = list(tree.iter_leaves())
    if exempt_single and len(leaves) == 1:
        return out
    lo_bound = p.tau // 4 if tree.band_relaxed else p.tau
    strict = True
    for leaf, lo, _ in leaves:
        size = leaf.net_size
        if size < p.tau:
            strict = False
        if not lo_bound <= size <= 5 * p.tau:
            out.append(Violation("leaf_size", f"leaf {leaf.bid} at {lo}: {size} "
                                              f"outside [{lo_bound}, {5 * p.tau}]"))
    if strict and tree.band_relaxed and not tree.maint.root_drain_only:
        tree.band_relaxed = False
    return out


def overfull_violations(tree):
    cap = tree.p.buffer_cap
    over = [(n.bid, len(n.buffer)) for n, _, _, _ in tree.iter_nodes()
            if not n.is_leaf and len(n.buffer) > cap]
    out = []
    if len(over) > 2:
        out.append(Violation("overfull_census", f"{len(over)} overfull nodes: {over[:6]}"))
    for bid, n in over:
        if n > 2 * cap:
            out.append(Violation("overfull_size", f"node {bid} buffer {n} > {2 * cap}"))
    non_root = [bid for bid, _ in over if bid != tree.root_bid]
    if len(non_root) > 1:
        out.append(Violation("overfull_census", f"non-root overfull nodes {non_root}"))
    return out


def census(tree):
    """Leaf-size band and overfull census."""
    return leaf_size_violations(tree) + overfull_violations(tree)


def structure_violations(tree):
    """Routing, fanout, height, extreme-size entries and leaf bookkeeping."""
    p = tree.p
    out = []
    bad_fanout = []
    for node, depth, lo, hi in tree.iter_nodes():
        if node.is_leaf:
            out.extend(_leaf_violations(tree, node, lo, hi))
            continue
        if node.pivots != sorted(set(node.pivots)):
            out.append(Violation("pivots", f"node {node.bid} pivots not increasing"))
        if len(node.pivots) != len(node.children) - 1:
            out.append(Violation("pivots", f"node {node.bid} has {len(node.pivots)} pivots "
                                           f"for {len(node.children)} children"))
        if any(not _in_interval(pv, lo, hi) for pv in node.pivots):
            out.append(Violation("routing", f"node {node.bid} pivot outside its interval"))
        keys = node.buffer.keys
        if keys != sorted(set(keys)):
            out.append(Violation("buffer_order", f"node {node.bid} buffer not strictly sorted"))
        if keys and not (_in_interval(keys[0], lo, hi) and _in_interval(keys[-1], lo, hi)):
            out.append(Violation("routing", f"node {node.bid} buffer key outside [{lo}, {hi})"))
        n = len(node.children)
        is_root = node.bid == tree.root_bid
        if is_root:
            if n < 2 and node.level > 1:
                bad_fanout.append((node.bid, n))
        elif not p.fanout_min <= n <= p.fanout_max:
            bad_fanout.append((node.bid, n))
        for i, c in enumerate(node.children):
            child = tree.node(c)
            mx, mn = _extremes(tree, child)
            if node.child_max[i] != mx or node.child_min[i] != mn:
                out.append(Violation("aux", f"node {node.bid} entry {i} is "
                                            f"({node.child_max[i]}, {node.child_min[i]}), "
                                            f"true ({mx}, {mn})"))
            if not child.is_leaf and child.level != node.level - 1:
                out.append(Violation("levels", f"node {c} level {child.level} under {node.level}"))
            if child.is_leaf and node.level != 1:
                out.append(Violation("levels", f"leaf {c} under level {node.level}"))
    if len(bad_fanout) > 1 or any(
            n < p.fanout_min - 1 or n > p.fanout_max + 1 for _, n in bad_fanout):
        out.append(Violation("fanout", f"nodes outside the child-count range: {bad_fanout}"))
    if tree.height > p.max_height:
        out.append(Violation("height", f"height {tree.height} > {p.max_height}"))
    return out


def _extremes(tree, node):
    if node.is_leaf:
        return node.net_size, node.net_size
    sizes = [lf.net_size for lf in _leaves_below(tree, node)]
    return max(sizes), min(sizes)


def _leaves_below(tree, node):
    stack = [node]
    while stack:
        n = stack.pop()
        if n.is_leaf:
            yield n
        else:
            stack.extend(tree.node(c) for c in n.children)


def _leaf_violations(tree, leaf, lo, hi):
    p = tree.p
    out = []
    if leaf.net_size != leaf.recount():
        out.append(Violation("leaf_count", f"leaf {leaf.bid} net {leaf.net_size} "
                                           f"!= recount {leaf.recount()}"))
    if len(leaf.ml_pivots) != max(len(leaf.mls) - 1, 0):
        out.append(Violation("leaf_table", f"leaf {leaf.bid} pivot table size"))
    if len(leaf.buffer) > 2 * p.microroot_buffer_cap:
        out.append(Violation("microroot", f"leaf {leaf.bid} buffer {len(leaf.buffer)}"))
    keys = leaf.buffer.keys
    if keys and not (_in_interval(keys[0], lo, hi) and _in_interval(keys[-1], lo, hi)):
        out.append(Violation("routing", f"leaf {leaf.bid} buffer key outside [{lo}, {hi})"))
    for i, m in enumerate(leaf.mls):
        mlo, mhi = child_bounds(leaf.ml_pivots, i, lo, hi)
        ks = m.keys
        if any(ks[j] >= ks[j + 1] for j in range(len(ks) - 1)):
            out.append(Violation("microleaf", f"leaf {leaf.bid} micro-leaf {i} not sorted"))
        if ks and not (_in_interval(ks[0], mlo, mhi) and _in_interval(ks[-1], mlo, mhi)):
            out.append(Violation("routing", f"leaf {leaf.bid} micro-leaf {i} outside its range"))
        if len(ks) > p.microleaf_cap:
            out.append(Violation("microleaf", f"leaf {leaf.bid} micro-leaf {i} holds {len(ks)}"))
        if len(m.blocks) != max(1, -(-len(ks) // p.B)):
            out.append(Violation("microleaf", f"leaf {leaf.bid} micro-leaf {i} block span"))
    return out


def content_violations(tree, expected):
    """Signed counts in {0, 1} and the logical set equal to ``expected``."""
    try:
        got = tree.contents()
    except Exception as exc:          # IntegrityError from the count check
        return [Violation("annihilation", str(exc))]
    if got != list(expected):
        gs, es = set(got), set(expected)
        return [Violation("content", f"missing {sorted(es - gs)[:5]}, extra {sorted(gs - es)[:5]}")]
    return []


def full_audit(tree, expected=None):
    out = census(tree) + structure_violations(tree)
    if expected is not None:
        out += content_violations(tree, expected)
    return out
