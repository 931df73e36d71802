"""Read-only queries: predecessor, membership and range reporting.

Queries never modify a node.  They read blocks through the pager (so their
transfers are counted) and resolve buffered updates by signed counts: every
location holds at most one update per key, an insertion counts ``+1`` and a
deletion ``-1``, and a key is present iff its counts over the leaf and all
ancestor buffers sum to one.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import Counter

from .core import ContractError, child_bounds


# -- two sorted sets ----------------------------------------------------------

def largest_not_in(X, Y, *, B=None, meter=None, check=True):
    """Largest element of ``X`` that is not in ``Y``.

    ``X`` and ``Y`` are ascending sequences of distinct, mutually comparable
    elements with ``len(X) == 2 * len(Y)`` and ``Y`` a subset of ``X``.
    Returns ``None`` when every element of ``X`` is in ``Y`` (only possible
    for empty inputs).  ``check=False`` skips the linear precondition scan for
    callers that build the inputs themselves.

    The search compares the ``r``-th largest elements of the two sets, halving
    the candidate window each time; when ``B`` is given, the number of blocks
    the selections read is added to ``meter["blocks"]``.  That is at most
    ``4 |X| / B + 12``.
    """
    m = len(Y)
    if len(X) != 2 * m:
        raise ContractError(f"need |X| = 2|Y|, got {len(X)} and {m}")
    if check:
        if any(X[i] >= X[i + 1] for i in range(len(X) - 1)) or \
                any(Y[i] >= Y[i + 1] for i in range(m - 1)):
            raise ContractError("X and Y must be strictly ascending")
        j = 0
        for y in Y:
            j = bisect_left(X, y, j)
            if j == len(X) or X[j] != y:
                raise ContractError(f"Y is not a subset of X ({y!r} missing)")
    if m == 0:
        return None

    def ex(r):          # r-th largest, 1-based
        return X[2 * m - r]

    def ey(r):
        return Y[m - r]

    small = [False]

    def charge(width):
        # a window wider than a block is read in full; once it fits in one
        # block it spans at most two per list, read once and kept
        if meter is None or not B:
            return
        if width > B:
            meter["blocks"] = meter.get("blocks", 0) + 2 * (-(-width // B))
        elif not small[0]:
            small[0] = True
            meter["blocks"] = meter.get("blocks", 0) + 4

    charge(m)
    if ex(m) == ey(m):
        return ex(m + 1)
    lo, hi = 1, m           # smallest k with ex(k) > ey(k) lies in [lo, hi]
    while lo < hi:
        mid = (lo + hi) // 2
        charge(hi - lo + 1)
        if ex(mid) > ey(mid):
            hi = mid
        else:
            lo = mid + 1
    return ex(lo)


def _tag_from_top(keys):
    """``(key, -j)`` for ascending ``keys``, ``j`` counting equal keys from the
    largest occurrence down, so the result is strictly ascending."""
    out = [None] * len(keys)
    prev, j = None, 0
    for i in range(len(keys) - 1, -1, -1):
        k = keys[i]
        j = j + 1 if k == prev else 0
        prev = k
        out[i] = (k, -j)
    return out


def largest_not_in_multiset(inserts, deletes, *, B=None, meter=None):
    """Largest key whose insertion records outnumber its deletion records.

    ``inserts`` and ``deletes`` are key lists with every deletion matched by
    an insertion of the same key.  Records are made distinct by pairing the
    ``j``-th largest deletion record of a key with its ``j``-th largest
    insertion record.  With ``m`` deletions the answer is among the ``m + 1``
    largest insertion records, so only the top ``2m`` are kept (tags of a
    suffix agree with tags of the whole list); sentinels below every key then
    restore ``|X| = 2|Y|`` for :func:`largest_not_in`.
    """
    ins, dels = sorted(inserts), sorted(deletes)
    for k in set(dels):
        if bisect_right(ins, k) - bisect_left(ins, k) < bisect_right(dels, k) - bisect_left(dels, k):
            raise ContractError(f"deletion of {k} without a matching insertion")
    if not dels:
        return ins[-1] if ins else None
    X = _tag_from_top(ins[-2 * len(dels):])
    kept = set(X)
    Y = [y for y in _tag_from_top(dels) if y in kept]
    pad = len(X) - 2 * len(Y)
    if pad > 0:
        sent = [(-1, i) for i in range(pad)]
        X, Y = sent + X, sent + Y
    elif pad < 0:
        X = [(-1, i) for i in range(-pad)] + X
    e = largest_not_in(X, Y, B=B, meter=meter, check=False)
    if e is None or e[0] < 0:
        return None
    return e[0]


# -- tree walks ---------------------------------------------------------------

def _descend(tree, key):
    """Root-to-leaf path for ``key`` as ``[(node, lo, hi), ...]`` and the
    leaf with its interval."""
    pager = tree.pager
    node = pager.access(tree.root_bid)
    lo = hi = None
    path = []
    while True:
        path.append((node, lo, hi))
        i = node.route(key)
        lo, hi = child_bounds(node.pivots, i, lo, hi)
        child = pager.access(node.children[i])
        if child.is_leaf:
            return path, child, lo, hi
        node = child


def _touch_header(tree, leaf):
    for bid in leaf.header_used(tree.p.B):
        tree.pager.access(bid)


def _path_records(path, lo, hi, ins, dels):
    """Add the ancestor-buffer updates in ``[lo, hi)`` to the record lists."""
    for node, _, _ in path:
        keys, kinds = node.buffer.slice_between(lo, hi)
        for k, t in zip(keys, kinds):
            (ins if t > 0 else dels).append(k)


def _ml_tail(tree, leaf, hi, want):
    """Up to ``want`` largest micro-leaf keys below ``hi``, with the smallest
    key from which the scan is complete (``None``: whole leaf consumed)."""
    B, pager = tree.p.B, tree.pager
    got = []
    i = len(leaf.mls) - 1 if hi is None else min(bisect_right(leaf.ml_pivots, hi - 1),
                                                  len(leaf.mls) - 1)
    while i >= 0 and len(got) < want:
        ks = leaf.mls[i].keys
        y = len(ks) if hi is None else bisect_left(ks, hi)
        x = max(0, y - (want - len(got)))
        if y > x:
            for blk in range(x // B, (y - 1) // B + 1):
                pager.access(leaf.mls[i].blocks[blk])
            got[:0] = ks[x:y]
            if x > 0:
                return got, ks[x]
        i -= 1
    return got, None


def _gather(tree, top, want):
    """Update records for keys below ``top``, scanning leaves right to left
    until ``want`` leaf insertions are found.

    Returns ``(inserts, deletes, region, leftmost)`` where every record for a
    key in ``[region, top)`` is included.
    """
    ins, dels = [], []
    leaf_ins = 0
    upper, key = top, top - 1
    while True:
        path, leaf, lo, _ = _descend(tree, key)
        _touch_header(tree, leaf)
        tail, start = _ml_tail(tree, leaf, upper, want - leaf_ins)
        ins.extend(tail)
        leaf_ins += len(tail)
        region = start if start is not None else (lo or 0)
        keys, kinds = leaf.buffer.slice_between(region, upper)
        for k, t in zip(keys, kinds):
            if t > 0:
                ins.append(k)
                leaf_ins += 1
            else:
                dels.append(k)
        _path_records(path, region, upper, ins, dels)
        if start is not None:
            return ins, dels, region, False
        if not lo:
            return ins, dels, 0, True
        if leaf_ins >= want:
            return ins, dels, lo, False
        upper, key = lo, lo - 1


def predecessor(tree, q):
    """Largest present key ``<= q``, or ``None``."""
    p = tree.p
    want = p.B * p.logBN
    top = q + 1
    while top > 0:
        ins, dels, region, leftmost = _gather(tree, top, want)
        if not ins:
            if leftmost:
                return None
            top = region
            continue
        ins.sort()
        # the `want` largest insertion records, widened to whole keys
        floor = ins[max(0, len(ins) - want)]
        x = ins[bisect_left(ins, floor):]
        y = [k for k in dels if k >= floor]
        ans = largest_not_in_multiset(x, y, B=p.B)
        if ans is not None:
            return ans
        top = floor
    return None


def member(tree, key) -> bool:
    return predecessor(tree, key) == key


def range_report(tree, a, b) -> list[int]:
    """Present keys in the closed range ``[a, b]``, ascending."""
    if a > b:
        raise ContractError(f"empty range [{a}, {b}]")
    B, pager = tree.p.B, tree.pager
    out = []
    key = a
    while True:
        path, leaf, lo, hi = _descend(tree, key)
        _touch_header(tree, leaf)
        end = b + 1 if hi is None else min(hi, b + 1)
        net = Counter()
        i0 = min(bisect_right(leaf.ml_pivots, key), max(len(leaf.mls) - 1, 0))
        for i in range(i0, len(leaf.mls)):
            mlo, _ = leaf.ml_bounds(i)
            if mlo is not None and mlo >= end:
                break
            ks = leaf.mls[i].keys
            x, y = bisect_left(ks, key), bisect_left(ks, end)
            if y > x:
                for blk in range(x // B, (y - 1) // B + 1):
                    pager.access(leaf.mls[i].blocks[blk])
                for k in ks[x:y]:
                    net[k] += 1
        for node in [n for n, _, _ in path] + [leaf]:
            keys, kinds = node.buffer.slice_between(key, end)
            for k, t in zip(keys, kinds):
                net[k] += t
        out.extend(sorted(k for k, v in net.items() if v == 1))
        if hi is None or hi > b:
            return out
        key = hi
