"""Fixed-size page encoding, an optional page-file backing and its loader.

Block ``i`` lives at byte offset ``i * page_size``; page 0 is the
superblock.  All integers are little-endian.  Every page starts with a one
byte tag:

* ``1`` internal node: level, child count, buffer length, merged flag,
  then pivots, child ids, per-child max and min leaf sizes (``u64`` each) and
  the buffer as ``(u64 key, i8 kind)`` records;
* ``2`` leaf header chunk: chunk index, chunk count, total length, bytes.
  The header itself lists the leaf's header block ids, its net size, the
  micro-root buffer records and, per micro-leaf, its pivot, key count and
  block ids;
* ``3`` micro-leaf block: index within the micro-leaf, key count, ``u64`` keys;
* ``4`` superblock: magic, ``B``, epsilon (IEEE-754 double), ``N_cap``,
  root id, next free id, the tuning constants and the live key count.

The in-memory store stays authoritative; pages are written on write-back and
:meth:`FileBacking.sync` writes the superblock.  The file is a consistent
image right after :meth:`dbetree.pager.Pager.flush`.
"""
from __future__ import annotations

import hashlib
import struct
from array import array

from .core import InternalNode, UpdateBuffer
from .leaf import Leaf, MicroLeaf

MAGIC = b"DBETREE1"
T_INTERNAL, T_HEADER, T_MICRO, T_SUPER = 1, 2, 3, 4
_SUPER = struct.Struct("<B8sIdQQQIIIQ")
_INTERNAL = struct.Struct("<BHHIB")
_CHUNK = struct.Struct("<BHHI")
_MICRO = struct.Struct("<BHI")


class PageFormatError(ValueError):
    pass


def page_size(B: int) -> int:
    return 64 + 32 * B


def _records(buf: UpdateBuffer) -> bytes:
    n = len(buf)
    return (array("Q", buf.keys).tobytes()
            + array("b", buf.kinds).tobytes()) if n else b""


def _read_records(data, off, n):
    keys = array("Q")
    keys.frombytes(data[off:off + 8 * n])
    off += 8 * n
    kinds = array("b")
    kinds.frombytes(data[off:off + n])
    return UpdateBuffer(keys.tolist(), kinds.tolist()), off + n


def encode_internal(node: InternalNode) -> bytes:
    n = len(node.children)
    out = [_INTERNAL.pack(T_INTERNAL, node.level, n, len(node.buffer), int(node.merged))]
    for seq in (node.pivots, node.children, node.child_max, node.child_min):
        out.append(array("Q", seq).tobytes())
    out.append(_records(node.buffer))
    return b"".join(out)


def decode_internal(bid, data) -> InternalNode:
    tag, level, n, nbuf, merged = _INTERNAL.unpack_from(data)
    off = _INTERNAL.size
    seqs = []
    for count in (n - 1, n, n, n):
        a = array("Q")
        a.frombytes(data[off:off + 8 * count])
        seqs.append(a.tolist())
        off += 8 * count
    buf, _ = _read_records(data, off, nbuf)
    node = InternalNode(bid, level, pivots=seqs[0], children=seqs[1], buffer=buf,
                        child_max=seqs[2], child_min=seqs[3])
    node.merged = bool(merged)
    return node


def encode_header(leaf: Leaf) -> bytes:
    out = [struct.pack("<H", len(leaf.blocks)), array("Q", leaf.blocks).tobytes(),
           struct.pack("<qII", leaf.net_size, len(leaf.buffer), len(leaf.mls)),
           _records(leaf.buffer), array("Q", leaf.ml_pivots).tobytes()]
    for m in leaf.mls:
        out.append(struct.pack("<IH", len(m.keys), len(m.blocks)))
        out.append(array("Q", m.blocks).tobytes())
    return b"".join(out)


def decode_header(data):
    """Returns ``(leaf, [(n_keys, block ids), ...])``; micro-leaf keys are
    read separately."""
    (nb,) = struct.unpack_from("<H", data)
    off = 2
    blocks = array("Q")
    blocks.frombytes(data[off:off + 8 * nb])
    off += 8 * nb
    net, nbuf, nml = struct.unpack_from("<qII", data, off)
    off += 16
    buf, off = _read_records(data, off, nbuf)
    piv = array("Q")
    npiv = max(nml - 1, 0)
    piv.frombytes(data[off:off + 8 * npiv])
    off += 8 * npiv
    mls = []
    for _ in range(nml):
        nk, nblk = struct.unpack_from("<IH", data, off)
        off += 6
        ids = array("Q")
        ids.frombytes(data[off:off + 8 * nblk])
        off += 8 * nblk
        mls.append((nk, ids.tolist()))
    leaf = Leaf(blocks.tolist())
    leaf.net_size = net
    leaf.buffer = buf
    leaf.ml_pivots = piv.tolist()
    return leaf, mls


def encode_block(bid, payload, B) -> bytes:
    """Page body (unpadded) for block ``bid`` holding ``payload``."""
    size = page_size(B)
    if payload is None:
        return b""
    if isinstance(payload, InternalNode):
        body = encode_internal(payload)
    elif isinstance(payload, Leaf):
        blob = encode_header(payload)
        room = size - _CHUNK.size
        nchunks = max(1, -(-len(blob) // room))
        if nchunks > len(payload.blocks):
            raise PageFormatError(f"leaf header of {len(blob)} bytes needs {nchunks} pages, "
                                  f"has {len(payload.blocks)}")
        i = payload.blocks.index(bid)
        part = blob[i * room:(i + 1) * room]
        body = _CHUNK.pack(T_HEADER, i, nchunks, len(blob)) + part
    elif isinstance(payload, MicroLeaf):
        i = payload.blocks.index(bid)
        keys = payload.keys[i * B:(i + 1) * B]
        body = _MICRO.pack(T_MICRO, i, len(keys)) + keys.tobytes()
    else:
        raise PageFormatError(f"cannot encode {type(payload).__name__}")
    if len(body) > size:
        raise PageFormatError(f"block {bid} encodes to {len(body)} > page size {size}")
    return body


def encode_superblock(p, root_bid, next_bid, n_live) -> bytes:
    return _SUPER.pack(T_SUPER, MAGIC, p.B, float(p.epsilon), p.N_cap, root_bid,
                       next_bid, p.c_i, p.c_h, p.c_M, n_live)


def decode_superblock(data) -> dict:
    tag, magic, B, eps, n_cap, root, nxt, c_i, c_h, c_M, n_live = _SUPER.unpack_from(data)
    if tag != T_SUPER or magic != MAGIC:
        raise PageFormatError("not a tree page file (bad superblock)")
    return {"B": B, "epsilon": eps, "N_cap": n_cap, "root": root, "next": nxt,
            "c_i": c_i, "c_h": c_h, "c_M": c_M, "n_live": n_live}


def serialize(tree) -> bytes:
    """Canonical byte image of a tree (all reachable blocks, in id order)."""
    B = tree.p.B
    parts = [struct.pack("<Q", tree.root_bid)]
    for bid in sorted(tree.block_ids()):
        body = encode_block(bid, tree.pager.peek(bid), B)
        parts.append(struct.pack("<QI", bid, len(body)))
        parts.append(body)
    return b"".join(parts)


def digest(tree) -> str:
    return hashlib.sha256(serialize(tree)).hexdigest()


class FileBacking:
    """Page file written by the pager on every write-back."""

    def __init__(self, path, B):
        self.path = path
        self.B = B
        self.page_size = page_size(B)
        self.f = open(path, "w+b")
        self.superblock = None        # callable returning the superblock bytes
        self.pages_written = 0

    def write_page(self, bid, payload):
        body = encode_block(bid, payload, self.B)
        self.f.seek(bid * self.page_size)
        self.f.write(body.ljust(self.page_size, b"\0"))
        self.pages_written += 1

    def sync(self):
        if self.superblock is not None:
            self.f.seek(0)
            self.f.write(self.superblock().ljust(self.page_size, b"\0"))
        self.f.flush()

    def close(self):
        self.f.close()


def read_image(path):
    """Decode a page file into ``(superblock, {block id: payload})``."""
    with open(path, "rb") as f:
        head = f.read(_SUPER.size)
        sb = decode_superblock(head)
        size = page_size(sb["B"])

        def page(bid):
            f.seek(bid * size)
            data = f.read(size)
            if len(data) < size:
                raise PageFormatError(f"page {bid} is truncated")
            return data

        store = {}
        stack = [sb["root"]]
        while stack:
            bid = stack.pop()
            data = page(bid)
            tag = data[0]
            if tag == T_INTERNAL:
                node = decode_internal(bid, data)
                store[bid] = node
                stack.extend(node.children)
            elif tag == T_HEADER:
                _, _, nchunks, total = _CHUNK.unpack_from(data)
                first = data[_CHUNK.size:]
                # chunk 0 lists the header blocks; read the rest from them
                (nb,) = struct.unpack_from("<H", first)
                ids = array("Q")
                ids.frombytes(first[2:2 + 8 * nb])
                blob = bytearray(first)
                for i in range(1, nchunks):
                    blob += page(ids[i])[_CHUNK.size:]
                leaf, mls = decode_header(bytes(blob[:total]))
                for nk, blks in mls:
                    keys = array("Q")
                    for b in blks:
                        d = page(b)
                        _, _, n = _MICRO.unpack_from(d)
                        keys.frombytes(d[_MICRO.size:_MICRO.size + 8 * n])
                    if len(keys) != nk:
                        raise PageFormatError(f"micro-leaf under {bid} holds {len(keys)}, "
                                              f"header says {nk}")
                    ml = MicroLeaf(keys, blks)
                    leaf.mls.append(ml)
                    for b in blks:
                        store[b] = ml
                for b in leaf.blocks:
                    store[b] = leaf
            else:
                raise PageFormatError(f"page {bid} has unexpected tag {tag}")
    return sb, store


def attach(backing: FileBacking, dictionary):
    """Let ``backing`` write the superblock of a live dictionary on sync."""
    def sb():
        t = dictionary.tree
        return encode_superblock(t.p, t.root_bid, t.pager._next, dictionary.n_live)
    backing.superblock = sb


def load_tree(path, cache_blocks=None):
    """Rebuild a tree from a page file.  Returns ``(tree, superblock)``."""
    from .pager import Pager
    from .params import derive_params
    from .tree import BepsTree

    sb, store = read_image(path)
    p = derive_params(sb["B"], sb["epsilon"], sb["N_cap"],
                      c_i=sb["c_i"], c_h=sb["c_h"], c_M=sb["c_M"])
    pager = Pager(cache_blocks or p.default_cache_blocks)
    pager.install(store, sb["next"])
    tree = BepsTree(p, pager, build=False)
    tree.root_bid = sb["root"]
    pager.pin(tree.root_bid)
    return tree, sb
