import random

import pytest

from dbetree.core import InternalNode, UpdateBuffer
from dbetree.dictionary import DeamortizedTree
from dbetree.pagefile import (FileBacking, PageFormatError, attach, decode_internal,
                              decode_superblock, encode_block, encode_internal,
                              encode_superblock, load_tree, page_size, read_image,
                              serialize)
from dbetree.params import derive_params

from conftest import apply, random_updates


def test_page_size():
    assert page_size(16) == 64 + 32 * 16
    assert page_size(256) == 8256


def test_internal_round_trip():
    node = InternalNode(7, 2, pivots=[10, 20], children=[3, 4, 5],
                        buffer=UpdateBuffer([1, 15, 30], [1, -1, 1]),
                        child_max=[9, 8, 7], child_min=[1, 2, 3])
    node.merged = True
    back = decode_internal(7, encode_internal(node))
    for f in ("level", "pivots", "children", "child_max", "child_min", "merged"):
        assert getattr(back, f) == getattr(node, f)
    assert back.buffer == node.buffer


def test_superblock_round_trip_and_magic():
    p = derive_params(256, 0.5, 1 << 20, c_i=6)
    sb = decode_superblock(encode_superblock(p, 12, 99, 1234))
    assert sb == {"B": 256, "epsilon": 0.5, "N_cap": 1 << 20, "root": 12, "next": 99,
                  "c_i": 6, "c_h": 8, "c_M": 4, "n_live": 1234}
    bad = bytearray(encode_superblock(p, 1, 2, 3))
    bad[1] ^= 0xFF
    with pytest.raises(PageFormatError):
        decode_superblock(bytes(bad))


def test_oversized_node_rejected():
    node = InternalNode(1, 1, children=[2], buffer=UpdateBuffer(list(range(100)), [1] * 100))
    with pytest.raises(PageFormatError):
        encode_block(1, node, 16)


@pytest.mark.parametrize("B, c_i, n", [(16, 8, 20_000), (256, 4, 60_000)])
def test_file_round_trip(tmp_path, B, c_i, n):
    p = derive_params(B, 0.5, 1 << 16, c_i=c_i)
    path = tmp_path / "t.pages"
    backing = FileBacking(path, B)
    d = DeamortizedTree(params=p, backing=backing, rebuild=False)
    attach(backing, d)
    apply(d, random_updates(random.Random(B), n))
    d.pager.flush()
    backing.close()
    assert backing.pages_written > 0
    tree, sb = load_tree(path)
    assert sb["n_live"] == len(d) and sb["root"] == d.tree.root_bid
    assert tree.contents() == d.contents()
    assert serialize(tree) == serialize(d.tree)
    # the reloaded tree keeps working
    q = d.contents()[len(d) // 2]
    assert tree.p == d.params
    from dbetree.query import predecessor
    assert predecessor(tree, q) == q


def test_truncated_file(tmp_path):
    p = derive_params(16, 0.5, 4096)
    path = tmp_path / "t.pages"
    backing = FileBacking(path, 16)
    d = DeamortizedTree(params=p, backing=backing)
    attach(backing, d)
    for k in range(500):
        d.insert(k)
    d.pager.flush()
    backing.close()
    data = path.read_bytes()
    path.write_bytes(data[:page_size(16) + 10])
    with pytest.raises(PageFormatError):
        read_image(path)
