import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forkdyn.sim.blocktree import (
    AttachKind,
    Block,
    BlockLedger,
    BlockTree,
    MalformedBlockError,
    attach_block,
    check_tree,
)


def chain(ledger, parent, n, miner=0):
    ids = []
    for _ in range(n):
        parent = ledger.new_block(parent, miner, 0.0, False)
        ids.append(parent)
    return ids


def test_extend_and_duplicate():
    ledger = BlockLedger()
    tree = BlockTree(ledger)
    (b1,) = chain(ledger, 0, 1)
    assert tree.attach(b1)[0].kind == AttachKind.EXTENDED_MAIN
    assert tree.attach(b1)[0].kind == AttachKind.DUPLICATE
    assert tree.main_tip == b1
    assert tree.main_chain() == [0, b1]


def test_child_before_parent():
    ledger = BlockLedger()
    tree = BlockTree(ledger)
    a, b, c = chain(ledger, 0, 3)
    assert tree.attach(c)[0].kind == AttachKind.DETACHED
    assert tree.attach(b)[0].kind == AttachKind.DETACHED
    assert tree.attach(c)[0].kind == AttachKind.DUPLICATE
    assert tree.is_detached(b) and tree.is_detached(c)
    outcomes = tree.attach(a)
    assert [o.block for o in outcomes] == [a, b, c]
    assert all(o.kind == AttachKind.EXTENDED_MAIN for o in outcomes)
    assert tree.main_tip == c and not tree.detached
    check_tree(tree)


def test_equal_height_keeps_first_received():
    ledger = BlockLedger()
    tree = BlockTree(ledger)
    (a,) = chain(ledger, 0, 1)
    (b,) = chain(ledger, 0, 1, miner=1)
    tree.attach(a)
    out = tree.attach(b)[0]
    assert out.kind == AttachKind.SIDE_BRANCH and out.split
    assert tree.main_tip == a
    assert tree.splits == 1
    # a third leaf at the same height is not a new split
    (c,) = chain(ledger, 0, 1, miner=2)
    assert not tree.attach(c)[0].split
    assert tree.splits == 1 and tree.at_tip_height == 3


def test_reorg_depth():
    ledger = BlockLedger()
    tree = BlockTree(ledger)
    main = chain(ledger, 0, 3)
    side = chain(ledger, main[0], 3, miner=1)
    for b in main + side[:2]:
        tree.attach(b)
    assert tree.main_tip == main[-1]
    out = tree.attach(side[2])[0]
    assert out.kind == AttachKind.REORG
    assert out.depth == 2
    assert tree.main_chain() == [0, main[0]] + side
    check_tree(tree)


def test_side_branch_below_top_is_not_a_split():
    ledger = BlockLedger()
    tree = BlockTree(ledger)
    main = chain(ledger, 0, 2)
    (stale,) = chain(ledger, 0, 1, miner=1)
    for b in main:
        tree.attach(b)
    out = tree.attach(stale)[0]
    assert out.kind == AttachKind.SIDE_BRANCH and not out.split
    assert tree.splits == 0


def test_malformed_height():
    ledger = BlockLedger()
    tree = BlockTree(ledger)
    bad = Block(1, 0, 2, 0, 0.0)
    with pytest.raises(MalformedBlockError):
        attach_block(tree, bad)


def test_attach_block_registers_block():
    ledger = BlockLedger()
    tree = BlockTree(ledger)
    out = attach_block(tree, Block(1, 0, 1, 3, 5.0))
    assert out[0].kind == AttachKind.EXTENDED_MAIN
    assert ledger.block(1).miner == 3
    assert tree.children == {0: [1]}


@st.composite
def trees_and_orders(draw):
    n = draw(st.integers(1, 25))
    parents = [draw(st.integers(0, i)) for i in range(n)]
    order = draw(st.permutations(list(range(1, n + 1))))
    return parents, order


@settings(max_examples=150, deadline=None)
@given(trees_and_orders())
def test_any_delivery_order(case):
    parents, order = case
    ledger = BlockLedger()
    for i, p in enumerate(parents):
        ledger.new_block(p, i, float(i), False)
    tree = BlockTree(ledger)
    for b in order:
        tree.attach(b)
        check_tree(tree)
    assert not tree.detached
    assert tree.known == set(range(len(parents) + 1))
    top = max(ledger.height)
    assert tree.tip_height == top
    assert ledger.height[tree.main_tip] == top
    # oracle: a block attaches at the step its last missing ancestor arrives;
    # the tip is the highest block that attached first
    pos = {b: i for i, b in enumerate(order)}
    step = {b: max(pos[a] for a in ledger.chain_to(b)[1:]) for b in order}
    tops = [b for b in order if ledger.height[b] == top]
    earliest = min(step[b] for b in tops)
    assert tree.main_tip in {b for b in tops if step[b] == earliest}
