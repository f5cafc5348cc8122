"""Per-node block tree with the longest-chain update rules.

The main branch is the chain ending at the highest attached block; among
equal heights the block received first wins.  Blocks whose parent is unknown
are held aside and attached as soon as the parent arrives.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, List, NamedTuple, Optional, Sequence, Set

from forkdyn.errors import ForkdynError

GENESIS = 0


class MalformedBlockError(ForkdynError, ValueError):
    """Block height is inconsistent with its parent's height."""


class AttachKind(IntEnum):
    DUPLICATE = 0
    EXTENDED_MAIN = 1
    SIDE_BRANCH = 2
    REORG = 3
    DETACHED = 4


class AttachOutcome(NamedTuple):
    block: int
    kind: AttachKind
    depth: int = 0
    # second leaf created at the node's maximum height
    split: bool = False


@dataclass(frozen=True)
class Block:
    id: int
    parent_id: int
    height: int
    miner: int
    mined_at: float
    pool_origin: bool = False
    published_at: Optional[float] = None


class BlockLedger:
    """Global block table shared by every tree in a simulation.

    Columns are plain lists indexed by block id; id 0 is the genesis block.
    """

    def __init__(self):
        self.parent: List[int] = [-1]
        self.height: List[int] = [0]
        self.miner: List[int] = [-1]
        self.pool_origin: List[bool] = [False]
        self.mined_at: List[float] = [0.0]
        self.published_at: List[Optional[float]] = [0.0]

    def __len__(self) -> int:
        return len(self.parent)

    def new_block(self, parent: int, miner: int, time: float, pool_origin: bool) -> int:
        bid = len(self.parent)
        self.parent.append(parent)
        self.height.append(self.height[parent] + 1)
        self.miner.append(miner)
        self.pool_origin.append(pool_origin)
        self.mined_at.append(time)
        self.published_at.append(None if pool_origin else time)
        return bid

    def add(self, block: Block) -> None:
        """Register an externally built block (its id must be the next free id)."""
        if block.id != len(self.parent):
            raise MalformedBlockError(f"expected block id {len(self.parent)}, got {block.id}")
        self.parent.append(block.parent_id)
        self.height.append(block.height)
        self.miner.append(block.miner)
        self.pool_origin.append(block.pool_origin)
        self.mined_at.append(block.mined_at)
        self.published_at.append(block.published_at)

    def block(self, bid: int) -> Block:
        return Block(
            bid,
            self.parent[bid],
            self.height[bid],
            self.miner[bid],
            self.mined_at[bid],
            self.pool_origin[bid],
            self.published_at[bid],
        )

    def chain_to(self, tip: int) -> List[int]:
        """Block ids from genesis to ``tip``."""
        chain = []
        while tip != -1:
            chain.append(tip)
            tip = self.parent[tip]
        chain.reverse()
        return chain


class BlockTree:
    """One node's view of the block tree."""

    __slots__ = (
        "ledger",
        "known",
        "tip",
        "tip_height",
        "at_tip_height",
        "detached",
        "splits",
    )

    def __init__(self, ledger: BlockLedger):
        self.ledger = ledger
        self.known: Set[int] = {GENESIS}
        self.tip = GENESIS
        self.tip_height = 0
        # number of attached blocks at the maximum height
        self.at_tip_height = 1
        # parent id -> blocks waiting for it
        self.detached: Dict[int, List[int]] = {}
        self.splits = 0

    @property
    def children(self) -> Dict[int, List[int]]:
        """Attached children of each attached block, in id order."""
        out: Dict[int, List[int]] = {}
        parent = self.ledger.parent
        for b in sorted(self.known):
            if b != GENESIS:
                out.setdefault(parent[b], []).append(b)
        return out

    @property
    def main_tip(self) -> int:
        return self.tip

    @property
    def single_leaf_at_top(self) -> bool:
        return self.at_tip_height == 1

    def is_detached(self, bid: int) -> bool:
        return any(bid in waiting for waiting in self.detached.values())

    def main_chain(self) -> List[int]:
        return self.ledger.chain_to(self.tip)

    def attach(self, bid: int) -> List[AttachOutcome]:
        """Apply the update rules to a newly received block.

        Returns one outcome for ``bid`` followed by outcomes for any held
        descendants that became attachable, in attachment order.
        """
        if bid in self.known:
            return [AttachOutcome(bid, AttachKind.DUPLICATE)]
        parent = self.ledger.parent[bid]
        if parent not in self.known:
            waiting = self.detached.setdefault(parent, [])
            if bid in waiting:
                return [AttachOutcome(bid, AttachKind.DUPLICATE)]
            waiting.append(bid)
            return [AttachOutcome(bid, AttachKind.DETACHED)]
        outcomes = [self._link(bid, parent)]
        if self.detached:
            self._release(bid, outcomes)
        return outcomes

    def _release(self, bid: int, outcomes: List[AttachOutcome]) -> None:
        pending = [bid]
        while pending:
            waiting = self.detached.pop(pending.pop(), None)
            if not waiting:
                continue
            # lowest id first for a deterministic order
            for child in sorted(waiting):
                if child not in self.known:
                    outcomes.append(self._link(child, self.ledger.parent[child]))
                    pending.append(child)

    def _link(self, bid: int, parent: int) -> AttachOutcome:
        ledger = self.ledger
        height = ledger.height[bid]
        if ledger.height[parent] + 1 != height:
            raise MalformedBlockError(
                f"block {bid} has height {height} but its parent {parent} has height "
                f"{ledger.height[parent]}"
            )
        self.known.add(bid)
        if parent == self.tip:
            self.tip = bid
            self.tip_height = height
            self.at_tip_height = 1
            return AttachOutcome(bid, AttachKind.EXTENDED_MAIN)
        if height > self.tip_height:
            depth = self._fork_depth(self.tip, parent)
            self.tip = bid
            self.tip_height = height
            self.at_tip_height = 1
            return AttachOutcome(bid, AttachKind.REORG, depth)
        if height == self.tip_height:
            self.at_tip_height += 1
            if self.at_tip_height == 2:
                self.splits += 1
                return AttachOutcome(bid, AttachKind.SIDE_BRANCH, 0, True)
        return AttachOutcome(bid, AttachKind.SIDE_BRANCH)

    def _fork_depth(self, old_tip: int, new_parent: int) -> int:
        """Number of old main-branch blocks rolled back by a reorganisation."""
        parent = self.ledger.parent
        height = self.ledger.height
        a, b = old_tip, new_parent
        depth = 0
        while height[a] > height[b]:
            a = parent[a]
            depth += 1
        while height[b] > height[a]:
            b = parent[b]
        while a != b:
            a = parent[a]
            b = parent[b]
            depth += 1
        return depth


def attach_block(tree: BlockTree, block: int | Block) -> List[AttachOutcome]:
    """Attach ``block`` to ``tree``; a :class:`Block` is registered in the ledger first."""
    if isinstance(block, Block):
        if block.id >= len(tree.ledger):
            tree.ledger.add(block)
        block = block.id
    return tree.attach(block)


def check_tree(tree: BlockTree) -> None:
    """Raise ``AssertionError`` if ``tree`` violates its structural invariants."""
    ledger = tree.ledger
    top = max(ledger.height[b] for b in tree.known)
    assert ledger.height[tree.tip] == top == tree.tip_height
    assert sum(1 for b in tree.known if ledger.height[b] == top) == tree.at_tip_height
    for b in tree.known:
        if b != GENESIS:
            p = ledger.parent[b]
            assert p in tree.known
            assert ledger.height[b] == ledger.height[p] + 1
    for p, waiting in tree.detached.items():
        assert p not in tree.known
        for b in waiting:
            assert b not in tree.known


def common_prefix_length(chains: Sequence[Sequence[int]]) -> int:
    n = 0
    for column in zip(*chains):
        if any(c != column[0] for c in column):
            break
        n += 1
    return n
