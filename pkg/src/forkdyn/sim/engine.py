"""Discrete-event simulation of honest and selfish miners on a plane.

Every node keeps its own :class:`BlockTree`.  Honest blocks are sent by their
miner directly to every other node.  The pool is one logical miner: its
members share a secret extension and a single view of the public tree, and
every member relays a released pool block (see :meth:`Simulation.publish`).

Arrivals of one transmission are stored as a cursor over its destinations in
time order, so the event heap holds one entry per in-flight transmission
rather than one per (block, destination) pair.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from forkdyn.errors import ValidationError
from forkdyn.sim.blocktree import GENESIS, AttachKind, BlockLedger, BlockTree
from forkdyn.sim.config import DELAY_FLOOR, SimConfig
from forkdyn.sim.trace import EventRecord, RaceEpisode, RawTrace

MINE, TRANSMISSION, POOL_RECEIVE = 0, 1, 2
POOL_NODE = -1


@dataclass
class PoolState:
    secret_extension: List[int] = field(default_factory=list)
    race: bool = False
    n_s: int = 0
    n_p: int = 0
    # block the pool mines on
    target: int = GENESIS

    @property
    def lead(self) -> int:
        return self.n_s - self.n_p


class EventQueue:
    """Heap ordered by ``(time, sequence number)``."""

    __slots__ = ("heap", "seq")

    def __init__(self):
        self.heap: list = []
        self.seq = 0

    def push(self, time: float, kind: int, payload) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, self.seq, kind, payload))

    def pop(self):
        return heapq.heappop(self.heap)

    def peek_time(self) -> float:
        return self.heap[0][0] if self.heap else float("inf")

    def __len__(self) -> int:
        return len(self.heap)


class Simulation:
    """State of one replication; build with :func:`init_sim`, advance with :meth:`run`."""

    def __init__(self, config: SimConfig, replication: int = 0, record_events: bool = False):
        if not isinstance(config, SimConfig):
            raise ValidationError("config must be a SimConfig")
        if replication < 0:
            raise ValidationError("replication index must be nonnegative")
        self.config = config
        self.replication = replication
        n = config.n_nodes
        seeds = np.random.SeedSequence([config.seed, replication]).spawn(4)
        place_rng, member_rng = (np.random.default_rng(s) for s in seeds[:2])
        self.mine_rng = np.random.default_rng(seeds[2])
        self.delay_rng = np.random.default_rng(seeds[3])

        self.positions = place_rng.uniform(0.0, config.area_side, size=(n, 2))
        members = np.sort(member_rng.permutation(n)[: config.n_pool])
        self.is_pool = np.zeros(n, dtype=bool)
        self.is_pool[members] = True
        self.pool_members = members
        self.honest_nodes = np.flatnonzero(~self.is_pool)
        self.slope = config.delay_slope
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        self.mean_delay = self.slope * np.hypot(diff[..., 0], diff[..., 1])
        self._pool_to_honest = self.mean_delay[np.ix_(members, self.honest_nodes)]

        self.ledger = BlockLedger()
        self.pool_tree: Optional[BlockTree] = BlockTree(self.ledger) if members.size else None
        self.trees: List[Optional[BlockTree]] = [None] * n
        for j in self.honest_nodes:
            self.trees[j] = BlockTree(self.ledger)
        self.views: List[BlockTree] = [self.trees[j] for j in self.honest_nodes]
        if self.pool_tree is not None:
            self.views.append(self.pool_tree)
        self.pool = PoolState()

        self.queue = EventQueue()
        self.now = 0.0
        self.mining_clock = 0.0
        self.mined = 0
        # synchronisation inspector: number of views per tip, views with a split top
        self._tip_count: Dict[int, int] = {GENESIS: len(self.views)}
        self._n_unclean = 0
        self.synchronised = True
        self.sync_transitions: List[Tuple[float, bool]] = []
        # arrival times kept until the pool has reacted to an honest block
        self._pool_receipts: Dict[int, np.ndarray] = {}
        self._honest_arrivals: Dict[int, np.ndarray] = {}
        self.races: List[RaceEpisode] = []
        self._open_races: Dict[int, RaceEpisode] = {}
        self.events: Optional[List[EventRecord]] = [] if record_events else None
        self._schedule_next_mine()

    # ------------------------------------------------------------------ sampling

    def sample_mining_event(self) -> Tuple[float, int]:
        """Advance the mining clock and draw the next ``(time, node)``."""
        self.mining_clock += float(self.mine_rng.exponential(self.config.mean_block_interval))
        node = int(self.mine_rng.integers(self.config.n_nodes))
        return self.mining_clock, node

    def sample_delay(self, source: int, dest: int) -> float:
        if source == dest:
            raise ValidationError("source and destination must differ")
        return float(self._perturb(np.array([self.mean_delay[source, dest]]))[0])

    def _perturb(self, means: np.ndarray) -> np.ndarray:
        if self.slope == 0.0:
            return np.zeros_like(means)
        cv = self.config.cv
        if cv > 0.0:
            means = means * (1.0 + cv * self.delay_rng.standard_normal(means.shape))
        return np.maximum(means, DELAY_FLOOR)

    def _schedule_next_mine(self) -> None:
        if self.mined < self.config.n_blocks:
            time, node = self.sample_mining_event()
            self.queue.push(time, MINE, node)

    # ------------------------------------------------------------------ bookkeeping

    def _log(self, kind: str, node: int, block: int) -> None:
        parent = self.ledger.parent[block] if block >= 0 else -1
        self.events.append(EventRecord(self.now, kind, node, block, parent))

    def _deliver(self, tree: BlockTree, block: int, node: int) -> list:
        old_tip = tree.tip
        old_clean = tree.at_tip_height == 1
        outcomes = tree.attach(block)
        if self.events is not None:
            for o in outcomes:
                self._log(o.kind.name.lower(), node, o.block)
        new_tip = tree.tip
        if new_tip != old_tip:
            counts = self._tip_count
            left = counts[old_tip] - 1
            if left:
                counts[old_tip] = left
            else:
                del counts[old_tip]
            counts[new_tip] = counts.get(new_tip, 0) + 1
        new_clean = tree.at_tip_height == 1
        if new_clean != old_clean:
            self._n_unclean += -1 if new_clean else 1
        synced = self._n_unclean == 0 and len(self._tip_count) == 1
        if synced != self.synchronised:
            self.synchronised = synced
            self.sync_transitions.append((self.now, synced))
            if self.events is not None:
                self._log("sync" if synced else "unsync", POOL_NODE, -1)
        return outcomes

    def _resolve_races(self, block: int) -> None:
        episode = self._open_races.get(self.ledger.parent[block])
        if episode is not None:
            episode.next_parent = self.ledger.parent[block]
            del self._open_races[episode.pool_block]
            del self._open_races[episode.honest_block]

    # ------------------------------------------------------------------ transmission

    def _push_transmission(self, block: int, arrivals: np.ndarray, dests: np.ndarray) -> None:
        order = np.argsort(arrivals, kind="stable")
        times = arrivals[order].tolist()
        if times:
            self.queue.push(times[0], TRANSMISSION, [times, dests[order].tolist(), block, 0])

    def _broadcast_honest(self, block: int, miner: int) -> None:
        delays = self._perturb(self.mean_delay[miner])
        arrivals = self.now + delays
        honest = self.honest_nodes
        keep = honest != miner
        self._push_transmission(block, arrivals[honest][keep], honest[keep])
        if self.pool_tree is not None:
            receipts = arrivals[self.pool_members]
            self._pool_receipts[block] = receipts
            self._honest_arrivals[block] = arrivals[honest]
            self.queue.push(float(receipts.min()), POOL_RECEIVE, block)

    def publish(self, blocks: List[int], release: Union[float, np.ndarray]) -> Optional[np.ndarray]:
        """Release pool blocks; return honest-node arrival times of the last one.

        ``release`` holds, per pool member, the time at which that member starts
        relaying (a scalar means all members at once).  Each honest node
        receives the earliest of the relayed copies.
        """
        arrivals = None
        release = np.broadcast_to(np.asarray(release, dtype=float), (self.pool_members.size,))
        for block in blocks:
            self.ledger.published_at[block] = self.now
            if self.events is not None:
                self._log("publish", POOL_NODE, block)
            self._deliver(self.pool_tree, block, POOL_NODE)
            if self.ledger.height[block] > self.pool.n_p:
                self.pool.n_p = self.ledger.height[block]
            delays = self._perturb(self._pool_to_honest)
            arrivals = (release[:, None] + delays).min(axis=0)
            self._push_transmission(block, arrivals, self.honest_nodes)
        return arrivals

    # ------------------------------------------------------------------ handlers

    def honest_on_event(self, node: int, block: Optional[int] = None) -> None:
        """Local mine when ``block`` is None, otherwise the arrival of ``block``."""
        tree = self.trees[node]
        if block is not None:
            self._deliver(tree, block, node)
            return
        bid = self.ledger.new_block(tree.tip, node, self.now, False)
        if self.events is not None:
            self._log("mine", node, bid)
        self._resolve_races(bid)
        self._deliver(tree, bid, node)
        self._broadcast_honest(bid, node)

    def pool_on_secret_mine(self, node: int) -> int:
        pool = self.pool
        bid = self.ledger.new_block(pool.target, node, self.now, True)
        if self.events is not None:
            self._log("mine", node, bid)
        self._resolve_races(bid)
        pool.secret_extension.append(bid)
        pool.n_s = self.ledger.height[bid]
        pool.target = bid
        if pool.race:
            self.publish(pool.secret_extension, self.now)
            pool.secret_extension.clear()
            pool.race = False
        elif len(pool.secret_extension) > self.config.runaway_cap:
            self.publish([pool.secret_extension.pop(0)], self.now)
        return bid

    def pool_on_public_block(self, block: int) -> None:
        """React to an honest block that raised the pool's public height."""
        pool = self.pool
        pool.n_p = self.ledger.height[block]
        receipts = self._pool_receipts[block]
        release = np.maximum(receipts, self.now)
        lead = pool.lead
        ext = pool.secret_extension
        if lead < 0:
            ext.clear()
            pool.race = False
            pool.target = block
            pool.n_s = pool.n_p
        elif lead == 0:
            if ext:
                pool_block = ext[-1]
                arr_p = self.publish(ext, release)
                ext.clear()
                pool.race = True
                self._open_race(pool_block, block, arr_p)
        elif lead == 1:
            self.publish(ext, release)
            ext.clear()
        else:
            self.publish([ext.pop(0)], release)

    def _open_race(self, pool_block: int, honest_block: int, arr_p: np.ndarray) -> None:
        arr_h = self._honest_arrivals[honest_block]
        others = self.honest_nodes != self.ledger.miner[honest_block]
        if others.any():
            fraction = float(np.mean(arr_p[others] < arr_h[others]))
        else:
            fraction = float("nan")
        episode = RaceEpisode(pool_block, honest_block, self.now, fraction)
        self.races.append(episode)
        self._open_races[pool_block] = episode
        self._open_races[honest_block] = episode

    def _pool_receive(self, block: int) -> None:
        outcomes = self._deliver(self.pool_tree, block, POOL_NODE)
        ledger = self.ledger
        for o in outcomes:
            b = o.block
            if o.kind in (AttachKind.DUPLICATE, AttachKind.DETACHED) or ledger.pool_origin[b]:
                continue
            # n_p tracks the highest public block, the pool's own releases included
            if ledger.height[b] > self.pool.n_p:
                self.pool_on_public_block(b)
        for o in outcomes:
            if o.kind != AttachKind.DETACHED:
                self._pool_receipts.pop(o.block, None)
                self._honest_arrivals.pop(o.block, None)

    # ------------------------------------------------------------------ main loop

    def run(self) -> RawTrace:
        queue = self.queue
        heap = queue.heap
        trees = self.trees
        deliver = self._deliver
        tip_count = self._tip_count
        logging = self.events is not None
        while heap:
            time, _, kind, payload = heapq.heappop(heap)
            self.now = time
            if kind == TRANSMISSION:
                times, dests, block, i = payload
                last = len(times)
                parent = self.ledger.parent[block]
                height = self.ledger.height[block]
                while True:
                    tree = trees[dests[i]]
                    if tree.tip == parent and not tree.detached and not logging:
                        # common case, inlined: the block extends the receiver's main tip
                        tree.known.add(block)
                        tree.tip = block
                        tree.tip_height = height
                        if tree.at_tip_height != 1:
                            tree.at_tip_height = 1
                            self._n_unclean -= 1
                        left = tip_count[parent] - 1
                        if left:
                            tip_count[parent] = left
                        else:
                            del tip_count[parent]
                        tip_count[block] = tip_count.get(block, 0) + 1
                        synced = self._n_unclean == 0 and len(tip_count) == 1
                        if synced != self.synchronised:
                            self.synchronised = synced
                            self.sync_transitions.append((self.now, synced))
                    else:
                        deliver(tree, block, dests[i])
                    i += 1
                    if i == last:
                        break
                    nxt = times[i]
                    if heap and heap[0][0] <= nxt:
                        payload[3] = i
                        queue.push(nxt, TRANSMISSION, payload)
                        break
                    self.now = nxt
            elif kind == MINE:
                self.mined += 1
                if self.is_pool[payload]:
                    self.pool_on_secret_mine(payload)
                else:
                    self.honest_on_event(payload)
                self._schedule_next_mine()
            else:
                self._pool_receive(payload)
        return self._finish()

    def _finish(self) -> RawTrace:
        ledger = self.ledger
        best = max(self.views, key=lambda t: (t.tip_height, -t.tip)).tip
        tips = [t.tip for t in self.views]
        n = self.config.n_nodes
        splits = np.zeros(n, dtype=np.int64)
        for j in self.honest_nodes:
            splits[j] = self.trees[j].splits
        if self.pool_tree is not None:
            splits[self.pool_members] = self.pool_tree.splits
        return RawTrace(
            config=self.config,
            replication=self.replication,
            pool_members=tuple(int(m) for m in self.pool_members),
            parent=np.asarray(ledger.parent, dtype=np.int64),
            height=np.asarray(ledger.height, dtype=np.int64),
            miner=np.asarray(ledger.miner, dtype=np.int64),
            pool_origin=np.asarray(ledger.pool_origin, dtype=bool),
            mined_at=np.asarray(ledger.mined_at, dtype=float),
            published_at=np.array(
                [np.nan if p is None else p for p in ledger.published_at], dtype=float
            ),
            main_chain=np.asarray(ledger.chain_to(best), dtype=np.int64),
            view_tips=tuple(tips),
            splits_per_node=splits,
            sync_transitions=tuple(self.sync_transitions),
            races=tuple(self.races),
            end_time=self.now,
            unpublished=tuple(self.pool.secret_extension),
            events=None if self.events is None else tuple(self.events),
        )


def init_sim(config: SimConfig, replication: int = 0, record_events: bool = False) -> Simulation:
    return Simulation(config, replication, record_events)


def run(config: SimConfig, replication: int = 0, record_events: bool = False) -> RawTrace:
    """Simulate ``config.n_blocks`` mining events and drain all transmissions."""
    return Simulation(config, replication, record_events).run()
