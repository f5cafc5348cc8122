"""Simulation output and its line-oriented event log.

Event log format (UTF-8 text, one record per line)::

    # forkdyn-events 1
    <time> <type> <node> <block> <parent>

``time`` is written with ``repr`` so it round-trips exactly.  ``type`` is one
of ``mine``, ``publish``, ``sync``, ``unsync`` or an attach outcome
(``duplicate``, ``extended_main``, ``side_branch``, ``reorg``,
``detached``).  ``node`` is -1 for the pool's shared view and for global
records; ``block`` and ``parent`` are -1 where they do not apply.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from forkdyn.sim.config import SimConfig

LOG_HEADER = "# forkdyn-events 1"

EVENT_TYPES = frozenset(
    {
        "mine",
        "publish",
        "sync",
        "unsync",
        "duplicate",
        "extended_main",
        "side_branch",
        "reorg",
        "detached",
    }
)


class EventRecord(NamedTuple):
    time: float
    type: str
    node: int
    block: int
    parent: int


@dataclass
class RaceEpisode:
    """A race opened when the pool released ``pool_block`` against ``honest_block``."""

    pool_block: int
    honest_block: int
    opened_at: float
    # share of honest nodes, other than the honest block's miner, that got the pool block first
    honest_fraction_on_pool: float
    # parent of the first block later mined on either competitor
    next_parent: Optional[int] = None

    @property
    def resolved(self) -> bool:
        return self.next_parent is not None

    @property
    def pool_won_next(self) -> Optional[bool]:
        if self.next_parent is None:
            return None
        return self.next_parent == self.pool_block


@dataclass(frozen=True, eq=False)
class RawTrace:
    config: SimConfig
    replication: int
    pool_members: Tuple[int, ...]
    # block table indexed by block id, genesis at 0
    parent: np.ndarray
    height: np.ndarray
    miner: np.ndarray
    pool_origin: np.ndarray
    mined_at: np.ndarray
    # NaN for pool blocks never released
    published_at: np.ndarray
    # final global main branch from genesis
    main_chain: np.ndarray
    view_tips: Tuple[int, ...]
    splits_per_node: np.ndarray
    # (time, synchronised) at every change of the global inspector
    sync_transitions: Tuple[Tuple[float, bool], ...]
    races: Tuple[RaceEpisode, ...]
    end_time: float
    unpublished: Tuple[int, ...]
    events: Optional[Tuple[EventRecord, ...]] = None

    @property
    def n_mined(self) -> int:
        return len(self.parent) - 1

    def orphans(self) -> np.ndarray:
        """Published blocks that are off the final main branch."""
        on_main = np.zeros(len(self.parent), dtype=bool)
        on_main[self.main_chain] = True
        published = ~np.isnan(self.published_at)
        return np.flatnonzero(~on_main & published)

    def fingerprint(self) -> str:
        """Stable hex digest of every recorded array and episode."""
        h = hashlib.sha256()
        for arr in (
            self.parent,
            self.height,
            self.miner,
            self.pool_origin,
            self.mined_at,
            self.published_at,
            self.main_chain,
            self.splits_per_node,
        ):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr(self.sync_transitions).encode())
        h.update(repr([(r.pool_block, r.honest_block, r.opened_at, r.honest_fraction_on_pool,
                        r.next_parent) for r in self.races]).encode())
        h.update(repr((self.view_tips, self.end_time, self.unpublished)).encode())
        if self.events is not None:
            h.update("".join(format_events(self.events)).encode())
        return h.hexdigest()


def format_events(events: Iterable[EventRecord]) -> Iterator[str]:
    for e in events:
        yield f"{e.time!r} {e.type} {e.node} {e.block} {e.parent}\n"


def write_event_log(events: Iterable[EventRecord], path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(LOG_HEADER + "\n")
        fh.writelines(format_events(events))


def read_event_log(path: Union[str, os.PathLike]) -> List[EventRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != LOG_HEADER:
            raise ValueError(f"{path}: not an event log (header {first!r})")
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if len(parts) != 5 or parts[1] not in EVENT_TYPES:
                raise ValueError(f"{path}:{lineno}: malformed record {line!r}")
            records.append(
                EventRecord(float(parts[0]), parts[1], int(parts[2]), int(parts[3]), int(parts[4]))
            )
    return records
