"""Event-driven network simulator."""

from forkdyn.sim.blocktree import (
    GENESIS,
    AttachKind,
    AttachOutcome,
    Block,
    BlockLedger,
    BlockTree,
    MalformedBlockError,
    attach_block,
    check_tree,
)
from forkdyn.sim.config import MEAN_PAIR_DISTANCE_UNIT_SQUARE, SimConfig
from forkdyn.sim.engine import EventQueue, PoolState, Simulation, init_sim, run
from forkdyn.sim.trace import (
    EventRecord,
    RaceEpisode,
    RawTrace,
    read_event_log,
    write_event_log,
)

__all__ = [
    "GENESIS",
    "AttachKind",
    "AttachOutcome",
    "Block",
    "BlockLedger",
    "BlockTree",
    "MalformedBlockError",
    "attach_block",
    "check_tree",
    "MEAN_PAIR_DISTANCE_UNIT_SQUARE",
    "SimConfig",
    "EventQueue",
    "PoolState",
    "Simulation",
    "init_sim",
    "run",
    "EventRecord",
    "RaceEpisode",
    "RawTrace",
    "read_event_log",
    "write_event_log",
]
