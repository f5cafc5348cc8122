from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from forkdyn.errors import ValidationError

#: Mean distance between two independent uniform points in the unit square,
#: ``(2 + sqrt(2) + 5 asinh(1)) / 15``.
MEAN_PAIR_DISTANCE_UNIT_SQUARE = (2.0 + math.sqrt(2.0) + 5.0 * math.asinh(1.0)) / 15.0

#: Smallest delay used for a nonzero-delay network, seconds.
DELAY_FLOOR = 1e-6


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulated network.

    Times are in seconds except ``block_rate`` (blocks per hour).
    ``pool_fraction`` is the share of nodes (and hence of hash power) that
    follow the selfish-mine strategy.
    """

    n_nodes: int = 1000
    pool_fraction: float = 0.0
    area_side: float = 1000.0
    block_rate: float = 6.0
    n_blocks: int = 10_000
    mean_delay_target: float = 10.0
    cv: float = 0.0
    seed: int = 0
    runaway_cap: int = 5

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValidationError(f"n_nodes must be at least 2, got {self.n_nodes}")
        if not 0.0 <= self.pool_fraction <= 0.5:
            raise ValidationError(f"pool_fraction must lie in [0, 0.5], got {self.pool_fraction}")
        if not self.area_side > 0:
            raise ValidationError("area_side must be positive")
        if not self.block_rate > 0:
            raise ValidationError("block_rate must be positive")
        if self.n_blocks < 1:
            raise ValidationError("n_blocks must be positive")
        if not (self.mean_delay_target >= 0 and math.isfinite(self.mean_delay_target)):
            raise ValidationError("mean_delay_target must be a nonnegative number")
        if not (self.cv >= 0 and math.isfinite(self.cv)):
            raise ValidationError("cv must be a nonnegative number")
        if self.runaway_cap < 1:
            raise ValidationError("runaway_cap must be at least 1")

    @property
    def n_pool(self) -> int:
        # tolerate representation error such as 0.29 * 100 = 28.999...
        return int(math.floor(self.pool_fraction * self.n_nodes + 1e-9))

    @property
    def delay_slope(self) -> float:
        """Seconds of mean delay per unit of distance."""
        return self.mean_delay_target / (MEAN_PAIR_DISTANCE_UNIT_SQUARE * self.area_side)

    @property
    def mean_block_interval(self) -> float:
        return 3600.0 / self.block_rate

    @property
    def nominal_hours(self) -> float:
        return self.n_blocks / self.block_rate

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)
