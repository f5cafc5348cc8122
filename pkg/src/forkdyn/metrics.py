"""Per-trace performance measures, replication with confidence intervals, power-law fits."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from forkdyn.errors import DegenerateInputError, ReplicationError, ValidationError
from forkdyn.sim import SimConfig, run
from forkdyn.sim.trace import RawTrace

BLOCK_REWARD = 25.0
THREADS_ENV = "FORKDYN_THREADS"


@dataclass(frozen=True)
class BlockRates:
    """Main-branch blocks per simulated hour, by miner class."""

    pool: float
    honest: float
    total: float


@dataclass(frozen=True)
class MinerRevenue:
    """Main-branch reward per miner per simulated hour; ``pool`` is None without a pool."""

    pool: Optional[float]
    honest: float


@dataclass(frozen=True)
class MetricsReport:
    splits_per_day: float
    mean_dwell_s: float
    gamma_hat: Optional[float]
    big_gamma_hat: Optional[float]
    relative_pool_revenue: float
    blocks_per_hour: BlockRates
    revenue_per_miner_hour: MinerRevenue
    n_races: int
    n_dwell_intervals: int = 0

    @property
    def insufficient_data(self) -> bool:
        """True when no race occurred, so the race measures are absent."""
        return self.n_races == 0

    def as_row(self) -> Dict[str, float]:
        """Flat mapping of every scalar measure; absent values become NaN."""

        def val(x):
            return float("nan") if x is None else float(x)

        return {
            "splits_per_day": self.splits_per_day,
            "mean_dwell_s": self.mean_dwell_s,
            "gamma_hat": val(self.gamma_hat),
            "big_gamma_hat": val(self.big_gamma_hat),
            "relative_pool_revenue": self.relative_pool_revenue,
            "pool_blocks_per_hour": self.blocks_per_hour.pool,
            "honest_blocks_per_hour": self.blocks_per_hour.honest,
            "total_blocks_per_hour": self.blocks_per_hour.total,
            "pool_revenue_per_miner_hour": val(self.revenue_per_miner_hour.pool),
            "honest_revenue_per_miner_hour": self.revenue_per_miner_hour.honest,
            "n_races": float(self.n_races),
        }


METRIC_NAMES: Tuple[str, ...] = (
    "splits_per_day",
    "mean_dwell_s",
    "gamma_hat",
    "big_gamma_hat",
    "relative_pool_revenue",
    "pool_blocks_per_hour",
    "honest_blocks_per_hour",
    "total_blocks_per_hour",
    "pool_revenue_per_miner_hour",
    "honest_revenue_per_miner_hour",
    "n_races",
)


def dwell_intervals(transitions: Sequence[Tuple[float, bool]]) -> List[float]:
    """Lengths of the closed intervals during which the network was not synchronised."""
    out = []
    lost = None
    for time, synced in transitions:
        if not synced:
            lost = time
        elif lost is not None:
            out.append(time - lost)
            lost = None
    return out


def summarize(trace: RawTrace, config: Optional[SimConfig] = None) -> MetricsReport:
    """Compute every :class:`MetricsReport` field from a finished trace.

    Rates use the nominal duration ``n_blocks / block_rate`` hours.
    """
    config = trace.config if config is None else config
    hours = config.nominal_hours
    splits = float(np.mean(trace.splits_per_node)) / (hours / 24.0)
    dwell = dwell_intervals(trace.sync_transitions)
    mean_dwell = float(np.mean(dwell)) if dwell else 0.0

    main = trace.main_chain[1:]
    n_pool_main = int(np.count_nonzero(trace.pool_origin[main]))
    n_honest_main = main.size - n_pool_main
    rates = BlockRates(n_pool_main / hours, n_honest_main / hours, main.size / hours)
    r = n_pool_main / main.size if main.size else 0.0

    n_pool = len(trace.pool_members)
    n_honest = config.n_nodes - n_pool
    revenue = MinerRevenue(
        BLOCK_REWARD * n_pool_main / n_pool / hours if n_pool else None,
        BLOCK_REWARD * n_honest_main / n_honest / hours,
    )

    fractions = [e.honest_fraction_on_pool for e in trace.races if not math.isnan(e.honest_fraction_on_pool)]
    gamma_hat = float(np.mean(fractions)) if fractions else None
    resolved = [e.pool_won_next for e in trace.races if e.resolved]
    big_gamma = float(np.mean(resolved)) if resolved else None
    return MetricsReport(
        splits_per_day=splits,
        mean_dwell_s=mean_dwell,
        gamma_hat=gamma_hat,
        big_gamma_hat=big_gamma,
        relative_pool_revenue=r,
        blocks_per_hour=rates,
        revenue_per_miner_hour=revenue,
        n_races=len(trace.races),
        n_dwell_intervals=len(dwell),
    )


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    half_width: float
    n_reps: int


def t_multiplier(n: int, level: float = 0.95) -> float:
    """Two-sided Student-t quantile for ``n`` observations."""
    if n < 2:
        raise ValidationError("a confidence interval needs at least two observations")
    from scipy import stats  # deferred: scipy.stats is slow to import

    return float(stats.t.ppf(0.5 + level / 2.0, n - 1))


def mean_ci(values: Sequence[float], level: float = 0.95) -> MetricSummary:
    """Mean and Student-t half-width over the finite entries of ``values``."""
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    n = x.size
    if n == 0:
        return MetricSummary(float("nan"), float("nan"), 0)
    if n == 1:
        return MetricSummary(float(x[0]), float("nan"), 1)
    sd = float(np.std(x, ddof=1))
    return MetricSummary(float(x.mean()), t_multiplier(n, level) * sd / math.sqrt(n), n)


@dataclass
class ReplicatedSummary:
    config: SimConfig
    n_reps: int
    reports: List[MetricsReport]
    stats: Dict[str, MetricSummary] = field(default_factory=dict)

    def __getitem__(self, name: str) -> MetricSummary:
        return self.stats[name]

    def mean(self, name: str) -> float:
        return self.stats[name].mean

    def half_width(self, name: str) -> float:
        return self.stats[name].half_width


def _replicate_one(args: Tuple[SimConfig, int]) -> MetricsReport:
    config, rep = args
    return summarize(run(config, rep), config)


def thread_count(requested: Optional[int] = None) -> int:
    """Worker processes to use: ``requested`` or ``$FORKDYN_THREADS``, default 1."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            requested = int(raw)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if requested < 1:
        raise ValidationError("thread count must be at least 1")
    return requested


def replicate(config: SimConfig, n_reps: int, threads: Optional[int] = None) -> ReplicatedSummary:
    """Run ``n_reps`` independent replications and attach 95% Student-t intervals.

    Replication ``i`` draws its random streams from ``(config.seed, i)``, so the
    result does not depend on the number of worker processes.
    """
    if n_reps < 2:
        raise ValidationError(f"n_reps must be at least 2, got {n_reps}")
    workers = min(thread_count(threads), n_reps)
    jobs = [(config, i) for i in range(n_reps)]
    reports: List[MetricsReport] = []
    if workers == 1:
        for i, job in enumerate(jobs):
            try:
                reports.append(_replicate_one(job))
            except Exception as exc:
                raise ReplicationError(i, exc) from exc
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_replicate_one, job) for job in jobs]
            for i, fut in enumerate(futures):
                try:
                    reports.append(fut.result())
                except Exception as exc:
                    raise ReplicationError(i, exc) from exc
    return summarize_reports(config, reports)


def summarize_reports(config: SimConfig, reports: Sequence[MetricsReport]) -> ReplicatedSummary:
    """Attach per-metric means and 95% intervals to a list of replication reports."""
    rows = [r.as_row() for r in reports]
    summary = {name: mean_ci([row[name] for row in rows]) for name in METRIC_NAMES}
    return ReplicatedSummary(config, len(reports), list(reports), summary)


@dataclass(frozen=True)
class PowerLawFit:
    """``rate = coefficient * delay ** exponent`` fitted by least squares in log-log space."""

    coefficient: float
    exponent: float
    r_squared: float
    exponent_stderr: float
    residuals: Tuple[float, ...]

    def __iter__(self):
        yield self.coefficient
        yield self.exponent

    def predict(self, t):
        return self.coefficient * np.asarray(t, dtype=float) ** self.exponent

    def to_dict(self) -> dict:
        return asdict(self)


def loglog_fit(points: Sequence[Tuple[float, float]]) -> PowerLawFit:
    """Ordinary least squares of ``log rate`` on ``log delay``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DegenerateInputError("need at least three (delay, rate) points")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise DegenerateInputError("delays and rates must be positive and finite")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(x) == 0:
        raise DegenerateInputError("delays must not all be equal")
    design = np.column_stack([np.ones_like(x), x])
    (intercept, slope), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (intercept + slope * x)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    n = x.size
    slope_se = math.sqrt(ss_res / (n - 2) / float(((x - x.mean()) ** 2).sum())) if n > 2 else float("nan")
    return PowerLawFit(
        coefficient=float(math.exp(intercept)),
        exponent=float(slope),
        r_squared=1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0,
        exponent_stderr=slope_se,
        residuals=tuple(float(v) for v in resid),
    )
