"""Named experiments reproducing the published tables and figures.

Every preset fixes all of its parameters and its seed.  Figure presets have a
desk-scale ``-small`` twin (200 nodes, 2000 blocks, 4 replications, coarser
sweep grids).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from forkdyn.sim import SimConfig

MARKOV_RATES = {"lambda1": 0.6, "lambda2": 5.4, "mu": 285.0}
GAMMA_D12 = (1.0, 4.0, 8.0, 12.0)
GAMMA_NU = (0.4, 0.8, 1.2, 1.6)

DEFAULT_SIM_SEED = 2015
HONEST_CV = 0.1
SELFISH_CV = 0.001
SELFISH_DELAY = 10.0

DELAY_GRID = (0.001, 0.01, 0.1, 1.0, 3.16, 10.0, 31.6, 100.0)
ALPHA_GRID = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
CV_GRID = (0.0, 0.001, 0.01, 0.1)
NODE_GRID = tuple(range(100, 1001, 100))

SMALL_DELAY_GRID = (1.0, 10.0, 100.0)
SMALL_ALPHA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5)
SMALL_CV_GRID = (0.0, 0.001)
SMALL_NODE_GRID = (100, 200)


@dataclass(frozen=True)
class MarkovPreset:
    name: str
    variant: str
    lambda1: float = MARKOV_RATES["lambda1"]
    lambda2: float = MARKOV_RATES["lambda2"]
    mu: float = MARKOV_RATES["mu"]
    truncation: int = 6
    grid: int = 4
    kind: str = "markov"


@dataclass(frozen=True)
class GammaPreset:
    name: str
    mode: str
    d12: Tuple[float, ...] = GAMMA_D12
    nu: Tuple[float, ...] = GAMMA_NU
    k_slope: float = 50.0
    sigma: float = 1.0
    kind: str = "gamma"


@dataclass(frozen=True)
class SweepPoint:
    """One simulated configuration and the sweep coordinates it is reported under."""

    coords: Tuple[Tuple[str, float], ...]
    config: SimConfig


@dataclass(frozen=True)
class SimPreset:
    name: str
    description: str
    base: SimConfig
    n_reps: int
    # SimConfig field -> values; the sweep is the product in the given order
    axes: Tuple[Tuple[str, Tuple[float, ...]], ...]
    metrics: Tuple[str, ...]
    kind: str = "simulate"
    extra_columns: Tuple[str, ...] = field(default=())

    @property
    def seed(self) -> int:
        return self.base.seed

    def points(self, seed: Optional[int] = None) -> List[SweepPoint]:
        base = self.base if seed is None else self.base.with_(seed=seed)
        grids: List[List[Tuple[Tuple[str, float], ...]]] = [[()]]
        for name, values in self.axes:
            grids.append([g + ((name, v),) for g in grids[-1] for v in values])
        out = []
        for coords in grids[-1]:
            changes = {k: (int(v) if k == "n_nodes" else v) for k, v in coords}
            out.append(SweepPoint(coords, base.with_(**changes)))
        return out


def _sim(
    name: str,
    description: str,
    axes,
    metrics,
    small: bool,
    extra_columns=(),
    **base,
) -> SimPreset:
    if small:
        base.update(n_nodes=200, n_blocks=2000)
        reps = 4
    else:
        base.update(n_nodes=1000, n_blocks=10_000)
        reps = 12
    cfg = SimConfig(seed=DEFAULT_SIM_SEED, **base)
    return SimPreset(
        name + ("-small" if small else ""),
        description,
        cfg,
        reps,
        tuple(axes),
        tuple(metrics),
        extra_columns=tuple(extra_columns),
    )


def _figure_presets(small: bool) -> List[SimPreset]:
    delays = SMALL_DELAY_GRID if small else DELAY_GRID
    alphas = SMALL_ALPHA_GRID if small else ALPHA_GRID
    cvs = SMALL_CV_GRID if small else CV_GRID
    nodes = SMALL_NODE_GRID if small else NODE_GRID
    selfish = dict(mean_delay_target=SELFISH_DELAY, cv=SELFISH_CV)
    alpha_with_zero = (0.0,) + alphas
    return [
        _sim(
            "fig5",
            "honest mining: splits per 24 hours against mean delay",
            [("mean_delay_target", delays)],
            ["splits_per_day"],
            small,
            cv=HONEST_CV,
        ),
        _sim(
            "fig6",
            "honest mining: mean dwell time against mean delay",
            [("mean_delay_target", delays)],
            ["mean_dwell_s"],
            small,
            cv=HONEST_CV,
        ),
        _sim(
            "fig7",
            "selfish mining: measured gamma against pool fraction for several CV",
            [("cv", cvs), ("pool_fraction", alphas)],
            ["gamma_hat"],
            small,
            mean_delay_target=SELFISH_DELAY,
        ),
        _sim(
            "fig8",
            "selfish mining: measured Gamma against pool fraction, with alpha + (1 - alpha) gamma",
            [("cv", cvs), ("pool_fraction", alphas)],
            ["big_gamma_hat", "gamma_hat"],
            small,
            extra_columns=["big_gamma_theory"],
            mean_delay_target=SELFISH_DELAY,
        ),
        _sim(
            "fig9",
            "selfish mining: relative pool revenue against network size and pool fraction",
            [("n_nodes", nodes), ("pool_fraction", alphas)],
            ["relative_pool_revenue"],
            small,
            **selfish,
        ),
        _sim(
            "fig10",
            "selfish mining: splits per 24 hours against pool fraction",
            [("pool_fraction", alpha_with_zero)],
            ["splits_per_day"],
            small,
            **selfish,
        ),
        _sim(
            "fig11",
            "selfish mining: confirmed revenue per miner per hour",
            [("pool_fraction", alpha_with_zero)],
            ["pool_revenue_per_miner_hour", "honest_revenue_per_miner_hour"],
            small,
            **selfish,
        ),
        _sim(
            "fig12",
            "selfish mining: relative pool revenue R and 1 - R against pool fraction",
            [("pool_fraction", alpha_with_zero)],
            ["relative_pool_revenue"],
            small,
            extra_columns=["honest_share", "fair_share"],
            **selfish,
        ),
        _sim(
            "fig13",
            "selfish mining: main-branch blocks per hour by pool, honest miners and in total",
            [("pool_fraction", alpha_with_zero)],
            ["pool_blocks_per_hour", "honest_blocks_per_hour", "total_blocks_per_hour"],
            small,
            **selfish,
        ),
    ]


def _build() -> Dict[str, object]:
    presets: Dict[str, object] = {
        "table1": MarkovPreset("table1", "honest"),
        "table2": MarkovPreset("table2", "selfish"),
        "table3": GammaPreset("table3", "nearest"),
        "table4": GammaPreset("table4", "all"),
    }
    for small in (False, True):
        for p in _figure_presets(small):
            presets[p.name] = p
    return presets


PRESETS = _build()


def get_preset(name: str):
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
