"""Markov fork model, lattice-path weights and closed-form attack formulas."""

from forkdyn.chain_model.attack import (
    AttackParams,
    attacker_success_monte_carlo,
    attacker_success_probability,
    selfish_threshold,
)
from forkdyn.chain_model.markov import (
    ChainRates,
    ForkState,
    Generator,
    StationaryDistribution,
    build_generator,
    closed_form_distribution,
    closed_form_pi,
    orphan_rate,
    solve_stationary,
    stationary_residual,
    truncated_states,
)
from forkdyn.chain_model.paths import (
    count_lattice_paths,
    grand_dyck_count,
    path_count,
    welsh_count,
)

__all__ = [
    "AttackParams",
    "ChainRates",
    "ForkState",
    "Generator",
    "StationaryDistribution",
    "attacker_success_monte_carlo",
    "attacker_success_probability",
    "build_generator",
    "closed_form_distribution",
    "closed_form_pi",
    "count_lattice_paths",
    "grand_dyck_count",
    "orphan_rate",
    "path_count",
    "selfish_threshold",
    "solve_stationary",
    "stationary_residual",
    "truncated_states",
    "welsh_count",
]
