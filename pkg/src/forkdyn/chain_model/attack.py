"""Double-spend catch-up probability and the selfish-mining profitability bound."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np

from forkdyn.errors import DomainError, ValidationError


@dataclass(frozen=True)
class AttackParams:
    """Confirmation depth ``z`` and honest success probability ``p``.

    ``p`` is the probability that the next block is found by the community,
    ``lambda2 / (lambda1 + lambda2)``.  Use :meth:`from_rates` to derive it.
    """

    z: int
    p: float

    def __post_init__(self):
        if int(self.z) != self.z or self.z < 0:
            raise ValidationError(f"z must be a nonnegative integer, got {self.z!r}")
        if not 0.0 < self.p < 1.0:
            raise ValidationError(f"p must lie in (0, 1), got {self.p!r}")

    @classmethod
    def from_rates(cls, z: int, lambda1: float, lambda2: float) -> "AttackParams":
        if lambda1 <= 0 or lambda2 <= 0:
            raise ValidationError("mining rates must be positive")
        return cls(z, lambda2 / (lambda1 + lambda2))


def attacker_success_probability(params: AttackParams) -> float:
    """Probability that an attacker ever overtakes a chain ``z`` blocks deep.

    ``1 - sum_{k=0}^{z} C(z+k-1, z-1) (p^z q^k - p^k q^z)`` with ``q = 1 - p``,
    where the attacker's progress while the community mines ``z`` blocks is
    negative binomial.
    """
    z, p = params.z, params.p
    if z == 0:
        return 1.0
    q = 1.0 - p
    total = 0.0
    for k in range(z + 1):
        total += comb(z + k - 1, z - 1) * (p**z * q**k - p**k * q**z)
    return float(min(1.0, max(0.0, 1.0 - total)))


def attacker_success_monte_carlo(
    params: AttackParams, n_samples: int = 1_000_000, seed: Optional[int] = 0
) -> tuple[float, float]:
    """Monte-Carlo estimate of the attacker success probability and its standard error.

    Samples the attacker's block count ``K`` while the community finds ``z``
    blocks, then averages the gambler's-ruin catch-up probability
    ``(q/p)^(z-K)`` (or 1 once ``K >= z``).
    """
    rng = np.random.default_rng(seed)
    z, p = params.z, params.p
    if z == 0:
        return 1.0, 0.0
    attacker_blocks = rng.negative_binomial(z, p, size=n_samples)
    deficit = np.maximum(z - attacker_blocks, 0)
    catch_up = ((1.0 - p) / p) ** deficit
    return float(catch_up.mean()), float(catch_up.std(ddof=1) / np.sqrt(n_samples))


def selfish_threshold(gamma: float) -> float:
    """Smallest pool share for which selfish mining out-earns honest mining.

    ``(1 - gamma) / (3 - 2 gamma)`` for a tie-breaking share ``gamma``.
    """
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma!r}")
    return (1.0 - gamma) / (3.0 - 2.0 * gamma)
