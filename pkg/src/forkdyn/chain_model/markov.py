"""Two-branch fork chain for a pool and the rest of the mining community.

State ``(k, l)``: the pool has ``k`` blocks and the community ``l`` blocks past
the last block they agree on.  Both sides mine at constant rates and a
communication between them completes at rate ``mu``.  The countable chain is
truncated to ``k + l <= N``; mining transitions out of the truncated set are
redirected to ``(0, 0)`` so that the truncated chain stays irreducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Literal, NamedTuple, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from forkdyn.chain_model.paths import path_count
from forkdyn.errors import SingularSystemError, ValidationError

Variant = Literal["honest", "selfish"]
VARIANTS = ("honest", "selfish")


@dataclass(frozen=True)
class ChainRates:
    """Mining and communication rates, all per hour.

    ``strict=False`` drops the ``lambda1 < lambda2`` requirement (used for
    symmetry checks); positivity is always enforced.
    """

    lambda1: float
    lambda2: float
    mu: float
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "mu"):
            value = getattr(self, name)
            if not (value > 0 and np.isfinite(value)):
                raise ValidationError(f"{name} must be positive and finite, got {value!r}")
        if self.strict and not self.lambda1 < self.lambda2:
            raise ValidationError(
                f"pool rate lambda1={self.lambda1} must be below community rate "
                f"lambda2={self.lambda2}"
            )

    @property
    def total_mining(self) -> float:
        return self.lambda1 + self.lambda2


class ForkState(NamedTuple):
    k: int
    l: int


def truncated_states(truncation: int) -> List[ForkState]:
    """States with ``k + l <= truncation``, ordered by ``k + l`` then ``k``."""
    return [ForkState(k, s - k) for s in range(truncation + 1) for k in range(s + 1)]


def _resets(variant: Variant, k: int, l: int) -> bool:
    if variant == "honest":
        return k != l
    # selfish: community ahead, or pool one ahead after cashing in a lead
    return k < l or (k >= 2 and l == k - 1)


@dataclass
class Generator:
    """Sparse transition-rate structure of the truncated chain."""

    truncation: int
    variant: Variant
    rates: ChainRates
    entries: Dict[Tuple[ForkState, ForkState], float]

    @property
    def states(self) -> List[ForkState]:
        return truncated_states(self.truncation)

    def outflow(self, state: Tuple[int, int]) -> Dict[ForkState, float]:
        """Off-diagonal rates out of ``state``."""
        state = ForkState(*state)
        return {dst: r for (src, dst), r in self.entries.items() if src == state}

    def exit_rate(self, state: Tuple[int, int]) -> float:
        return sum(self.outflow(state).values())

    def to_sparse(self, order: List[ForkState] | None = None) -> sparse.csr_matrix:
        """Full generator ``Q`` (diagonal = minus row outflow) in ``order``."""
        order = self.states if order is None else order
        index = {s: n for n, s in enumerate(order)}
        rows, cols, vals = [], [], []
        diag = np.zeros(len(order))
        for (src, dst), rate in self.entries.items():
            rows.append(index[src])
            cols.append(index[dst])
            vals.append(rate)
            diag[index[src]] -= rate
        rows.extend(range(len(order)))
        cols.extend(range(len(order)))
        vals.extend(diag)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(len(order), len(order)))


def build_generator(rates: ChainRates, variant: Variant, truncation: int = 6) -> Generator:
    """Transition rates of the honest or selfish fork chain, truncated at ``k + l <= N``.

    Both variants move ``(k, l) -> (k+1, l)`` at ``lambda1`` and
    ``(k, l) -> (k, l+1)`` at ``lambda2``.  The honest chain returns to
    ``(0, 0)`` at rate ``mu`` whenever ``k != l``; the selfish chain does so
    only when the community is ahead or when the pool, after being two or more
    ahead, sits exactly one block in front.  On the boundary ``k + l = N`` the
    mining transitions are sent to ``(0, 0)``.
    """
    if not isinstance(rates, ChainRates):
        raise ValidationError("rates must be a ChainRates instance")
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if truncation < 2:
        raise ValidationError(f"truncation must be at least 2, got {truncation}")
    origin = ForkState(0, 0)
    entries: Dict[Tuple[ForkState, ForkState], float] = {}

    def add(src: ForkState, dst: ForkState, rate: float) -> None:
        if src != dst:
            entries[(src, dst)] = entries.get((src, dst), 0.0) + rate

    for s in truncated_states(truncation):
        k, l = s
        boundary = k + l == truncation
        add(s, origin if boundary else ForkState(k + 1, l), rates.lambda1)
        add(s, origin if boundary else ForkState(k, l + 1), rates.lambda2)
        if _resets(variant, k, l):
            add(s, origin, rates.mu)
    return Generator(truncation, variant, rates, entries)


@dataclass
class StationaryDistribution:
    truncation: int
    probabilities: Dict[ForkState, float]

    def __getitem__(self, state: Tuple[int, int]) -> float:
        return self.probabilities.get(ForkState(*state), 0.0)

    def __iter__(self) -> Iterator[ForkState]:
        return iter(self.probabilities)

    def grid(self, size: int = 4) -> np.ndarray:
        """``size x size`` array of ``pi(k, l)`` for ``k, l < size``."""
        return np.array([[self[(k, l)] for l in range(size)] for k in range(size)])

    def tail_mass(self, min_length: int) -> float:
        """Total probability of states with ``k + l >= min_length``."""
        return sum(p for s, p in self.probabilities.items() if s.k + s.l >= min_length)


def solve_stationary(gen: Generator) -> StationaryDistribution:
    """Solve ``pi Q = 0`` with ``sum(pi) = 1`` by a sparse direct solve.

    One balance equation is replaced by the normalisation row.  The result is
    polished with one step of iterative refinement and clipped at zero.
    """
    order = gen.states
    q = gen.to_sparse(order)
    a = q.T.tolil()
    a[len(order) - 1, :] = np.ones(len(order))
    a = a.tocsc()
    b = np.zeros(len(order))
    b[-1] = 1.0
    with np.errstate(all="ignore"):
        pi = spsolve(a, b)
        if np.all(np.isfinite(pi)):
            pi = pi + spsolve(a, b - a @ pi)
    if not np.all(np.isfinite(pi)):
        raise SingularSystemError(
            f"stationary equations are singular for the {gen.variant} chain "
            f"at truncation {gen.truncation}"
        )
    residual = np.max(np.abs(q.T @ pi))
    if residual > 1e-8 or np.min(pi) < -1e-12:
        raise SingularSystemError(
            f"no valid stationary distribution (residual {residual:.3g}, min {pi.min():.3g})"
        )
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return StationaryDistribution(gen.truncation, dict(zip(order, pi.tolist())))


def stationary_residual(gen: Generator, dist: StationaryDistribution) -> float:
    """Max-norm of ``pi Q``."""
    order = gen.states
    pi = np.array([dist[s] for s in order])
    return float(np.max(np.abs(gen.to_sparse(order).T @ pi)))


def closed_form_pi(rates: ChainRates, k: int, l: int) -> float:
    """Unnormalised stationary weight of ``(k, l)`` for the honest chain.

    ``lambda1^k lambda2^l sum_i n(k,l;i) / ((lambda1+lambda2)^i (lambda1+lambda2+mu)^(k+l-i))``
    with weight 1 at the origin.
    """
    if k < 0 or l < 0:
        raise ValidationError(f"state must be nonnegative, got ({k}, {l})")
    if k == 0 and l == 0:
        return 1.0
    lam = rates.lambda1 + rates.lambda2
    lam_mu = lam + rates.mu
    total = 0.0
    for i in range(min(k, l) + 1):
        n = path_count(k, l, i)
        if n:
            total += n / (lam**i * lam_mu ** (k + l - i))
    return rates.lambda1**k * rates.lambda2**l * total


def closed_form_distribution(rates: ChainRates, truncation: int) -> StationaryDistribution:
    """Closed-form weights normalised over ``k + l <= truncation``."""
    states = truncated_states(truncation)
    weights = np.array([closed_form_pi(rates, s.k, s.l) for s in states])
    weights /= weights.sum()
    return StationaryDistribution(truncation, dict(zip(states, weights.tolist())))


def orphan_rate(pi: StationaryDistribution, rates: ChainRates) -> float:
    """Approximate orphan-block creation rate ``pi(1,1) (lambda1 + lambda2)`` per hour."""
    return pi[(1, 1)] * (rates.lambda1 + rates.lambda2)
