"""Race-winning probability of a released pool block under a planar Poisson model.

Two honest miners M1 and M2 sit ``d12`` apart.  Pool relays form a homogeneous
Poisson process of intensity ``nu`` in the plane.  A transmission over distance
``d`` takes a normal time with mean ``k_slope * d`` and standard deviation
``sigma``.  When M1 publishes a block, each relay that hears it immediately
forwards a competing block to M2; the pool wins the race at M2 if some relayed
copy arrives before M1's direct copy.

``gamma_tilde`` only lets the relay with the shortest detour compete;
``gamma_all_relays`` lets every relay compete.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Tuple

import numpy as np
from scipy import integrate, special

from forkdyn.errors import DomainError, QuadratureError, ValidationError

Mode = Literal["nearest", "all"]

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
# Phi(-z) < 1e-12 beyond this many standard deviations
_PHI_CUTOFF = 7.1
# outer integral half-width, in units of sigma
_OUTER_HALF_WIDTH = 8.0


@dataclass(frozen=True)
class SpatialParams:
    d12: float
    nu: float
    k_slope: float = 50.0
    sigma: float = 1.0

    def __post_init__(self):
        for name in ("d12", "nu", "k_slope", "sigma"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValidationError(f"{name} must be positive and finite, got {value!r}")


def std_normal_cdf(x):
    """Standard normal distribution function via ``erfc``."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / SQRT2)


def ellipse_area(x: float, d12: float) -> float:
    """Area of the ellipse of points whose distances to the two foci sum to ``x``."""
    if x < d12:
        raise DomainError(f"round-trip distance {x} is shorter than the focal distance {d12}")
    return math.pi * x / 4.0 * math.sqrt(x * x - d12 * d12)


def ellipse_area_inverse(w: float, d12: float) -> float:
    """Round-trip distance whose ellipse has area ``w``."""
    if w < 0:
        raise DomainError(f"area must be nonnegative, got {w}")
    return float(_ainv(w, d12))


def _ainv(w, d12):
    # A^-1(w) = sqrt((sqrt((8w/pi)^2 + d^4) + d^2) / 2), vectorised
    u = 8.0 * np.asarray(w, dtype=float) / math.pi
    return np.sqrt((np.sqrt(u * u + d12**4) + d12 * d12) / 2.0)


def nearest_relay_cdf(x: float, params: SpatialParams) -> float:
    """``P(D <= x)`` for the shortest relay round-trip distance ``D``."""
    return -math.expm1(-params.nu * ellipse_area(x, params.d12))


def _quad(
    func: Callable[[float], float], a: float, b: float, epsabs: float, epsrel: float, what: str, **kw
) -> Tuple[float, float]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(func, a, b, epsabs=epsabs, epsrel=epsrel, limit=400, **kw)
    if not (math.isfinite(value) and err <= 10.0 * max(epsabs, epsrel * abs(value))):
        raise QuadratureError(f"{what} did not converge", value, err)
    return value, err


def gamma_tilde_with_error(params: SpatialParams) -> Tuple[float, float]:
    """``gamma_tilde`` and the quadrature error estimate."""
    d12, nu, k, s = params.d12, params.nu, params.k_slope, params.sigma
    scale = k / (SQRT3 * s)
    # beyond x_cut the conditional win probability is below Phi(-12)
    x_cut = d12 + 12.0 / scale
    w_cut = ellipse_area(x_cut, d12)

    def integrand(w):
        return nu * math.exp(-nu * w) * float(std_normal_cdf(scale * (d12 - float(_ainv(w, d12)))))

    return _quad(integrand, 0.0, w_cut, 1e-8, 1e-10, "gamma_tilde")


def gamma_tilde(params: SpatialParams) -> float:
    """Probability that the relay with the shortest detour beats direct transmission.

    Evaluated as ``nu * int_0^inf exp(-nu w) Phi(k (d12 - A^-1(w)) / (sqrt(3) sigma)) dw``.
    Never exceeds 0.5.
    """
    return gamma_tilde_with_error(params)[0]


def lambda_T_with_error(y: float, params: SpatialParams) -> Tuple[float, float]:
    d12, nu, k, s = params.d12, params.nu, params.k_slope, params.sigma
    x_max = (y + _PHI_CUTOFF * SQRT2 * s) / k
    if x_max <= d12:
        return 0.0, 0.0
    w_max = ellipse_area(x_max, d12)

    def integrand(w):
        return float(std_normal_cdf((y - k * float(_ainv(w, d12))) / (SQRT2 * s)))

    value, err = _quad(integrand, 0.0, w_max, 1e-11, 1e-9, "lambda_T")
    return nu * value, nu * err


def lambda_T(y: float, params: SpatialParams) -> float:
    """Mean number of relayed copies arriving within round-trip time ``y``.

    ``nu * int_{d12}^inf A'(x) Phi((y - k x) / (sqrt(2) sigma)) dx``, integrated
    in the area variable ``w = A(x)``; the range where ``Phi`` is below 1e-12
    is dropped.
    """
    return lambda_T_with_error(y, params)[0]


def gamma_all_relays_with_error(params: SpatialParams) -> Tuple[float, float]:
    d12, k, s = params.d12, params.k_slope, params.sigma
    centre = k * d12
    norm = 1.0 / (math.sqrt(2.0 * math.pi) * s)

    def integrand(u):
        return norm * math.exp(-((u - centre) ** 2) / (2 * s * s) - lambda_T(u, params))

    value, err = _quad(
        integrand,
        centre - _OUTER_HALF_WIDTH * s,
        centre + _OUTER_HALF_WIDTH * s,
        1e-8,
        1e-8,
        "gamma_all_relays",
        points=[centre],
    )
    return 1.0 - value, err


def gamma_all_relays(params: SpatialParams) -> float:
    """Probability that at least one relayed copy beats direct transmission.

    ``1 - E[exp(-Lambda_T(T12))]`` with ``T12 ~ N(k d12, sigma^2)``.
    """
    return gamma_all_relays_with_error(params)[0]


def default_window_radius(params: SpatialParams) -> float:
    """Radius of the sampling disc around the M1-M2 midpoint.

    Covers every relay whose detour is short enough to win with probability
    above ``Phi(-10)``.
    """
    # both modes race a normal with variance 3 sigma^2 around k (D - d12)
    x_w = params.d12 + 10.0 * SQRT3 * params.sigma / params.k_slope
    return x_w / 2.0


def monte_carlo_gamma(
    params: SpatialParams,
    mode: Mode = "nearest",
    n_samples: int = 100_000,
    window_radius: Optional[float] = None,
    seed: int = 0,
    substreams: int = 8,
) -> Tuple[float, float]:
    """Simulate relay configurations and delays; return ``(estimate, stderr)``.

    Each sample draws a Poisson number of relays uniformly in a disc centred
    on the M1-M2 midpoint, then normal hop delays.  ``mode="nearest"`` races
    only the relay with the shortest round-trip distance, summing two hop
    delays against the direct delay; ``mode="all"`` races every relay using
    ``T_i = k D_i + N(0, 2 sigma^2)`` against ``T12 ~ N(k d12, sigma^2)``.
    Samples are split across ``substreams`` seed-derived generators, so the
    result depends only on ``(seed, n_samples, substreams)``.
    """
    if n_samples < 1000:
        raise ValidationError(f"n_samples must be at least 1000, got {n_samples}")
    if mode not in ("nearest", "all"):
        raise ValidationError(f"mode must be 'nearest' or 'all', got {mode!r}")
    radius = default_window_radius(params) if window_radius is None else window_radius
    if radius < params.d12 / 2.0:
        raise ValidationError("window_radius must cover the segment between the miners")
    wins = 0
    children = np.random.SeedSequence(seed).spawn(substreams)
    sizes = np.full(substreams, n_samples // substreams)
    sizes[: n_samples % substreams] += 1
    for child, size in zip(children, sizes):
        rng = np.random.default_rng(child)
        wins += _race_batch(rng, params, mode, int(size), radius)
    p_hat = wins / n_samples
    return p_hat, math.sqrt(p_hat * (1.0 - p_hat) / n_samples)


def _race_batch(rng: np.random.Generator, params: SpatialParams, mode: Mode, size: int, radius: float) -> int:
    d12, k, s = params.d12, params.k_slope, params.sigma
    counts = rng.poisson(params.nu * math.pi * radius * radius, size=size)
    total = int(counts.sum())
    # uniform points in the disc
    r = radius * np.sqrt(rng.random(total))
    theta = 2.0 * math.pi * rng.random(total)
    px, py = r * np.cos(theta), r * np.sin(theta)
    d13 = np.hypot(px + d12 / 2.0, py)
    d32 = np.hypot(px - d12 / 2.0, py)
    direct = k * d12 + s * rng.standard_normal(size)
    owner = np.repeat(np.arange(size), counts)
    best = np.full(size, np.inf)
    if mode == "nearest":
        dist = d13 + d32
        order = np.lexsort((dist, owner))
        grouped = owner[order]
        leader = np.ones(total, dtype=bool)
        leader[1:] = grouped[1:] != grouped[:-1]
        idx = order[leader]
        hops = rng.standard_normal((idx.size, 2))
        relay_time = k * d13[idx] + s * hops[:, 0] + k * d32[idx] + s * hops[:, 1]
        best[owner[idx]] = relay_time
    else:
        relay_time = k * (d13 + d32) + SQRT2 * s * rng.standard_normal(total)
        np.minimum.at(best, owner, relay_time)
    return int(np.count_nonzero(best < direct))
