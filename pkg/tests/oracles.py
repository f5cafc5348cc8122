"""Independent reference computations used by the test-suite."""

from __future__ import annotations

from itertools import combinations

import numpy as np


def enumerate_diagonal_contacts(k: int, l: int) -> dict[int, int]:
    """Histogram of diagonal-contact counts over every path to ``(k, l)``."""
    n = k + l
    hist: dict[int, int] = {}
    for k_steps in combinations(range(n), k):
        chosen = set(k_steps)
        x = y = touches = 0
        for step in range(n):
            if step in chosen:
                x += 1
            else:
                y += 1
            if x == y and x > 0:
                touches += 1
        hist[touches] = hist.get(touches, 0) + 1
    return hist


def dense_stationary(q: np.ndarray) -> np.ndarray:
    """Stationary vector of a dense generator via least squares on ``[Q^T; 1]``."""
    n = q.shape[0]
    a = np.vstack([q.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(a, b, rcond=None)[0]


def negative_binomial_catch_up(z: int, p: float, n: int, rng: np.random.Generator) -> tuple[float, float]:
    """Attacker success by sampling its block count as a sum of geometric waits.

    While the community finds ``z`` blocks the attacker finds ``K`` blocks,
    where each community block is preceded by a geometric number of attacker
    blocks.  From a deficit ``z - K`` the attacker catches up with gambler's
    ruin probability ``(q/p)^(z-K)``.
    """
    q = 1.0 - p
    k = np.zeros(n, dtype=np.int64)
    for _ in range(z):
        k += rng.geometric(p, size=n) - 1
    win = (q / p) ** np.maximum(z - k, 0)
    return float(win.mean()), float(win.std(ddof=1) / np.sqrt(n))
