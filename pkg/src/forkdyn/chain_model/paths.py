"""Exact counts of north/east lattice paths by number of diagonal contacts.

``n(k, l; i)`` is the number of unit-step paths from the origin to ``(k, l)``
that visit exactly ``i`` points ``(j, j)`` with ``j > 0``.  These counts are
the combinatorial weights in the stationary distribution of the honest fork
chain (see :func:`forkdyn.chain_model.closed_form_pi`).
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

from forkdyn.errors import DomainError, PathCountOverflow

#: Largest ``k + l`` for which counts are produced.
MAX_PATH_LENGTH = 64


def _check_range(k: int, l: int) -> None:
    if k < 0 or l < 0:
        raise DomainError(f"lattice coordinates must be nonnegative, got ({k}, {l})")
    if k + l > MAX_PATH_LENGTH:
        raise PathCountOverflow(
            f"k + l = {k + l} exceeds the supported path length {MAX_PATH_LENGTH}"
        )


@lru_cache(maxsize=None)
def _count(k: int, l: int, i: int) -> int:
    if i > min(k, l):
        return 0
    if k == 0 or l == 0:
        return 1 if i == 0 else 0
    if k == l:
        if i == 0:
            return 0
        return _count(k - 1, l, i - 1) + _count(k, l - 1, i - 1)
    return _count(k - 1, l, i) + _count(k, l - 1, i)


def count_lattice_paths(k: int, l: int, i: int) -> int:
    """Number of paths to ``(k, l)`` touching the diagonal exactly ``i`` times.

    Computed from the step recursion with memoisation, in exact integers.

    >>> count_lattice_paths(3, 2, 2)
    4
    """
    _check_range(k, l)
    if i < 0:
        raise DomainError(f"diagonal-contact count must be nonnegative, got {i}")
    return _count(k, l, i)


def _exact_ratio(numerator: int, denominator: int) -> int:
    q, r = divmod(numerator, denominator)
    if r:
        raise ArithmeticError(f"{numerator}/{denominator} is not an integer")
    return q


def grand_dyck_count(k: int, i: int) -> int:
    """Closed form ``T(k, i) = i 2^i C(2k-i, k) / (2k-i)`` for ``1 <= i <= k``.

    Equals ``count_lattice_paths(k, k, i)``.
    """
    if not 1 <= i <= k:
        raise DomainError(f"grand_dyck_count needs 1 <= i <= k, got k={k}, i={i}")
    _check_range(k, k)
    return _exact_ratio(i * 2**i * comb(2 * k - i, k), 2 * k - i)


def welsh_count(k: int, l: int, i: int) -> int:
    """Closed form of ``n(k, l; i)`` off the diagonal.

    ``(|k-l| + i) 2^i C(k+l-i, max(k, l)) / (k+l-i)``; symmetric in ``k`` and ``l``.
    """
    if k == l:
        raise DomainError("welsh_count is defined for k != l; use grand_dyck_count")
    _check_range(k, l)
    if not 0 <= i <= min(k, l):
        raise DomainError(f"need 0 <= i <= min(k, l), got i={i} for ({k}, {l})")
    n = k + l - i
    return _exact_ratio((abs(k - l) + i) * 2**i * comb(n, max(k, l)), n)


def path_count(k: int, l: int, i: int) -> int:
    """``n(k, l; i)`` by whichever closed form applies (zero outside the support)."""
    _check_range(k, l)
    if i < 0 or i > min(k, l):
        return 0
    if k == l:
        return 1 if k == 0 and i == 0 else (grand_dyck_count(k, i) if i >= 1 else 0)
    return welsh_count(k, l, i)
