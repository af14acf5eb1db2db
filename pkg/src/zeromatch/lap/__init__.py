"""Exact solvers for the rectangular LAP, the k-cardinality LAP and the
doubly-substochastic linear program.

The shortest-augmenting-path kernel comes in two flavors: a compiled
extension (``_jv_cy``) and a pure-Python fallback (``_jv_py``). The compiled
one is picked automatically when importable; set ``ZEROMATCH_PURE_PYTHON=1``
to force the fallback. Both kernels return bit-identical matchings.
"""

import os
from dataclasses import dataclass

import numpy as np

if os.environ.get("ZEROMATCH_PURE_PYTHON", "").strip() not in ("", "0"):
    from ._jv_py import KERNEL_NAME, lapjv
else:
    try:
        from ._jv_cy import KERNEL_NAME, lapjv
    except ImportError:
        from ._jv_py import KERNEL_NAME, lapjv

__all__ = ["Assignment", "solve_lap", "solve_klap", "solve_substochastic",
           "kernel_name"]


def kernel_name():
    """Name of the active LAP kernel ('cython' or 'python')."""
    return KERNEL_NAME


@dataclass(frozen=True)
class Assignment:
    """A partial assignment: distinct-row, distinct-column index pairs."""

    pairs: tuple
    total_cost: float

    @property
    def cardinality(self):
        return len(self.pairs)

    def to_matrix(self, m, n):
        """Binary m x n matrix with ones at the assigned pairs."""
        P = np.zeros((m, n))
        for i, j in self.pairs:
            P[i, j] = 1.0
        return P


def _check_cost(cost):
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost must be 2-D, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    return cost


def _total(cost, pairs):
    # plain left-to-right sum so both kernels report identical totals
    t = 0.0
    for i, j in pairs:
        t += cost[i, j]
    return t


def solve_lap(cost):
    """Minimum-cost complete assignment of the rows of an m x n matrix, m <= n."""
    cost = _check_cost(cost)
    m, n = cost.shape
    if m > n:
        raise ValueError(f"solve_lap needs m <= n, got {m}x{n}")
    col4row, _ = lapjv(cost)
    pairs = tuple((i, int(col4row[i])) for i in range(m))
    return Assignment(pairs, _total(cost, pairs))


def solve_klap(cost, k):
    """Minimum-cost assignment with exactly k row-column pairs.

    Uses the square augmentation of order m+n-k: dummy columns absorb the
    m-k unassigned rows, dummy rows absorb the n-k unassigned columns, and
    a large sentinel blocks dummy-dummy pairings.
    """
    cost = _check_cost(cost)
    m, n = cost.shape
    if m > n:
        raise ValueError(f"solve_klap needs m <= n, got {m}x{n}")
    if not 1 <= k <= m:
        raise ValueError(f"cardinality k={k} out of range [1, {m}]")

    if k == m == n:
        return solve_lap(cost)

    size = m + n - k
    big = 1.0 + size * float(np.max(np.abs(cost))) if cost.size else 1.0
    aug = np.zeros((size, size))
    aug[:m, :n] = cost
    aug[m:, n:] = big
    col4row, _ = lapjv(aug)
    pairs = tuple((i, int(col4row[i])) for i in range(m) if col4row[i] < n)
    if len(pairs) != k:  # pragma: no cover - guarded by construction
        raise AssertionError("k-cardinality augmentation returned wrong cardinality")
    return Assignment(pairs, _total(cost, pairs))


def solve_substochastic(cost):
    """Minimizer of <cost, P> over matrices with row and column sums <= 1.

    The optimum of this LP is attained at a partial permutation, found by a
    square order-(m+n) padding in which every row and column may route to a
    zero-cost dummy. Pairs with positive cost never appear in the result;
    zero-cost pairs may, under the kernel's deterministic tie rule.
    """
    cost = _check_cost(cost)
    m, n = cost.shape
    size = m + n
    big = 1.0 + size * float(np.max(np.abs(cost))) if cost.size else 1.0
    aug = np.full((size, size), big)
    aug[:m, :n] = cost
    aug[m:, n:] = 0.0
    aug[np.arange(m), n + np.arange(m)] = 0.0
    aug[m + np.arange(n), np.arange(n)] = 0.0
    col4row, _ = lapjv(aug)
    pairs = tuple((i, int(col4row[i])) for i in range(m) if col4row[i] < n)
    return Assignment(pairs, _total(cost, pairs))
