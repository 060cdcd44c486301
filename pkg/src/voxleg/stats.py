"""Mann-Whitney U test with an exact small-sample p-value.

The exact two-sided p is computed by dynamic programming over the null
distribution of U (all rank assignments equally likely) whenever the
combined sample size is at most 20 and there are no ties; otherwise the
normal approximation with tie and continuity corrections is used.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


class EmptySampleError(ValueError):
    """Both samples must be non-empty."""


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..N with ties assigned the mean of their covered ranks."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@lru_cache(maxsize=None)
def _exact_u_counts(n_a: int, n_b: int) -> list[int]:
    """Null distribution of U via the c(n,m,u) = c(n-1,m,u-m) + c(n,m-1,u) DP."""
    max_u = n_a * n_b
    # dp[n][m][u]
    dp = [[[0] * (max_u + 1) for _ in range(n_b + 1)] for _ in range(n_a + 1)]
    for m in range(n_b + 1):
        dp[0][m][0] = 1
    for n in range(1, n_a + 1):
        dp[n][0][0] = 1
        for m in range(1, n_b + 1):
            row = dp[n][m]
            sub_n = dp[n - 1][m]
            sub_m = dp[n][m - 1]
            for u in range(max_u + 1):
                total = sub_m[u]
                if u >= m:
                    total += sub_n[u - m]
                row[u] = total
    return dp[n_a][n_b]


def mann_whitney_u(sample_a, sample_b) -> tuple[float, float]:
    """Returns (U, two-sided p); U is the smaller of the two U statistics."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EmptySampleError("both samples must be non-empty")
    n_a, n_b = a.size, b.size
    combined = np.concatenate([a, b])
    ranks = _midranks(combined)
    rank_sum_a = float(ranks[:n_a].sum())
    u_a = rank_sum_a - n_a * (n_a + 1) / 2.0
    u_b = n_a * n_b - u_a
    u = min(u_a, u_b)

    _, tie_counts = np.unique(combined, return_counts=True)
    has_ties = bool((tie_counts > 1).any())

    if n_a + n_b <= 20 and not has_ties:
        counts = _exact_u_counts(n_a, n_b)
        total = math.comb(n_a + n_b, n_a)
        cdf = sum(counts[: int(u) + 1]) / total
        return u, min(1.0, 2.0 * cdf)

    n = n_a + n_b
    mu = n_a * n_b / 2.0
    tie_term = float(((tie_counts**3 - tie_counts).sum())) / (n * (n - 1)) if n > 1 else 0.0
    sigma2 = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if sigma2 <= 0:
        return u, 1.0
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(sigma2)
    p = math.erfc(z / math.sqrt(2.0))
    return u, min(1.0, p)
